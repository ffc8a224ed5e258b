"""Broadcast record and truth-table types with their line-oriented file formats.

One record line captures a single aircraft transmission as seen by every
receiver that decoded it:

    server_time_s av_id trusted n (rx_id lat lon alt toa_s kind) * n

Fields are whitespace-separated; floats are written with ``repr`` so files
round-trip bit-exactly. Both formats carry a versioned header line.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

from .geo import GeodeticPosition
from .scenario import ReceiverKind

log = logging.getLogger(__name__)

RECORDS_HEADER = "# airtrack-records v1"
TRUTH_HEADER = "# airtrack-truth v1"


@dataclass(frozen=True)
class Reception:
    rx_id: int
    position: GeodeticPosition
    toa_s: float
    kind: ReceiverKind


@dataclass(frozen=True)
class BroadcastRecord:
    server_time_s: float
    av_id: int
    trusted: bool
    receptions: tuple[Reception, ...]

    def __post_init__(self):
        if len(self.receptions) < 1:
            raise ValueError("a record needs at least one reception")
        object.__setattr__(self, "receptions", tuple(self.receptions))

    @property
    def n(self) -> int:
        return len(self.receptions)


@dataclass(frozen=True)
class TruthRow:
    av_id: int
    k: int              # per-aircraft transmission index
    time_s: float
    position: GeodeticPosition


def write_records(records: Iterable[BroadcastRecord], path: str | Path) -> None:
    with open(path, "w") as f:
        f.write(RECORDS_HEADER + "\n")
        for rec in records:
            parts = [repr(rec.server_time_s), str(rec.av_id),
                     "1" if rec.trusted else "0", str(rec.n)]
            for rx in rec.receptions:
                parts += [str(rx.rx_id), repr(rx.position.lat_deg),
                          repr(rx.position.lon_deg), repr(rx.position.alt_m),
                          repr(rx.toa_s), rx.kind.value]
            f.write(" ".join(parts) + "\n")


class RecordParseError(ValueError):
    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


def _parse_record_line(line: str, line_no: int) -> BroadcastRecord:
    parts = line.split()
    if len(parts) < 4:
        raise RecordParseError(line_no, "truncated record")
    try:
        server_time = float(parts[0])
        av_id = int(parts[1])
        trusted = bool(int(parts[2]))
        n = int(parts[3])
    except ValueError as exc:
        raise RecordParseError(line_no, f"bad record head: {exc}") from exc
    fields = parts[4:]
    if len(fields) != 6 * n:
        raise RecordParseError(
            line_no, f"expected {6 * n} reception fields for n={n}, got {len(fields)}")
    receptions = []
    for i in range(n):
        rx_id, lat, lon, alt, toa, kind = fields[6 * i: 6 * i + 6]
        try:
            receptions.append(Reception(
                rx_id=int(rx_id),
                position=GeodeticPosition(float(lat), float(lon), float(alt)),
                toa_s=float(toa),
                kind=ReceiverKind(kind),
            ))
        except ValueError as exc:
            raise RecordParseError(line_no, f"bad reception {i}: {exc}") from exc
    return BroadcastRecord(server_time, av_id, trusted, tuple(receptions))


def read_records(path: str | Path) -> list[BroadcastRecord]:
    """Parse a record file, validating per line and sorting by server time.

    Out-of-order lines are tolerated with a warning and a stable re-sort;
    anything malformed raises :class:`RecordParseError` with its line number.
    """
    records = []
    with open(path) as f:
        first = f.readline().rstrip("\n")
        if first != RECORDS_HEADER:
            raise RecordParseError(1, f"missing header {RECORDS_HEADER!r}")
        for line_no, line in enumerate(f, start=2):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            records.append(_parse_record_line(line, line_no))
    times = [r.server_time_s for r in records]
    if any(b < a for a, b in zip(times, times[1:])):
        log.warning("records in %s not sorted by server_time; re-sorting", path)
        records.sort(key=lambda r: r.server_time_s)
    return records


def write_truth(rows: Iterable[TruthRow], path: str | Path) -> None:
    with open(path, "w") as f:
        f.write(TRUTH_HEADER + "\n")
        for r in rows:
            f.write(f"{r.av_id} {r.k} {repr(r.time_s)} {repr(r.position.lat_deg)} "
                    f"{repr(r.position.lon_deg)} {repr(r.position.alt_m)}\n")


def read_truth(path: str | Path) -> list[TruthRow]:
    rows = []
    with open(path) as f:
        first = f.readline().rstrip("\n")
        if first != TRUTH_HEADER:
            raise RecordParseError(1, f"missing header {TRUTH_HEADER!r}")
        for line_no, line in enumerate(f, start=2):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 6:
                raise RecordParseError(line_no, "expected 6 fields")
            rows.append(TruthRow(
                av_id=int(parts[0]), k=int(parts[1]), time_s=float(parts[2]),
                position=GeodeticPosition(float(parts[3]), float(parts[4]), float(parts[5])),
            ))
    return rows
