"""Scenario description for the network simulator, with JSON config I/O.

A scenario bundles the receiver fleet (positions, clock behavior, timestamp
resolution), the aircraft trajectories (waypoint lists with broadcast
cadence and trusted/target flags), the channel constants, and the master
RNG seed. Configs are plain JSON; see ``docs`` in the README for the schema.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

from .channel import ChannelParams
from .clocks import ClockParams, SkewRegime
from .geo import GeodeticPosition


class ReceiverKind(Enum):
    GSN = "GSN"   # GPS-disciplined clock, offset identically zero
    SN = "SN"     # free-running clock, drifts per its ClockParams


@dataclass(frozen=True)
class Receiver:
    id: int
    position: GeodeticPosition
    kind: ReceiverKind
    sampling_rate_hz: float
    clock: ClockParams | None = None
    toa_jitter_std_s: float = 0.0   # time-tagging noise beyond quantization

    def __post_init__(self):
        if self.sampling_rate_hz <= 0:
            raise ValueError("sampling_rate_hz must be positive")
        if self.toa_jitter_std_s < 0:
            raise ValueError("toa_jitter_std_s must be nonnegative")
        if self.kind is ReceiverKind.SN and self.clock is None:
            raise ValueError(f"SN receiver {self.id} needs clock parameters")


@dataclass(frozen=True)
class Waypoint:
    t: float
    position: GeodeticPosition


@dataclass(frozen=True)
class Trajectory:
    """Piecewise-linear aircraft path broadcasting at a fixed period.

    ``position_error_std_m`` models the error of the position the aircraft
    itself reports: the reference table carries the claimed (jittered)
    position for trusted aircraft, since that claim is all the network can
    use. Target rows always carry the exact position for scoring.
    """

    av_id: int
    waypoints: tuple[Waypoint, ...]
    broadcast_period_s: float
    trusted: bool
    first_broadcast_s: float = 0.0
    position_error_std_m: float = 0.0

    def __post_init__(self):
        if self.broadcast_period_s <= 0:
            raise ValueError("broadcast_period_s must be positive")
        if self.position_error_std_m < 0:
            raise ValueError("position_error_std_m must be nonnegative")
        if len(self.waypoints) < 2:
            raise ValueError("trajectory needs at least two waypoints")
        ts = [w.t for w in self.waypoints]
        if any(b <= a for a, b in zip(ts, ts[1:])):
            raise ValueError("waypoint times must be strictly increasing")
        object.__setattr__(self, "waypoints", tuple(self.waypoints))

    def position_at(self, t: float) -> GeodeticPosition | None:
        """Linear lat/lon/alt interpolation; None outside the waypoint span."""
        wps = self.waypoints
        if t < wps[0].t or t > wps[-1].t:
            return None
        for a, b in zip(wps, wps[1:]):
            if t <= b.t:
                f = (t - a.t) / (b.t - a.t)
                pa, pb = a.position, b.position
                return GeodeticPosition(
                    pa.lat_deg + f * (pb.lat_deg - pa.lat_deg),
                    pa.lon_deg + f * (pb.lon_deg - pa.lon_deg),
                    pa.alt_m + f * (pb.alt_m - pa.alt_m),
                )
        return None

    def broadcast_times(self, duration_s: float) -> list[float]:
        times = []
        t = self.first_broadcast_s
        t_stop = min(duration_s, self.waypoints[-1].t)
        while t <= t_stop:
            if t >= self.waypoints[0].t:
                times.append(t)
            t += self.broadcast_period_s
        return times


@dataclass(frozen=True)
class Scenario:
    receivers: tuple[Receiver, ...]
    trajectories: tuple[Trajectory, ...]
    channel: ChannelParams = field(default_factory=ChannelParams)
    duration_s: float = 3600.0
    rng_seed: int = 0

    def __post_init__(self):
        if self.duration_s <= 0:
            raise ValueError("duration_s must be positive")
        ids = [r.id for r in self.receivers]
        if len(set(ids)) != len(ids):
            raise ValueError("receiver ids must be unique")
        object.__setattr__(self, "receivers", tuple(self.receivers))
        object.__setattr__(self, "trajectories", tuple(self.trajectories))


FORMAT_TAG = "airtrack-scenario-v1"


def _clock_to_dict(c: ClockParams) -> dict:
    return {
        "initial_offset_s": c.initial_offset_s,
        "regime_switch_seed": c.regime_switch_seed,
        "regimes": [
            {"skew": r.skew, "noise_std": r.noise_std, "dwell_mean_s": r.dwell_mean_s}
            for r in c.regimes
        ],
    }


def _clock_from_dict(d: dict) -> ClockParams:
    return ClockParams(
        initial_offset_s=d["initial_offset_s"],
        regimes=tuple(
            SkewRegime(r["skew"], r["noise_std"], r["dwell_mean_s"]) for r in d["regimes"]
        ),
        regime_switch_seed=d.get("regime_switch_seed", 0),
    )


def scenario_to_dict(s: Scenario) -> dict:
    return {
        "format": FORMAT_TAG,
        "seed": s.rng_seed,
        "duration_s": s.duration_s,
        "channel": {
            "carrier_frequency_hz": s.channel.carrier_frequency_hz,
            "a0": s.channel.a0,
            "b0": s.channel.b0,
            "mu_los_db": s.channel.mu_los_db,
            "mu_nlos_db": s.channel.mu_nlos_db,
            "tx_power_dbm": s.channel.tx_power_dbm,
            "rx_sensitivity_dbm": s.channel.rx_sensitivity_dbm,
        },
        "receivers": [
            {
                "id": r.id,
                "lat": r.position.lat_deg,
                "lon": r.position.lon_deg,
                "alt": r.position.alt_m,
                "kind": r.kind.value,
                "sampling_rate_hz": r.sampling_rate_hz,
                "toa_jitter_std_s": r.toa_jitter_std_s,
                **({"clock": _clock_to_dict(r.clock)} if r.clock is not None else {}),
            }
            for r in s.receivers
        ],
        "trajectories": [
            {
                "av_id": tr.av_id,
                "trusted": tr.trusted,
                "broadcast_period_s": tr.broadcast_period_s,
                "first_broadcast_s": tr.first_broadcast_s,
                "position_error_std_m": tr.position_error_std_m,
                "waypoints": [
                    [w.t, w.position.lat_deg, w.position.lon_deg, w.position.alt_m]
                    for w in tr.waypoints
                ],
            }
            for tr in s.trajectories
        ],
    }


def scenario_from_dict(d: dict) -> Scenario:
    if d.get("format") != FORMAT_TAG:
        raise ValueError(f"not a {FORMAT_TAG} config (format={d.get('format')!r})")
    ch = d.get("channel", {})
    return Scenario(
        receivers=tuple(
            Receiver(
                id=r["id"],
                position=GeodeticPosition(r["lat"], r["lon"], r["alt"]),
                kind=ReceiverKind(r["kind"]),
                sampling_rate_hz=r["sampling_rate_hz"],
                clock=_clock_from_dict(r["clock"]) if "clock" in r else None,
                toa_jitter_std_s=r.get("toa_jitter_std_s", 0.0),
            )
            for r in d["receivers"]
        ),
        trajectories=tuple(
            Trajectory(
                av_id=t["av_id"],
                waypoints=tuple(
                    Waypoint(w[0], GeodeticPosition(w[1], w[2], w[3]))
                    for w in t["waypoints"]
                ),
                broadcast_period_s=t["broadcast_period_s"],
                trusted=t["trusted"],
                first_broadcast_s=t.get("first_broadcast_s", 0.0),
                position_error_std_m=t.get("position_error_std_m", 0.0),
            )
            for t in d["trajectories"]
        ),
        channel=ChannelParams(**ch),
        duration_s=d["duration_s"],
        rng_seed=d["seed"],
    )


def save_scenario(s: Scenario, path: str | Path) -> None:
    Path(path).write_text(json.dumps(scenario_to_dict(s), indent=2, sort_keys=True) + "\n")


def load_scenario(path: str | Path) -> Scenario:
    return scenario_from_dict(json.loads(Path(path).read_text()))
