"""Structured-text container for model snapshots.

One field per line, type-tagged:

    # airtrack-model v1
    s name string-value
    i name 42
    f name 1.5e-09
    a name n v1 ... vn
    m name rows cols v11 v12 ...

Floats are written with ``repr`` so snapshots round-trip exactly.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

MODEL_HEADER = "# airtrack-model v1"


def dump_fields(fields: dict) -> str:
    lines = [MODEL_HEADER]
    for name, value in fields.items():
        if isinstance(value, str):
            lines.append(f"s {name} {value}")
        elif isinstance(value, (bool, np.bool_)):
            lines.append(f"i {name} {int(value)}")
        elif isinstance(value, (int, np.integer)):
            lines.append(f"i {name} {int(value)}")
        elif isinstance(value, (float, np.floating)):
            lines.append(f"f {name} {float(value)!r}")
        elif isinstance(value, np.ndarray) and value.ndim == 1:
            vals = " ".join(repr(float(v)) for v in value)
            lines.append(f"a {name} {value.size} {vals}".rstrip())
        elif isinstance(value, np.ndarray) and value.ndim == 2:
            vals = " ".join(repr(float(v)) for v in value.ravel())
            lines.append(f"m {name} {value.shape[0]} {value.shape[1]} {vals}".rstrip())
        else:
            raise TypeError(f"cannot serialize field {name!r} of type {type(value)}")
    return "\n".join(lines) + "\n"


def parse_fields(text: str) -> dict:
    lines = text.strip().split("\n")
    if not lines or lines[0].strip() != MODEL_HEADER:
        raise ValueError(f"missing header {MODEL_HEADER!r}")
    out: dict = {}
    for line in lines[1:]:
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        tag, name, rest = line.split(" ", 2) if line.count(" ") >= 2 else (*line.split(" "), "")
        if tag == "s":
            out[name] = rest
        elif tag == "i":
            out[name] = int(rest)
        elif tag == "f":
            out[name] = float(rest)
        elif tag == "a":
            parts = rest.split()
            n = int(parts[0])
            vals = np.array([float(v) for v in parts[1:]], dtype=float)
            if vals.size != n:
                raise ValueError(f"array {name}: declared {n}, got {vals.size}")
            out[name] = vals
        elif tag == "m":
            parts = rest.split()
            r, c = int(parts[0]), int(parts[1])
            vals = np.array([float(v) for v in parts[2:]], dtype=float)
            if vals.size != r * c:
                raise ValueError(f"matrix {name}: declared {r}x{c}, got {vals.size}")
            out[name] = vals.reshape(r, c)
        else:
            raise ValueError(f"unknown field tag {tag!r}")
    return out


def save_fields(fields: dict, path: str | Path) -> None:
    Path(path).write_text(dump_fields(fields))


def load_fields(path: str | Path) -> dict:
    return parse_fields(Path(path).read_text())
