"""Closed-form TDoA multilateration.

Range differences to the first anchor linearize the hyperbolic equations
into B q = d1 m + c with the emitter-to-first-anchor range d1 unknown;
substituting the least-squares solution q(d1) back into ||q|| = d1 yields
a quadratic in d1. Negative roots are discarded; with two positive roots
the candidate above the anchor plane (positive z in the working frame) is
taken, and a genuinely ambiguous pair is surfaced as a typed error for the
caller to resolve (e.g. by track continuity).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .constants import SPEED_OF_LIGHT
from .geo import CartesianPosition

COND_LIMIT = 1e10  # on the normal equations, i.e. cond(B)^2


class GeometryError(ValueError):
    """Anchor geometry cannot support a solution (rank/conditioning)."""


class NoRootError(ValueError):
    """The range quadratic has no nonnegative root."""


class AmbiguousRootError(ValueError):
    """Two admissible candidates; carries both for downstream resolution."""

    def __init__(self, candidates: tuple[CartesianPosition, CartesianPosition],
                 d1_values: tuple[float, float]):
        super().__init__("two admissible multilateration candidates")
        self.candidates = candidates
        self.d1_values = d1_values


class RootMultiplicity(Enum):
    UNIQUE = "unique"
    TWO_POSITIVE = "two_positive"
    NONE = "none"


@dataclass(frozen=True)
class TdoaMeasurementSet:
    """Anchors (first at the frame origin) with their times of arrival."""

    anchors: np.ndarray   # (N, 3), anchors[0] == (0, 0, 0)
    toas: np.ndarray      # (N,)

    def __post_init__(self):
        anchors = np.asarray(self.anchors, dtype=float)
        toas = np.asarray(self.toas, dtype=float)
        if anchors.ndim != 2 or anchors.shape[1] != 3:
            raise ValueError("anchors must be an (N, 3) array")
        if anchors.shape[0] < 4:
            raise ValueError("3-D multilateration needs at least 4 anchors")
        if toas.shape != (anchors.shape[0],):
            raise ValueError("one ToA per anchor required")
        if not np.all(np.isfinite(anchors)) or not np.all(np.isfinite(toas)):
            raise ValueError("anchors and ToAs must be finite")
        if np.any(anchors[0] != 0.0):
            raise ValueError("first anchor must sit at the frame origin")
        object.__setattr__(self, "anchors", anchors)
        object.__setattr__(self, "toas", toas)


@dataclass(frozen=True)
class MlatSolution:
    position: CartesianPosition
    d1: float
    root_multiplicity: RootMultiplicity
    condition_number: float


def tdoa_distances(toas) -> np.ndarray:
    """Range differences to the first receiver: (t_i - t_1) * c, i = 2..N."""
    toas = np.asarray(toas, dtype=float)
    if toas.size < 2:
        raise ValueError("need at least two ToAs")
    return (toas[1:] - toas[0]) * SPEED_OF_LIGHT


def build_system(anchors, d_i1) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Linear system pieces (B, m, c) relating position to range differences."""
    anchors = np.asarray(anchors, dtype=float)
    d_i1 = np.asarray(d_i1, dtype=float)
    B = anchors[1:].copy()
    m = -d_i1
    D_sq = np.sum(B * B, axis=1)
    c_vec = 0.5 * (D_sq - d_i1 * d_i1)
    return B, m, c_vec


def _quadratic_roots(a: float, b: float, c: float) -> list[float]:
    if a == 0.0:
        return [-c / b] if b != 0.0 else []
    disc = b * b - 4.0 * a * c
    if disc < 0.0:
        return []
    sq = math.sqrt(disc)
    # Citardauq pairing avoids cancellation when b dominates.
    q = -0.5 * (b + math.copysign(sq, b))
    roots = {q / a}
    if q != 0.0:
        roots.add(c / q)
    elif disc == 0.0:
        roots = {q / a}
    else:
        roots.add(0.0)
    return sorted(roots)


def solve(meas: TdoaMeasurementSet) -> MlatSolution:
    """Closed-form solve; works unchanged for overdetermined sets (N > 4)."""
    d_i1 = tdoa_distances(meas.toas)
    B, m, c_vec = build_system(meas.anchors, d_i1)

    sv = np.linalg.svd(B, compute_uv=False)
    if sv[-1] <= sv[0] * 1e-12 or sv[-1] == 0.0:
        raise GeometryError("anchor matrix is rank deficient")
    cond = float((sv[0] / sv[-1]) ** 2)
    if cond > COND_LIMIT:
        raise GeometryError(f"anchor geometry too ill-conditioned ({cond:.2e})")

    # Least squares via orthogonal factorization (numerically the same
    # solution as the normal-equation pseudo-inverse form).
    sol, *_ = np.linalg.lstsq(B, np.column_stack([c_vec, m]), rcond=None)
    u, v = sol[:, 0], sol[:, 1]

    a = float(v @ v) - 1.0
    b = 2.0 * float(u @ v)
    c0 = float(u @ u)
    roots = [r for r in _quadratic_roots(a, b, c0) if r >= 0.0]
    if not roots:
        raise NoRootError("no nonnegative root for the emitter range")

    if len(roots) == 1:
        d1 = roots[0]
        q = u + d1 * v
        return MlatSolution(CartesianPosition(*q), d1, RootMultiplicity.UNIQUE, cond)

    cands = [u + r * v for r in roots]
    above = [i for i, q in enumerate(cands) if q[2] > 0.0]
    if len(above) == 1:
        i = above[0]
        return MlatSolution(CartesianPosition(*cands[i]), roots[i],
                            RootMultiplicity.TWO_POSITIVE, cond)
    raise AmbiguousRootError(
        (CartesianPosition(*cands[0]), CartesianPosition(*cands[1])),
        (roots[0], roots[1]))


def solve_overdetermined(meas: TdoaMeasurementSet) -> MlatSolution:
    """Explicit N > 4 entry point; the pipeline is identical to :func:`solve`."""
    if meas.anchors.shape[0] <= 4:
        raise ValueError("overdetermined solve expects more than 4 anchors")
    return solve(meas)


def solve_world(positions, toas) -> tuple[MlatSolution, CartesianPosition]:
    """Solve with anchors given in a shared frame; first entry is the anchor.

    Returns the raw solution (in the first-anchor frame) plus the emitter
    position mapped back to the shared frame.
    """
    positions = np.asarray(positions, dtype=float)
    origin = positions[0].copy()
    meas = TdoaMeasurementSet(positions - origin, np.asarray(toas, dtype=float))
    sol = solve(meas)
    world = origin + np.array(sol.position.as_tuple())
    return sol, CartesianPosition(*world)
