"""Constant-velocity Kalman filter over position fixes (KF2).

State is [x, y, z, vx, vy, vz]; process noise follows the white-noise
acceleration discretization with a single spectral density knob. The
altitude-downweighted localization error metric used for all reporting
lives here too.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geo import CartesianPosition

INIT_P_DIAG = 1e6


class InnovationSingularError(np.linalg.LinAlgError):
    """Innovation covariance could not be inverted."""


@dataclass(frozen=True)
class MotionModel:
    """Constant-velocity dynamics with optional acceleration input."""

    accel_density: float = 1.0                 # m^2/s^3 white-noise accel
    R: np.ndarray = field(default_factory=lambda: np.diag([300.0 ** 2,
                                                           300.0 ** 2,
                                                           1000.0 ** 2]))
    u: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        R = np.asarray(self.R, dtype=float)
        if R.shape != (3, 3) or not np.allclose(R, R.T):
            raise ValueError("R must be a symmetric 3x3 matrix")
        object.__setattr__(self, "R", R)
        object.__setattr__(self, "u", np.asarray(self.u, dtype=float))

    def phi(self, dt: float) -> np.ndarray:
        F = np.eye(6)
        F[0, 3] = F[1, 4] = F[2, 5] = dt
        return F

    def beta(self, dt: float) -> np.ndarray:
        B = np.zeros((6, 3))
        B[:3] = np.eye(3) * (0.5 * dt * dt)
        B[3:] = np.eye(3) * dt
        return B

    def process_noise(self, dt: float) -> np.ndarray:
        q = self.accel_density
        Q = np.zeros((6, 6))
        for i in range(3):
            Q[i, i] = q * dt ** 4 / 4.0
            Q[i, i + 3] = Q[i + 3, i] = q * dt ** 3 / 2.0
            Q[i + 3, i + 3] = q * dt * dt
        return Q

    @property
    def H(self) -> np.ndarray:
        return np.hstack([np.eye(3), np.zeros((3, 3))])


@dataclass(frozen=True)
class TrackState:
    x: np.ndarray   # (6,)
    P: np.ndarray   # (6, 6)
    t: float

    def position(self) -> CartesianPosition:
        return CartesianPosition(*self.x[:3])


def init_state(fix: CartesianPosition, t: float) -> TrackState:
    x = np.array([fix.x, fix.y, fix.z, 0.0, 0.0, 0.0])
    return TrackState(x, np.eye(6) * INIT_P_DIAG, t)


def predict(state: TrackState, model: MotionModel, dt: float) -> TrackState:
    if dt <= 0:
        raise ValueError("dt must be positive")
    F = model.phi(dt)
    x = F @ state.x + model.beta(dt) @ model.u
    P = F @ state.P @ F.T + model.process_noise(dt)
    return TrackState(x, 0.5 * (P + P.T), state.t + dt)


def update(state: TrackState, z: CartesianPosition, model: MotionModel) -> TrackState:
    H = model.H
    zv = np.array(z.as_tuple())
    S = H @ state.P @ H.T + model.R
    try:
        gain = np.linalg.solve(S, H @ state.P).T   # P H^T S^-1
    except np.linalg.LinAlgError as exc:
        raise InnovationSingularError("innovation covariance singular") from exc
    x = state.x + gain @ (zv - H @ state.x)
    P = (np.eye(6) - gain @ H) @ state.P
    return TrackState(x, 0.5 * (P + P.T), state.t)


def track(fixes, model: MotionModel, init: TrackState | None = None) -> list[TrackState]:
    """Filter a time-ordered stream of (time, position) fixes.

    The first fix initializes the state (zero velocity, wide covariance)
    and is itself folded in with a measurement update; gaps simply become
    longer prediction steps.
    """
    states: list[TrackState] = []
    state = init
    last_t = init.t if init is not None else None
    for t, fix in fixes:
        if last_t is not None and t < last_t:
            raise ValueError(f"fix times must be nondecreasing ({t} < {last_t})")
        if state is None:
            state = init_state(fix, t)
        elif t > state.t:
            state = predict(state, model, t - state.t)
        state = update(state, fix, model)
        states.append(state)
        last_t = t
    return states


def localization_error(truth: CartesianPosition, est: CartesianPosition) -> float:
    """Horizontal-weighted error; altitude misses count at one tenth."""
    return math.sqrt((truth.x - est.x) ** 2 + (truth.y - est.y) ** 2 +
                     ((truth.z - est.z) / 10.0) ** 2)
