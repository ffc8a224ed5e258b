"""Clock offset measurement and the offset/skew Kalman filter (KF1).

Offsets of a drifting receiver are measured against a synchronized one
from co-received trusted broadcasts: the time-of-flight-corrected ToA gap

    offset = toa_sync - tof_sync + tof_drifting - toa_drifting

is the correction to ADD to the drifting receiver's timestamps. A fitted
offset-series model (see ``arima``) is embedded in a state space

    [offset, skew-block] with the offset row integrating the skew,

and a Kalman filter tracks it through measurement updates, predicting the
offset (with growing variance) at arbitrary future times.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .arima import ArimaFit, ArimaOrder, fit_arima, fit_residuals, select_order
from .constants import SPEED_OF_LIGHT
from .geo import CartesianPosition, distance
from .serialize import dump_fields, parse_fields


@dataclass(frozen=True)
class OffsetSample:
    t: float          # reference (server) timeline, seconds
    eta: float        # measured offset, seconds
    sn_id: int
    gsn_id: int
    av_id: int


def measure_offset(gsn_toa: float, sn_toa: float, av_pos: CartesianPosition,
                   gsn_pos: CartesianPosition, sn_pos: CartesianPosition) -> float:
    """Measured clock offset from one co-received broadcast."""
    tof_gsn = distance(av_pos, gsn_pos) / SPEED_OF_LIGHT
    tof_sn = distance(av_pos, sn_pos) / SPEED_OF_LIGHT
    return gsn_toa - tof_gsn + tof_sn - sn_toa


def _state_space(fit: ArimaFit) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """(F, const, G, H) for the offset/skew state space of a fitted model.

    The skew block is the companion-form embedding of the fitted ARMA; for
    a once-differenced model the offset row integrates the skew block plus
    the fitted drift.
    """
    p, q = fit.ar.size, fit.ma.size
    r = max(p, q + 1)
    T = np.zeros((r, r))
    T[:p, 0] = fit.ar
    for i in range(r - 1):
        T[i, i + 1] = 1.0
    R = np.zeros(r)
    R[0] = 1.0
    R[1:q + 1] = fit.ma

    if fit.order.d == 1:
        F = np.zeros((1 + r, 1 + r))
        F[0, 0] = 1.0
        F[0, 1:] = T[0]
        F[1:, 1:] = T
        const = np.zeros(1 + r)
        const[0] = fit.drift
        G = np.concatenate(([R[0]], R))
        H = np.zeros(1 + r)
        H[0] = 1.0
    else:
        F = T
        const = np.zeros(r)
        G = R
        H = np.zeros(r)
        H[0] = 1.0
    return F, const, G, H


@dataclass(frozen=True)
class ClockModelAR:
    """Fitted offset model plus the Kalman state tracking one SN receiver."""

    sn_id: int
    fit: ArimaFit
    step_s: float                      # native model cadence
    measurement_var: float
    trained_window: tuple[float, float]
    x: np.ndarray                      # filter state
    P: np.ndarray                      # state covariance
    t_state: float                     # time the state refers to
    extra_offset_var: float = 0.0      # per-step process noise on the offset row

    @property
    def order(self) -> ArimaOrder:
        return self.fit.order

    def offset_mean(self) -> float:
        """Offset implied by the current state."""
        if self.fit.order.d == 1:
            return float(self.x[0])
        return self.fit.drift + float(self.x[0])

    def skew_per_second(self) -> float:
        """Offset growth rate implied by the current state."""
        if self.fit.order.d == 1:
            return (self.fit.drift + float(self.x[1])) / self.step_s
        return 0.0


def _predict_once(model: ClockModelAR, x: np.ndarray, P: np.ndarray):
    F, const, G, _ = _state_space(model.fit)
    Q = model.fit.noise_var * np.outer(G, G)
    if model.fit.order.d == 1 and model.extra_offset_var > 0.0:
        Q[0, 0] += model.extra_offset_var
    x = F @ x + const
    P = F @ P @ F.T + Q
    return x, 0.5 * (P + P.T)


def kf1_predict_offset(model: ClockModelAR, target_time: float) -> tuple[float, float]:
    """Predicted offset and its variance at ``target_time``.

    Iterates the state space in native steps from the filter's current
    time; a target at or before the current time returns the posterior.
    """
    _, _, _, H = _state_space(model.fit)
    steps = max(0, round((target_time - model.t_state) / model.step_s))
    x, P = model.x.copy(), model.P.copy()
    for _ in range(steps):
        x, P = _predict_once(model, x, P)
    eta = float(H @ x) + _offset_base(model)
    return eta, float(H @ P @ H)


def _offset_base(model: ClockModelAR) -> float:
    # d=0 models are stationary around the fitted mean; d=1 models carry
    # the level in the state itself.
    return 0.0 if model.fit.order.d == 1 else model.fit.drift


def kf1_update(model: ClockModelAR, sample: OffsetSample) -> ClockModelAR:
    """Measurement update; returns the advanced model."""
    dt = sample.t - model.t_state
    if dt < -1e-9:
        raise ValueError(
            f"out-of-order sample: t={sample.t} before state time {model.t_state}")
    _, _, _, H = _state_space(model.fit)
    steps = max(0, round(dt / model.step_s))
    x, P = model.x.copy(), model.P.copy()
    for _ in range(steps):
        x, P = _predict_once(model, x, P)
    z = sample.eta - _offset_base(model)
    s = float(H @ P @ H) + model.measurement_var
    if s <= 0.0:
        raise ValueError("degenerate innovation variance")
    gain = (P @ H) / s
    x = x + gain * (z - float(H @ x))
    P = P - np.outer(gain, H @ P)
    P = 0.5 * (P + P.T)
    return replace(model, x=x, P=P, t_state=sample.t)


def fit_clock_model(samples: list[OffsetSample], sn_id: int | None = None,
                    order: ArimaOrder | None = None,
                    quantization_step_s: float = 0.0,
                    extra_offset_var: float = 0.0) -> ClockModelAR:
    """Identify, fit, and warm-start a clock model from offset samples.

    Order selection runs when no order is given; the Kalman state is
    initialized by filtering the training series itself.
    """
    if len(samples) < 8:
        raise ValueError("need at least 8 offset samples")
    times = np.array([s.t for s in samples])
    if np.any(np.diff(times) <= 0):
        raise ValueError("offset samples must be strictly increasing in time")
    etas = np.array([s.eta for s in samples])
    if order is None:
        order = select_order(etas)
    fit = fit_arima(etas, order)
    step = float(np.median(np.diff(times)))
    # floor keeps the filter well-posed on noiseless synthetic series
    meas_var = max(quantization_step_s ** 2 / 12.0 + fit.noise_var, 1e-24)

    r = max(fit.ar.size, fit.ma.size + 1)
    dim = 1 + r if order.d == 1 else r
    x0 = np.zeros(dim)
    if order.d == 1:
        x0[0] = etas[0]
    scale = max(fit.noise_var, 1e-30)
    P0 = np.eye(dim) * scale * 100.0
    model = ClockModelAR(
        sn_id=sn_id if sn_id is not None else samples[0].sn_id,
        fit=fit, step_s=step, measurement_var=meas_var,
        trained_window=(float(times[0]), float(times[-1])),
        x=x0, P=P0, t_state=float(times[0]) - step,
        extra_offset_var=extra_offset_var,
    )
    for s in samples:
        model = kf1_update(model, s)
    return model


def residuals(model: ClockModelAR, series) -> np.ndarray:
    """One-step-ahead prediction residuals of the fitted model over a series."""
    return fit_residuals(model.fit, series)


def model_to_text(model: ClockModelAR) -> str:
    return dump_fields({
        "kind": "clock-ar",
        "sn_id": model.sn_id,
        "p": model.order.p, "d": model.order.d, "q": model.order.q,
        "ar": model.fit.ar, "ma": model.fit.ma,
        "drift": model.fit.drift, "noise_var": model.fit.noise_var,
        "n_obs": model.fit.n_obs,
        "step_s": model.step_s,
        "measurement_var": model.measurement_var,
        "extra_offset_var": model.extra_offset_var,
        "window_start": model.trained_window[0],
        "window_end": model.trained_window[1],
        "t_state": model.t_state,
        "x": model.x,
        "P": model.P,
    })


def model_from_text(text: str) -> ClockModelAR:
    f = parse_fields(text)
    if f.get("kind") != "clock-ar":
        raise ValueError(f"not a clock-ar snapshot (kind={f.get('kind')!r})")
    fit = ArimaFit(
        order=ArimaOrder(f["p"], f["d"], f["q"]),
        ar=np.atleast_1d(f["ar"]), ma=np.atleast_1d(f["ma"]),
        drift=f["drift"], noise_var=f["noise_var"], n_obs=f["n_obs"],
    )
    return ClockModelAR(
        sn_id=f["sn_id"], fit=fit, step_s=f["step_s"],
        measurement_var=f["measurement_var"],
        trained_window=(f["window_start"], f["window_end"]),
        x=np.atleast_1d(f["x"]), P=np.atleast_2d(f["P"]),
        t_state=f["t_state"], extra_offset_var=f["extra_offset_var"],
    )
