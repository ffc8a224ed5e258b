"""Offset-series ARIMA identification and fitting.

Order selection follows the classic recipe: difference until the KPSS test
passes (degree 0 or 1), then read the moving-average order off the leading
run of significant ACF lags and the autoregressive order off the PACF run.
Fitting minimizes the conditional sum of squares of the differenced,
demeaned series; stationarity and invertibility are enforced by optimizing
in partial-autocorrelation space.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from . import kernels
from .stats import kpss_test, leading_significant_run, sample_acf, sample_pacf

MAX_SELECTED_ORDER = 8
_ID_MAX_LAG = 20


class NonstationaryError(ValueError):
    """Series still fails the stationarity test after one differencing."""


class FitConvergenceError(RuntimeError):
    def __init__(self, message, best_params=None, best_sse=None):
        super().__init__(message)
        self.best_params = best_params
        self.best_sse = best_sse


@dataclass(frozen=True)
class ArimaOrder:
    p: int
    d: int
    q: int

    def __post_init__(self):
        if self.p < 0 or self.q < 0:
            raise ValueError("orders must be nonnegative")
        if self.d not in (0, 1):
            raise ValueError("differencing degree limited to 0 or 1")


@dataclass(frozen=True)
class ArimaFit:
    order: ArimaOrder
    ar: np.ndarray      # a_1..a_p
    ma: np.ndarray      # b_1..b_q
    drift: float        # mean of the d-times differenced series
    noise_var: float
    n_obs: int


def difference(series: np.ndarray, d: int) -> np.ndarray:
    w = np.asarray(series, dtype=float)
    for _ in range(d):
        w = np.diff(w)
    return w


def select_order(series, max_order: int = MAX_SELECTED_ORDER) -> ArimaOrder:
    """Pick (p, d, q) by KPSS gating plus ACF/PACF run counting."""
    x = np.asarray(series, dtype=float)
    if x.size < 50:
        raise ValueError("order selection needs at least 50 samples")
    if kpss_test(x).stationary:
        d = 0
    else:
        x = np.diff(x)
        if not kpss_test(x).stationary:
            raise NonstationaryError(
                "series remains nonstationary after one differencing")
        d = 1
    max_lag = min(_ID_MAX_LAG, x.size - 1)
    acf, bound = sample_acf(x, max_lag)
    pacf, _ = sample_pacf(x, max_lag)
    q = min(leading_significant_run(acf, bound), max_order)
    p = min(leading_significant_run(pacf, bound), max_order)
    return ArimaOrder(p, d, q)


def _pacf_to_ar(r: np.ndarray) -> np.ndarray:
    """Levinson recursion: partial autocorrelations -> AR coefficients."""
    a = np.empty(0)
    for k, rk in enumerate(r):
        a_new = np.empty(k + 1)
        a_new[:k] = a - rk * a[::-1]
        a_new[k] = rk
        a = a_new
    return a


def _raw_to_coeffs(raw: np.ndarray, p: int, q: int) -> tuple[np.ndarray, np.ndarray]:
    ar = _pacf_to_ar(np.tanh(raw[:p]))
    ma = -_pacf_to_ar(np.tanh(-raw[p:p + q]))
    return ar, ma


def css_residuals(w_centered: np.ndarray, ar: np.ndarray, ma: np.ndarray) -> np.ndarray:
    return kernels.arma_css_residuals(w_centered, ar, ma)


def fit_arima(series, order: ArimaOrder, maxiter: int = 200) -> ArimaFit:
    """Conditional-sum-of-squares fit on the differenced, demeaned series."""
    x = np.asarray(series, dtype=float)
    p, d, q = order.p, order.d, order.q
    if x.size < 5 * (p + q + 1):
        raise ValueError(
            f"series too short for order ({p},{d},{q}): "
            f"{x.size} < {5 * (p + q + 1)}")
    w = difference(x, d)
    drift = float(w.mean())
    wc = w - drift

    if p + q == 0:
        return ArimaFit(order, np.empty(0), np.empty(0), drift,
                        float(np.var(wc)) if wc.size else 0.0, x.size)

    def objective(raw):
        ar, ma = _raw_to_coeffs(raw, p, q)
        e = css_residuals(wc, ar, ma)
        return float(np.dot(e, e))

    res = minimize(objective, np.zeros(p + q), method="L-BFGS-B",
                   options={"maxiter": maxiter})
    if not np.isfinite(res.fun):
        raise FitConvergenceError("CSS objective diverged",
                                  best_params=res.x, best_sse=res.fun)
    ar, ma = _raw_to_coeffs(res.x, p, q)
    e = css_residuals(wc, ar, ma)
    # Skip the warm-up residuals distorted by the zero initial conditions.
    burn = min(p + q, e.size // 4)
    noise_var = float(np.dot(e[burn:], e[burn:])) / max(e.size - burn, 1)
    return ArimaFit(order, ar, ma, drift, noise_var, x.size)


def fit_residuals(fit: ArimaFit, series) -> np.ndarray:
    """One-step-ahead prediction residuals of ``fit`` over ``series``."""
    w = difference(np.asarray(series, dtype=float), fit.order.d)
    return css_residuals(w - fit.drift, fit.ar, fit.ma)


def ar_roots(fit: ArimaFit) -> np.ndarray:
    """Roots of the AR polynomial 1 - a_1 z - ... - a_p z^p."""
    if fit.ar.size == 0:
        return np.empty(0, dtype=complex)
    return np.roots(np.concatenate(([1.0], -fit.ar))[::-1])
