"""Receiver clock drift simulation.

A drifting clock accumulates offset as a random walk driven by a
piecewise-constant skew: the skew switches between configured regimes at
exponentially distributed dwell times (a continuous-time Markov cycle over
the regime list). Regimes with near-zero skew separated by short high-skew
regimes produce the step-like, multi-level offset histograms seen on real
uncalibrated receivers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class SkewRegime:
    skew: float            # s/s, offset growth rate while the regime is active
    noise_std: float       # s per sqrt(second) of diffusion noise
    dwell_mean_s: float    # mean dwell before switching to the next regime

    def __post_init__(self):
        if self.noise_std < 0:
            raise ValueError("noise_std must be nonnegative")
        if self.dwell_mean_s <= 0:
            raise ValueError("dwell_mean_s must be positive")


@dataclass(frozen=True)
class ClockParams:
    initial_offset_s: float = 0.0
    regimes: tuple[SkewRegime, ...] = (SkewRegime(0.0, 0.0, 1.0),)
    regime_switch_seed: int = 0

    def __post_init__(self):
        if len(self.regimes) == 0:
            raise ValueError("at least one skew regime is required")
        object.__setattr__(self, "regimes", tuple(self.regimes))


def regime_schedule(params: ClockParams, t_end: float) -> tuple[np.ndarray, np.ndarray]:
    """Regime switch times and active regime indices covering [0, t_end].

    Returns (switch_times, regime_idx) where regime ``regime_idx[i]`` is
    active on [switch_times[i], switch_times[i+1]). The path is a function
    of ``regime_switch_seed`` only, so the same clock yields the same drift
    no matter how it is sampled.
    """
    if len(params.regimes) == 1:
        return np.array([0.0]), np.array([0], dtype=np.intp)
    rng = np.random.default_rng(params.regime_switch_seed)
    times = [0.0]
    idx = [0]
    t = 0.0
    i = 0
    while t <= t_end:
        t += rng.exponential(params.regimes[i].dwell_mean_s)
        i = (i + 1) % len(params.regimes)
        times.append(t)
        idx.append(i)
    return np.asarray(times), np.asarray(idx, dtype=np.intp)


def simulate_clock(params: ClockParams, sample_times, rng: np.random.Generator) -> np.ndarray:
    """Clock offset at each sample time, per the drift recursion.

    The offset recursion is
        eta[k] = eta[k-1] + skew(t) dt + omega[k]
    with the skew term integrated exactly across regime boundaries and
    omega ~ N(0, sum_i noise_std_i^2 * overlap_i) accumulating diffusion
    from every regime the step [t[k-1], t[k]] touches. Sample times are
    referenced to t = 0 at the start of the clock's life; the first sample
    already includes drift accumulated since then.
    """
    times = np.asarray(sample_times, dtype=float)
    if times.ndim != 1:
        raise ValueError("sample_times must be one-dimensional")
    if times.size == 0:
        return np.empty(0)
    if np.any(np.diff(times) <= 0):
        raise ValueError("sample_times must be strictly increasing")
    if times[0] < 0:
        raise ValueError("sample_times must be nonnegative")

    sw_times, sw_idx = regime_schedule(params, float(times[-1]))
    skews = np.array([params.regimes[i].skew for i in sw_idx])
    variances = np.array([params.regimes[i].noise_std ** 2 for i in sw_idx])

    out = np.empty(times.size)
    eta = params.initial_offset_s
    prev = 0.0
    seg = 0
    for k, t in enumerate(times):
        drift = 0.0
        var = 0.0
        a = prev
        while a < t:
            while seg + 1 < sw_times.size and sw_times[seg + 1] <= a:
                seg += 1
            seg_end = sw_times[seg + 1] if seg + 1 < sw_times.size else math.inf
            b = min(t, seg_end)
            drift += skews[seg] * (b - a)
            var += variances[seg] * (b - a)
            a = b
        eta += drift
        if var > 0.0:
            eta += rng.normal(0.0, math.sqrt(var))
        out[k] = eta
        prev = t
    return out
