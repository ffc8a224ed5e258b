"""End-to-end run orchestration: records in, localization report out.

The flow per broadcast record mirrors the deployed system: trusted
broadcasts feed per-SN offset measurement and the retraining scheduler;
target broadcasts get their SN timestamps corrected under the configured
synchronization mode, multilaterated when at least ``min_receivers``
usable receptions remain, and smoothed by the per-target position filter.

Trusted aircraft positions come from the truth table, standing in for the
position payload their broadcasts carry; target truth rows are used only
to score the resulting fixes.
"""

from __future__ import annotations

import math
import time as _time
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path

import numpy as np

from . import lstm as lstm_mod
from .clocksync import (ClockModelAR, OffsetSample, fit_clock_model,
                        kf1_predict_offset, kf1_update, measure_offset,
                        residuals as model_residuals)
from .arima import NonstationaryError, FitConvergenceError
from .constants import SPEED_OF_LIGHT
from .geo import CartesianPosition, GeodeticPosition, geodetic_to_local
from .mlat import (AmbiguousRootError, GeometryError, NoRootError,
                   TdoaMeasurementSet, solve)
from .records import BroadcastRecord, TruthRow, read_records
from .scenario import ReceiverKind
from .stats import normality_check
from .tracker import (MotionModel, TrackState, init_state,
                      localization_error, predict, update)

ingest = read_records  # dataset files parse straight into run() inputs


class SyncMode(Enum):
    NONE = "none"
    PRIOR_OFFSET = "prior"
    ARIMA = "arima"
    LSTM = "lstm"
    ALL_GSN = "gsn"


class Classification(Enum):
    TRUSTED = "trusted"
    TARGET = "target"
    REJECTED = "rejected"


@dataclass(frozen=True)
class RunConfig:
    sync_mode: SyncMode = SyncMode.ARIMA
    retrain_period_s: float = 1200.0
    min_training_msgs: int = 100
    min_receivers: int = 4
    seed: int = 0
    use_kf2: bool = True
    # classification: None -> trust the record flag; otherwise explicit ids
    target_ids: tuple[int, ...] | None = None
    reject_unknown: bool = True
    # synchronization details
    model_expiry_factor: float = 2.0       # model stale after factor * period
    sn_quantization_step_s: float = 1.0 / 12e6
    lstm_config: lstm_mod.LstmConfig = field(default_factory=lstm_mod.LstmConfig)
    # tracker
    accel_density: float = 1.0
    gsn_toa_std_s: float = 6e-9            # per-reception ToA noise by kind,
    sn_toa_std_s: float = 40e-9            # drives the per-fix R propagation
    fallback_r: tuple[float, float] = (300.0, 1000.0)   # m, horizontal/vertical

    def __post_init__(self):
        if self.retrain_period_s <= 0:
            raise ValueError("retrain_period_s must be positive")
        if self.min_receivers < 4:
            raise ValueError("min_receivers must be at least 4")


@dataclass
class RetrainEvent:
    sn_id: int
    t: float
    n_samples: int
    kind: str                   # "arima" | "lstm" | "deferred" | "failed"
    detail: str = ""
    residual_std: float = math.nan
    residual_skew: float = math.nan
    residual_unimodal: bool | None = None


@dataclass(frozen=True)
class Fix:
    av_id: int
    t: float
    est: CartesianPosition          # global ENU frame
    raw: CartesianPosition          # MLAT output before the track filter
    error_m: float                  # NaN when no truth row matched
    n_receivers: int


@dataclass
class RunReport:
    mode: str
    origin: GeodeticPosition | None = None
    fixes: list[Fix] = field(default_factory=list)
    retrain_log: list[RetrainEvent] = field(default_factory=list)
    counters: dict[str, int] = field(default_factory=dict)
    offset_samples: dict[int, list[OffsetSample]] = field(default_factory=dict)
    wall_time_s: float = 0.0

    def errors(self) -> np.ndarray:
        return np.array([f.error_m for f in self.fixes
                         if not math.isnan(f.error_m)])

    def mean_error(self) -> float:
        e = self.errors()
        return float(e.mean()) if e.size else math.nan

    def median_error(self) -> float:
        e = self.errors()
        return float(np.median(e)) if e.size else math.nan

    def cdf_points(self) -> tuple[np.ndarray, np.ndarray]:
        e = np.sort(self.errors())
        if e.size == 0:
            return np.empty(0), np.empty(0)
        return e, np.arange(1, e.size + 1) / e.size

    def bump(self, key: str, n: int = 1) -> None:
        self.counters[key] = self.counters.get(key, 0) + n


def classify(record: BroadcastRecord, target_ids: tuple[int, ...] | None = None,
             reject_unknown: bool = True) -> Classification:
    """Trusted/target routing: record flag by default, allowlist override."""
    if target_ids is not None:
        if record.av_id in target_ids:
            return Classification.TARGET
        if record.trusted:
            return Classification.TRUSTED
        return Classification.REJECTED if reject_unknown else Classification.TARGET
    return Classification.TRUSTED if record.trusted else Classification.TARGET


class _SnState:
    """Per-SN synchronization bookkeeping."""

    def __init__(self):
        self.samples: list[OffsetSample] = []
        self.last_offset: OffsetSample | None = None
        self.model_ar: ClockModelAR | None = None
        self.model_lstm: lstm_mod.ClockModelLSTM | None = None
        self.model_trained_at: float = -math.inf
        self.first_sample_t: float | None = None
        self.last_retrain_check: float = -math.inf


def retrain_scheduler(now: float, sn: _SnState, config: RunConfig) -> str:
    """Decide between retraining, deferring on starvation, or waiting."""
    anchor_t = sn.model_trained_at if sn.model_trained_at > -math.inf \
        else (sn.first_sample_t if sn.first_sample_t is not None else now)
    if now - anchor_t < config.retrain_period_s:
        return "wait"
    window = [s for s in sn.samples if s.t >= now - config.retrain_period_s]
    if len(window) < config.min_training_msgs:
        return "defer"
    return "retrain"


def _model_valid(sn: _SnState, now: float, config: RunConfig) -> bool:
    if sn.model_trained_at == -math.inf:
        return False
    horizon = config.retrain_period_s * config.model_expiry_factor
    return now - sn.model_trained_at <= horizon


def _retrain(sn: _SnState, sn_id: int, now: float, config: RunConfig,
             report: RunReport) -> None:
    window = [s for s in sn.samples if s.t >= now - config.retrain_period_s]
    etas = np.array([s.eta for s in window])
    try:
        if config.sync_mode is SyncMode.ARIMA:
            model = fit_clock_model(
                window, sn_id=sn_id,
                quantization_step_s=config.sn_quantization_step_s)
            sn.model_ar = model
            r = model_residuals(model, etas)
            rep = normality_check(r) if r.size >= 100 else None
            report.retrain_log.append(RetrainEvent(
                sn_id, now, len(window), "arima",
                detail=f"order=({model.order.p},{model.order.d},{model.order.q})",
                residual_std=float(np.std(r)),
                residual_skew=rep.skewness if rep else math.nan,
                residual_unimodal=rep.unimodal if rep else None))
        else:
            cfg = replace(config.lstm_config, seed=config.seed + sn_id)
            model = lstm_mod.train(lstm_mod.build(cfg), window)
            sn.model_lstm = model
            zhat = np.array([
                lstm_mod.predict_offset(model, window[:i], window[i].t)
                for i in range(cfg.window_len, len(window))])
            r = etas[cfg.window_len:] - zhat
            rep = normality_check(r) if r.size >= 100 else None
            report.retrain_log.append(RetrainEvent(
                sn_id, now, len(window), "lstm",
                residual_std=float(np.std(r)),
                residual_skew=rep.skewness if rep else math.nan,
                residual_unimodal=rep.unimodal if rep else None))
        sn.model_trained_at = now
    except (NonstationaryError, FitConvergenceError, ValueError) as exc:
        report.retrain_log.append(RetrainEvent(
            sn_id, now, len(window), "failed", detail=str(exc)))


def _corrected_toa(sn: _SnState, rx_id: int, toa: float, now: float,
                   config: RunConfig, report: RunReport) -> float | None:
    """SN timestamp correction under the active mode; None quarantines it."""
    mode = config.sync_mode
    if mode is SyncMode.NONE:
        return toa
    if mode is SyncMode.PRIOR_OFFSET:
        if sn.last_offset is None:
            report.bump("skipped_no_prior")
            return None
        return toa + sn.last_offset.eta
    if mode is SyncMode.ARIMA:
        if sn.model_ar is None or not _model_valid(sn, now, config):
            report.bump("skipped_no_model")
            return None
        eta, _ = kf1_predict_offset(sn.model_ar, now)
        return toa + eta
    if mode is SyncMode.LSTM:
        w = config.lstm_config.window_len
        if sn.model_lstm is None or not _model_valid(sn, now, config) \
                or len(sn.samples) < w:
            report.bump("skipped_no_model")
            return None
        eta = lstm_mod.predict_offset(sn.model_lstm, sn.samples[-w:], now)
        return toa + eta
    raise AssertionError(f"unhandled mode {mode}")


def _fix_measurement_noise(anchors: np.ndarray, d_i: np.ndarray,
                           sigmas: np.ndarray, fallback: tuple[float, float]) -> np.ndarray:
    """First-order ToA-noise propagation through the linear solve."""
    B = anchors[1:]
    try:
        pinv = np.linalg.pinv(B)
    except np.linalg.LinAlgError:
        h, v = fallback
        return np.diag([h * h, h * h, v * v])
    # range-difference errors: c * (dt_i - dt_1), i = 2..N
    n = anchors.shape[0]
    cov_t = np.diag(sigmas[1:] ** 2) + sigmas[0] ** 2 * np.ones((n - 1, n - 1))
    J = pinv * (-d_i[1:])[None, :]
    R = (SPEED_OF_LIGHT ** 2) * J @ cov_t @ J.T
    R = 0.5 * (R + R.T)
    # keep it sane: floor the diagonal at a meter to avoid overconfidence
    return R + np.eye(3)


def run(config: RunConfig, records: list[BroadcastRecord],
        truth: list[TruthRow] | None = None) -> RunReport:
    """Execute the full tracking loop over time-ordered records."""
    t_start = _time.perf_counter()
    report = RunReport(mode=config.sync_mode.value)
    truth_by_key: dict[tuple[int, int], TruthRow] = {}
    if truth:
        for row in truth:
            truth_by_key[(row.av_id, round(row.time_s * 1e6))] = row

    origin: GeodeticPosition | None = None
    enu_cache: dict[tuple[float, float, float], CartesianPosition] = {}

    def to_enu(p: GeodeticPosition) -> CartesianPosition:
        key = (p.lat_deg, p.lon_deg, p.alt_m)
        hit = enu_cache.get(key)
        if hit is None:
            hit = geodetic_to_local(p, origin)
            enu_cache[key] = hit
        return hit

    sn_states: dict[int, _SnState] = {}
    tracks: dict[int, TrackState] = {}

    for rec in sorted(records, key=lambda r: (r.server_time_s, r.av_id)):
        if origin is None:
            origin = rec.receptions[0].position
            report.origin = origin
        now = rec.server_time_s
        cls = classify(rec, config.target_ids, config.reject_unknown)
        if cls is Classification.REJECTED:
            report.bump("rejected_records")
            continue

        if cls is Classification.TRUSTED:
            _handle_trusted(rec, now, truth_by_key, to_enu, sn_states,
                            config, report)
            continue

        if config.sync_mode is SyncMode.ALL_GSN and any(
                r.kind is ReceiverKind.SN for r in rec.receptions):
            raise ValueError(
                "gsn baseline mode expects an all-GSN dataset; "
                "re-simulate the scenario with synchronized receivers")

        usable: list[tuple[int, CartesianPosition, float, ReceiverKind]] = []
        for rx in rec.receptions:
            if rx.kind is ReceiverKind.SN and config.sync_mode is not SyncMode.ALL_GSN:
                sn = sn_states.setdefault(rx.rx_id, _SnState())
                toa = _corrected_toa(sn, rx.rx_id, rx.toa_s, now, config, report)
                if toa is None:
                    continue
            else:
                toa = rx.toa_s
            usable.append((rx.rx_id, to_enu(rx.position), toa, rx.kind))
        if len(usable) < config.min_receivers:
            report.bump("skipped_too_few_receivers")
            continue

        # anchor at the first GSN when present, else the first reception
        anchor_idx = next((i for i, u in enumerate(usable)
                           if u[3] is ReceiverKind.GSN), 0)
        usable.insert(0, usable.pop(anchor_idx))
        anchors_world = np.array([u[1].as_tuple() for u in usable])
        toas = np.array([u[2] for u in usable])
        anchor_origin = anchors_world[0].copy()
        meas = TdoaMeasurementSet(anchors_world - anchor_origin, toas)

        state = tracks.get(rec.av_id)
        try:
            sol = solve(meas)
            raw_local = np.array(sol.position.as_tuple())
        except AmbiguousRootError as exc:
            if state is None:
                report.bump("skipped_ambiguous")
                continue
            pred = predict(state, _motion_model(config, None), max(now - state.t, 1e-6))
            cands = [np.array(c.as_tuple()) + anchor_origin for c in exc.candidates]
            dists = [np.linalg.norm(c - pred.x[:3]) for c in cands]
            raw_local = cands[int(np.argmin(dists))] - anchor_origin
            report.bump("ambiguous_resolved")
        except (GeometryError, NoRootError):
            report.bump("skipped_solver_error")
            continue

        raw_world = raw_local + anchor_origin
        raw_pos = CartesianPosition(*raw_world)

        if config.use_kf2:
            sigmas = np.array([config.gsn_toa_std_s if u[3] is ReceiverKind.GSN
                               else config.sn_toa_std_s for u in usable])
            d_i = np.linalg.norm(anchors_world - raw_world, axis=1)
            R = _fix_measurement_noise(anchors_world - anchor_origin, d_i,
                                       sigmas, config.fallback_r)
            model = _motion_model(config, R)
            if state is None:
                state = init_state(raw_pos, now)
            elif now > state.t:
                state = predict(state, model, now - state.t)
            state = update(state, raw_pos, model)
            tracks[rec.av_id] = state
            est = state.position()
        else:
            est = raw_pos

        err = math.nan
        row = truth_by_key.get((rec.av_id, round(now * 1e6)))
        if row is not None:
            err = localization_error(to_enu(row.position), est)
        report.fixes.append(Fix(rec.av_id, now, est, raw_pos, err, len(usable)))

    report.wall_time_s = _time.perf_counter() - t_start
    return report


def _motion_model(config: RunConfig, R: np.ndarray | None) -> MotionModel:
    if R is None:
        h, v = config.fallback_r
        R = np.diag([h * h, h * h, v * v])
    return MotionModel(accel_density=config.accel_density, R=R)


def _handle_trusted(rec: BroadcastRecord, now: float, truth_by_key: dict,
                    to_enu, sn_states: dict[int, _SnState],
                    config: RunConfig, report: RunReport) -> None:
    row = truth_by_key.get((rec.av_id, round(now * 1e6)))
    if row is None:
        report.bump("trusted_without_position")
        return
    av_pos = to_enu(row.position)
    gsns = [r for r in rec.receptions if r.kind is ReceiverKind.GSN]
    sns = [r for r in rec.receptions if r.kind is ReceiverKind.SN]
    for sn_rx in sns:
        sn = sn_states.setdefault(sn_rx.rx_id, _SnState())
        for gsn_rx in gsns:
            eta = measure_offset(gsn_rx.toa_s, sn_rx.toa_s, av_pos,
                                 to_enu(gsn_rx.position), to_enu(sn_rx.position))
            sample = OffsetSample(now, eta, sn_rx.rx_id, gsn_rx.rx_id, rec.av_id)
            sn.samples.append(sample)
            sn.last_offset = sample
            if sn.first_sample_t is None:
                sn.first_sample_t = now
            report.offset_samples.setdefault(sn_rx.rx_id, []).append(sample)
            if config.sync_mode is SyncMode.ARIMA and sn.model_ar is not None \
                    and _model_valid(sn, now, config):
                try:
                    sn.model_ar = kf1_update(sn.model_ar, sample)
                except ValueError:
                    report.bump("kf1_update_skipped")
        if config.sync_mode in (SyncMode.ARIMA, SyncMode.LSTM) and sns:
            decision = retrain_scheduler(now, sn, config)
            if decision == "retrain":
                _retrain(sn, sn_rx.rx_id, now, config, report)
            elif decision == "defer" and now - sn.last_retrain_check > config.retrain_period_s:
                sn.last_retrain_check = now
                report.retrain_log.append(RetrainEvent(
                    sn_rx.rx_id, now, len(sn.samples), "deferred",
                    detail="data starvation"))


# ---------------------------------------------------------------------------
# report emission

FIXES_HEADER = "# airtrack-fixes v1"
CDF_HEADER = "# airtrack-cdf v1"
SUMMARY_HEADER = "# airtrack-summary v1"


def emit_report(report: RunReport, out_dir: str | Path) -> list[Path]:
    """Write the per-fix table, CDF points, and run summary."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    fixes_path = out / f"fixes_{report.mode}.txt"
    with open(fixes_path, "w") as f:
        f.write(FIXES_HEADER + "\n")
        f.write("# av_id t x y z err_m n_receivers\n")
        for fx in report.fixes:
            f.write(f"{fx.av_id} {fx.t!r} {fx.est.x!r} {fx.est.y!r} "
                    f"{fx.est.z!r} {fx.error_m!r} {fx.n_receivers}\n")
    written.append(fixes_path)

    e, p = report.cdf_points()
    if e.size:
        cdf_path = out / f"cdf_{report.mode}.txt"
        with open(cdf_path, "w") as f:
            f.write(CDF_HEADER + "\n")
            for ei, pi in zip(e, p):
                f.write(f"{ei!r} {pi!r}\n")
        written.append(cdf_path)

    summary_path = out / f"summary_{report.mode}.txt"
    with open(summary_path, "w") as f:
        f.write(SUMMARY_HEADER + "\n")
        f.write(f"mode {report.mode}\n")
        f.write(f"n_fixes {len(report.fixes)}\n")
        f.write(f"n_scored {report.errors().size}\n")
        f.write(f"mean_error_m {report.mean_error()!r}\n")
        f.write(f"median_error_m {report.median_error()!r}\n")
        for key in sorted(report.counters):
            f.write(f"counter_{key} {report.counters[key]}\n")
        for ev in report.retrain_log:
            f.write(f"retrain {ev.sn_id} {ev.t!r} {ev.n_samples} {ev.kind} "
                    f"{ev.residual_std!r} {ev.residual_skew!r} "
                    f"{ev.residual_unimodal} {ev.detail}\n")
    written.append(summary_path)
    return written


def write_mode_summary(reports: list[RunReport], path: str | Path) -> None:
    """Combined mean/median table across runs, one row per mode."""
    with open(path, "w") as f:
        f.write(SUMMARY_HEADER + "\n")
        f.write("# mode n_scored mean_error_m median_error_m\n")
        for rep in reports:
            f.write(f"{rep.mode} {rep.errors().size} "
                    f"{rep.mean_error()!r} {rep.median_error()!r}\n")
