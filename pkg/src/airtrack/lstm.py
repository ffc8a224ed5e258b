"""Recurrent clock-offset predictor trained with hand-rolled BPTT + Adam.

The network is deliberately small: sequence input -> LSTM (tanh state,
sigmoid gates) -> fully-connected -> dropout -> fully-connected scalar
regression head under squared error. Offsets are z-scored over the
training window; the model predicts the next normalized offset from a
sliding window of recent ones, and longer horizons iterate the one-step
prediction feeding outputs back in.

The heavy per-batch forward/backward lives in ``airtrack.kernels`` (Cython
when built, NumPy otherwise); this module owns windowing, normalization,
the optimizer loop, and serialization.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from . import kernels
from .clocksync import OffsetSample
from .serialize import dump_fields, parse_fields

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


class TrainingDivergedError(RuntimeError):
    def __init__(self, epoch: int, losses: list[float]):
        super().__init__(f"loss became non-finite at epoch {epoch}")
        self.epoch = epoch
        self.losses = losses


@dataclass(frozen=True)
class LstmConfig:
    hidden_units: int = 10
    fc1_units: int = 5
    dropout_rate: float = 0.2
    learning_rate: float = 0.01
    epochs: int = 200
    window_len: int = 8
    seed: int = 0
    batch_size: int = 64
    plateau_patience: int = 20

    def __post_init__(self):
        if self.hidden_units < 1:
            raise ValueError("hidden_units must be >= 1")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError("dropout_rate must be in [0, 1)")
        if self.learning_rate <= 0.0:
            raise ValueError("learning_rate must be positive")
        if self.window_len < 1:
            raise ValueError("window_len must be >= 1")


@dataclass(frozen=True)
class ClockModelLSTM:
    config: LstmConfig
    W: np.ndarray    # (4H, 1+H) gate weights over [x, h]
    b: np.ndarray    # (4H,)
    W1: np.ndarray   # (fc1, H)
    b1: np.ndarray   # (fc1,)
    W2: np.ndarray   # (1, fc1)
    b2: np.ndarray   # (1,)
    norm_mean: float = 0.0
    norm_std: float = 1.0
    trained_window: tuple[float, float] = (0.0, 0.0)
    step_s: float = 1.0
    sn_id: int = -1

    def params(self) -> tuple[np.ndarray, ...]:
        return (self.W, self.b, self.W1, self.b1, self.W2, self.b2)

    def param_count(self) -> int:
        return sum(p.size for p in self.params())


def build(config: LstmConfig) -> ClockModelLSTM:
    """Fresh model with seeded uniform fan-in-scaled initialization."""
    rng = np.random.default_rng(config.seed)
    H, F = config.hidden_units, config.fc1_units

    def u(shape, fan_in):
        s = 1.0 / math.sqrt(fan_in)
        return rng.uniform(-s, s, size=shape)

    return ClockModelLSTM(
        config=config,
        W=u((4 * H, 1 + H), 1 + H), b=np.zeros(4 * H),
        W1=u((F, H), H), b1=np.zeros(F),
        W2=u((1, F), F), b2=np.zeros(1),
    )


def forward(model: ClockModelLSTM, sequence) -> float:
    """One-step prediction (normalized in, normalized out); inference mode."""
    seq = np.asarray(sequence, dtype=float)
    if seq.ndim != 1 or seq.size != model.config.window_len:
        raise ValueError(f"sequence must have length {model.config.window_len}")
    if not np.all(np.isfinite(seq)):
        raise ValueError("sequence contains non-finite values")
    y = kernels.lstm_forward(seq[None, :], *model.params())
    return float(y[0])


def _windows(z: np.ndarray, w: int) -> tuple[np.ndarray, np.ndarray]:
    n = z.size - w
    X = np.empty((n, w))
    for i in range(n):
        X[i] = z[i:i + w]
    return X, z[w:]


def train(model: ClockModelLSTM, series: list[OffsetSample]) -> ClockModelLSTM:
    """Train on an offset series; returns the fitted model.

    Deterministic for a fixed (config.seed, series): batches are taken in
    order and dropout masks come from the seeded generator.
    """
    cfg = model.config
    if len(series) <= cfg.window_len + 10:
        raise ValueError(
            f"need more than window_len + 10 = {cfg.window_len + 10} samples")
    times = np.array([s.t for s in series])
    etas = np.array([s.eta for s in series])
    mean = float(etas.mean())
    std = float(etas.std())
    if std == 0.0:
        std = 1.0
    z = (etas - mean) / std
    X, y = _windows(z, cfg.window_len)
    n = X.shape[0]

    params = [p.copy() for p in model.params()]
    m_state = [np.zeros_like(p) for p in params]
    v_state = [np.zeros_like(p) for p in params]
    rng = np.random.default_rng(cfg.seed)
    keep = 1.0 - cfg.dropout_rate

    losses: list[float] = []
    best = math.inf
    best_epoch = 0
    step = 0
    for epoch in range(cfg.epochs):
        sse = 0.0
        for lo in range(0, n, cfg.batch_size):
            Xb = X[lo:lo + cfg.batch_size]
            yb = y[lo:lo + cfg.batch_size]
            mask = None
            if cfg.dropout_rate > 0.0:
                mask = (rng.random((Xb.shape[0], cfg.fc1_units)) < keep) / keep
            out = kernels.lstm_loss_grads(Xb, yb, *params, mask)
            loss, grads = out[0], out[1:]
            if not math.isfinite(loss):
                raise TrainingDivergedError(epoch, losses)
            step += 1
            c1 = 1.0 - ADAM_BETA1 ** step
            c2 = 1.0 - ADAM_BETA2 ** step
            for p, g, ms, vs in zip(params, grads, m_state, v_state):
                ms *= ADAM_BETA1
                ms += (1.0 - ADAM_BETA1) * g
                vs *= ADAM_BETA2
                vs += (1.0 - ADAM_BETA2) * g * g
                p -= cfg.learning_rate * (ms / c1) / (np.sqrt(vs / c2) + ADAM_EPS)
            sse += loss * Xb.shape[0]
        epoch_loss = sse / n
        losses.append(epoch_loss)
        if epoch_loss < best - 1e-12:
            best = epoch_loss
            best_epoch = epoch
        elif epoch - best_epoch >= cfg.plateau_patience:
            break

    return replace(
        model,
        W=params[0], b=params[1], W1=params[2], b1=params[3],
        W2=params[4], b2=params[5],
        norm_mean=mean, norm_std=std,
        trained_window=(float(times[0]), float(times[-1])),
        step_s=float(np.median(np.diff(times))),
        sn_id=series[0].sn_id,
    )


def predict_offset(model: ClockModelLSTM, recent_offsets: list[OffsetSample],
                   target_time: float) -> float:
    """Offset prediction at ``target_time`` from recent measured offsets.

    Iterates one-step predictions in the model's native cadence, feeding
    predictions back into the input window for multi-step horizons.
    """
    w = model.config.window_len
    if len(recent_offsets) < w:
        raise ValueError(f"need at least {w} recent offsets")
    recent = sorted(recent_offsets, key=lambda s: s.t)[-w:]
    buf = (np.array([s.eta for s in recent]) - model.norm_mean) / model.norm_std
    t_last = recent[-1].t
    steps = max(1, round((target_time - t_last) / model.step_s))
    for _ in range(steps):
        pred = forward(model, buf)
        buf = np.append(buf[1:], pred)
    return float(buf[-1] * model.norm_std + model.norm_mean)


def gradient_check(model: ClockModelLSTM, X, y, fd_step: float = 1e-5) -> float:
    """Max relative deviation of analytic vs central-difference gradients.

    Runs with dropout disabled; exercises every parameter entry.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    params = [p.copy() for p in model.params()]
    out = kernels.lstm_loss_grads(X, y, *params)
    grads = out[1:]

    def loss_at():
        pred = kernels.lstm_forward(X, *params)
        return float(np.mean((pred - y) ** 2))

    worst = 0.0
    for pi, p in enumerate(params):
        it = np.nditer(p, flags=["multi_index"])
        for _ in it:
            idx = it.multi_index
            orig = p[idx]
            p[idx] = orig + fd_step
            up = loss_at()
            p[idx] = orig - fd_step
            down = loss_at()
            p[idx] = orig
            num = (up - down) / (2.0 * fd_step)
            ana = float(grads[pi][idx])
            denom = max(abs(num), abs(ana), 1e-8)
            worst = max(worst, abs(num - ana) / denom)
    return worst


def model_to_text(model: ClockModelLSTM) -> str:
    cfg = model.config
    return dump_fields({
        "kind": "clock-lstm",
        "sn_id": model.sn_id,
        "hidden_units": cfg.hidden_units, "fc1_units": cfg.fc1_units,
        "dropout_rate": cfg.dropout_rate, "learning_rate": cfg.learning_rate,
        "epochs": cfg.epochs, "window_len": cfg.window_len,
        "seed": cfg.seed, "batch_size": cfg.batch_size,
        "plateau_patience": cfg.plateau_patience,
        "norm_mean": model.norm_mean, "norm_std": model.norm_std,
        "window_start": model.trained_window[0],
        "window_end": model.trained_window[1],
        "step_s": model.step_s,
        "W": model.W, "b": model.b, "W1": model.W1, "b1": model.b1,
        "W2": model.W2, "b2": model.b2,
    })


def model_from_text(text: str) -> ClockModelLSTM:
    f = parse_fields(text)
    if f.get("kind") != "clock-lstm":
        raise ValueError(f"not a clock-lstm snapshot (kind={f.get('kind')!r})")
    cfg = LstmConfig(
        hidden_units=f["hidden_units"], fc1_units=f["fc1_units"],
        dropout_rate=f["dropout_rate"], learning_rate=f["learning_rate"],
        epochs=f["epochs"], window_len=f["window_len"], seed=f["seed"],
        batch_size=f["batch_size"], plateau_patience=f["plateau_patience"],
    )
    return ClockModelLSTM(
        config=cfg,
        W=np.atleast_2d(f["W"]), b=np.atleast_1d(f["b"]),
        W1=np.atleast_2d(f["W1"]), b1=np.atleast_1d(f["b1"]),
        W2=np.atleast_2d(f["W2"]), b2=np.atleast_1d(f["b2"]),
        norm_mean=f["norm_mean"], norm_std=f["norm_std"],
        trained_window=(f["window_start"], f["window_end"]),
        step_s=f["step_s"], sn_id=f["sn_id"],
    )
