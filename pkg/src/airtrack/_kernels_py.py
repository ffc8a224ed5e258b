"""NumPy/SciPy fallback implementations of the hot kernels.

Mirrors ``_kernels_c`` (the Cython extension): same signatures, same
results up to floating-point reassociation. Selected automatically when
the extension is unavailable; see ``airtrack.kernels``.
"""

from __future__ import annotations

import numpy as np
from scipy.signal import lfilter
from scipy.special import expit


def arma_css_residuals(w, ar, ma):
    """One-step-ahead ARMA residuals with zero initial conditions.

    e[t] = w[t] - sum_i ar[i] w[t-1-i] - sum_j ma[j] e[t-1-j]
    """
    w = np.ascontiguousarray(w, dtype=float)
    b = np.concatenate(([1.0], -np.asarray(ar, dtype=float)))
    a = np.concatenate(([1.0], np.asarray(ma, dtype=float)))
    return lfilter(b, a, w)


def lstm_forward(x, W, b, W1, b1, W2, b2, drop_mask=None):
    """Batch forward pass: sequences (B, T) -> predictions (B,).

    Weight layout: W is (4H, 1+H) over gate rows [input; forget; cell;
    output], each gate taking [x_t, h_{t-1}]. The head is linear:
    fc1 -> (optional pre-scaled dropout mask) -> fc2.
    """
    x = np.asarray(x, dtype=float)
    B, T = x.shape
    H = W.shape[0] // 4
    h = np.zeros((B, H))
    c = np.zeros((B, H))
    for t in range(T):
        xh = np.concatenate([x[:, t:t + 1], h], axis=1)
        z = xh @ W.T + b
        i = expit(z[:, :H])
        f = expit(z[:, H:2 * H])
        g = np.tanh(z[:, 2 * H:3 * H])
        o = expit(z[:, 3 * H:])
        c = f * c + i * g
        h = o * np.tanh(c)
    u = h @ W1.T + b1
    if drop_mask is not None:
        u = u * drop_mask
    y = u @ W2.T + b2
    return y[:, 0]


def lstm_loss_grads(x, targets, W, b, W1, b1, W2, b2, drop_mask=None):
    """Mean-squared-error loss and gradients for one batch.

    Returns (loss, gW, gb, gW1, gb1, gW2, gb2). The backward pass is plain
    backpropagation through time over the stored gate activations.
    """
    x = np.asarray(x, dtype=float)
    targets = np.asarray(targets, dtype=float)
    B, T = x.shape
    H = W.shape[0] // 4

    h = np.zeros((B, H))
    c = np.zeros((B, H))
    cache = []
    for t in range(T):
        xh = np.concatenate([x[:, t:t + 1], h], axis=1)
        z = xh @ W.T + b
        i = expit(z[:, :H])
        f = expit(z[:, H:2 * H])
        g = np.tanh(z[:, 2 * H:3 * H])
        o = expit(z[:, 3 * H:])
        c_prev = c
        c = f * c + i * g
        tc = np.tanh(c)
        h = o * tc
        cache.append((xh, i, f, g, o, c_prev, tc))
    u = h @ W1.T + b1
    ud = u * drop_mask if drop_mask is not None else u
    y = (ud @ W2.T + b2)[:, 0]

    err = y - targets
    loss = float(np.mean(err * err))
    dy = (2.0 / B) * err

    gW2 = (dy[None, :] @ ud)
    gb2 = np.array([dy.sum()])
    dud = np.outer(dy, W2[0])
    du = dud * drop_mask if drop_mask is not None else dud
    gW1 = du.T @ h
    gb1 = du.sum(axis=0)
    dh = du @ W1

    gW = np.zeros_like(W)
    gb = np.zeros_like(b)
    dc = np.zeros((B, H))
    for t in range(T - 1, -1, -1):
        xh, i, f, g, o, c_prev, tc = cache[t]
        dc = dc + dh * o * (1.0 - tc * tc)
        do = dh * tc
        di = dc * g
        df = dc * c_prev
        dg = dc * i
        dz = np.concatenate([
            di * i * (1.0 - i),
            df * f * (1.0 - f),
            dg * (1.0 - g * g),
            do * o * (1.0 - o),
        ], axis=1)
        gW += dz.T @ xh
        gb += dz.sum(axis=0)
        dh = dz @ W[:, 1:]
        dc = dc * f
    return loss, gW, gb, gW1, gb1, gW2, gb2
