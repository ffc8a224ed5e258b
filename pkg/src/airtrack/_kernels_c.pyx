"""Cython implementations of the hot kernels.

Same contracts as ``_kernels_py``; kept free of Python-level work inside
the time/batch loops. See that module for the reference semantics.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, tanh

cnp.import_array()


cdef inline double _sigmoid(double v) nogil:
    cdef double e
    if v >= 0.0:
        return 1.0 / (1.0 + exp(-v))
    e = exp(v)
    return e / (1.0 + e)


def arma_css_residuals(w_in, ar_in, ma_in):
    """One-step-ahead ARMA residuals with zero initial conditions."""
    cdef const double[::1] w = np.ascontiguousarray(w_in, dtype=np.float64)
    cdef const double[::1] ar = np.ascontiguousarray(ar_in, dtype=np.float64)
    cdef const double[::1] ma = np.ascontiguousarray(ma_in, dtype=np.float64)
    cdef Py_ssize_t n = w.shape[0], p = ar.shape[0], q = ma.shape[0]
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] e = out
    cdef Py_ssize_t t, i, j, pi, qi
    cdef double acc
    with nogil:
        for t in range(n):
            acc = w[t]
            pi = p if p < t else t
            qi = q if q < t else t
            for i in range(pi):
                acc -= ar[i] * w[t - 1 - i]
            for j in range(qi):
                acc -= ma[j] * e[t - 1 - j]
            e[t] = acc
    return out


def lstm_forward(x_in, W_in, b_in, W1_in, b1_in, W2_in, b2_in, drop_mask=None):
    """Batch forward pass: sequences (B, T) -> predictions (B,)."""
    cdef const double[:, ::1] x = np.ascontiguousarray(x_in, dtype=np.float64)
    cdef const double[:, ::1] W = np.ascontiguousarray(W_in, dtype=np.float64)
    cdef const double[::1] b = np.ascontiguousarray(b_in, dtype=np.float64)
    cdef const double[:, ::1] W1 = np.ascontiguousarray(W1_in, dtype=np.float64)
    cdef const double[::1] b1 = np.ascontiguousarray(b1_in, dtype=np.float64)
    cdef const double[:, ::1] W2 = np.ascontiguousarray(W2_in, dtype=np.float64)
    cdef const double[::1] b2 = np.ascontiguousarray(b2_in, dtype=np.float64)
    cdef Py_ssize_t B = x.shape[0], T = x.shape[1]
    cdef Py_ssize_t H = W.shape[0] // 4, F = W1.shape[0]

    cdef bint has_mask = drop_mask is not None
    cdef const double[:, ::1] mask
    if has_mask:
        mask = np.ascontiguousarray(drop_mask, dtype=np.float64)

    h_arr = np.zeros((B, H), dtype=np.float64)
    c_arr = np.zeros((B, H), dtype=np.float64)
    z_arr = np.empty(4 * H, dtype=np.float64)
    y_arr = np.empty(B, dtype=np.float64)
    cdef double[:, ::1] h = h_arr
    cdef double[:, ::1] c = c_arr
    cdef double[::1] z = z_arr
    cdef double[::1] y = y_arr

    cdef Py_ssize_t t, bb, j, k, fidx
    cdef double acc, iv, fv, gv, ov, u
    with nogil:
        for t in range(T):
            for bb in range(B):
                for j in range(4 * H):
                    acc = b[j] + W[j, 0] * x[bb, t]
                    for k in range(H):
                        acc += W[j, 1 + k] * h[bb, k]
                    z[j] = acc
                for k in range(H):
                    iv = _sigmoid(z[k])
                    fv = _sigmoid(z[H + k])
                    gv = tanh(z[2 * H + k])
                    ov = _sigmoid(z[3 * H + k])
                    c[bb, k] = fv * c[bb, k] + iv * gv
                    h[bb, k] = ov * tanh(c[bb, k])
        for bb in range(B):
            acc = b2[0]
            for fidx in range(F):
                u = b1[fidx]
                for k in range(H):
                    u += W1[fidx, k] * h[bb, k]
                if has_mask:
                    u *= mask[bb, fidx]
                acc += W2[0, fidx] * u
            y[bb] = acc
    return y_arr


def lstm_loss_grads(x_in, targets_in, W_in, b_in, W1_in, b1_in, W2_in, b2_in,
                    drop_mask=None):
    """Mean-squared-error loss and gradients for one batch (BPTT)."""
    cdef const double[:, ::1] x = np.ascontiguousarray(x_in, dtype=np.float64)
    cdef const double[::1] targets = np.ascontiguousarray(targets_in, dtype=np.float64)
    cdef const double[:, ::1] W = np.ascontiguousarray(W_in, dtype=np.float64)
    cdef const double[::1] b = np.ascontiguousarray(b_in, dtype=np.float64)
    cdef const double[:, ::1] W1 = np.ascontiguousarray(W1_in, dtype=np.float64)
    cdef const double[::1] b1 = np.ascontiguousarray(b1_in, dtype=np.float64)
    cdef const double[:, ::1] W2 = np.ascontiguousarray(W2_in, dtype=np.float64)
    cdef const double[::1] b2 = np.ascontiguousarray(b2_in, dtype=np.float64)
    cdef Py_ssize_t B = x.shape[0], T = x.shape[1]
    cdef Py_ssize_t H = W.shape[0] // 4, F = W1.shape[0]

    cdef bint has_mask = drop_mask is not None
    cdef const double[:, ::1] mask
    if has_mask:
        mask = np.ascontiguousarray(drop_mask, dtype=np.float64)

    # forward caches: h/c histories plus gate activations per step
    hs_arr = np.zeros((T + 1, B, H), dtype=np.float64)
    cs_arr = np.zeros((T + 1, B, H), dtype=np.float64)
    ia_arr = np.empty((T, B, H), dtype=np.float64)
    fa_arr = np.empty((T, B, H), dtype=np.float64)
    ga_arr = np.empty((T, B, H), dtype=np.float64)
    oa_arr = np.empty((T, B, H), dtype=np.float64)
    tca_arr = np.empty((T, B, H), dtype=np.float64)
    cdef double[:, :, ::1] hs = hs_arr
    cdef double[:, :, ::1] cs = cs_arr
    cdef double[:, :, ::1] ia = ia_arr
    cdef double[:, :, ::1] fa = fa_arr
    cdef double[:, :, ::1] ga = ga_arr
    cdef double[:, :, ::1] oa = oa_arr
    cdef double[:, :, ::1] tca = tca_arr

    z_arr = np.empty(4 * H, dtype=np.float64)
    cdef double[::1] z = z_arr
    u_arr = np.empty((B, F), dtype=np.float64)
    ud_arr = np.empty((B, F), dtype=np.float64)
    y_arr = np.empty(B, dtype=np.float64)
    cdef double[:, ::1] u = u_arr
    cdef double[:, ::1] ud = ud_arr
    cdef double[::1] y = y_arr

    gW_arr = np.zeros((4 * H, 1 + H), dtype=np.float64)
    gb_arr = np.zeros(4 * H, dtype=np.float64)
    gW1_arr = np.zeros((F, H), dtype=np.float64)
    gb1_arr = np.zeros(F, dtype=np.float64)
    gW2_arr = np.zeros((1, F), dtype=np.float64)
    gb2_arr = np.zeros(1, dtype=np.float64)
    cdef double[:, ::1] gW = gW_arr
    cdef double[::1] gb = gb_arr
    cdef double[:, ::1] gW1 = gW1_arr
    cdef double[::1] gb1 = gb1_arr
    cdef double[:, ::1] gW2 = gW2_arr
    cdef double[::1] gb2 = gb2_arr

    dh_arr = np.zeros((B, H), dtype=np.float64)
    dc_arr = np.zeros((B, H), dtype=np.float64)
    dz_arr = np.empty(4 * H, dtype=np.float64)
    cdef double[:, ::1] dh = dh_arr
    cdef double[:, ::1] dc = dc_arr
    cdef double[::1] dz = dz_arr

    cdef Py_ssize_t t, bb, j, k, fidx
    cdef double acc, uv, loss = 0.0, dy, dval, duv, tcv, dcv, dov
    with nogil:
        for t in range(T):
            for bb in range(B):
                for j in range(4 * H):
                    acc = b[j] + W[j, 0] * x[bb, t]
                    for k in range(H):
                        acc += W[j, 1 + k] * hs[t, bb, k]
                    z[j] = acc
                for k in range(H):
                    ia[t, bb, k] = _sigmoid(z[k])
                    fa[t, bb, k] = _sigmoid(z[H + k])
                    ga[t, bb, k] = tanh(z[2 * H + k])
                    oa[t, bb, k] = _sigmoid(z[3 * H + k])
                    cs[t + 1, bb, k] = fa[t, bb, k] * cs[t, bb, k] + ia[t, bb, k] * ga[t, bb, k]
                    tca[t, bb, k] = tanh(cs[t + 1, bb, k])
                    hs[t + 1, bb, k] = oa[t, bb, k] * tca[t, bb, k]
        for bb in range(B):
            acc = b2[0]
            for fidx in range(F):
                uv = b1[fidx]
                for k in range(H):
                    uv += W1[fidx, k] * hs[T, bb, k]
                u[bb, fidx] = uv
                if has_mask:
                    uv *= mask[bb, fidx]
                ud[bb, fidx] = uv
                acc += W2[0, fidx] * uv
            y[bb] = acc
            loss += (acc - targets[bb]) * (acc - targets[bb])
        loss /= B

        # head backward
        for bb in range(B):
            dy = (2.0 / B) * (y[bb] - targets[bb])
            gb2[0] += dy
            for fidx in range(F):
                gW2[0, fidx] += dy * ud[bb, fidx]
                duv = dy * W2[0, fidx]
                if has_mask:
                    duv *= mask[bb, fidx]
                gb1[fidx] += duv
                for k in range(H):
                    gW1[fidx, k] += duv * hs[T, bb, k]
                    dh[bb, k] += duv * W1[fidx, k]

        # backpropagation through time
        for t in range(T - 1, -1, -1):
            for bb in range(B):
                for k in range(H):
                    tcv = tca[t, bb, k]
                    dc[bb, k] += dh[bb, k] * oa[t, bb, k] * (1.0 - tcv * tcv)
                    dov = dh[bb, k] * tcv
                    dcv = dc[bb, k]
                    dz[k] = dcv * ga[t, bb, k] * ia[t, bb, k] * (1.0 - ia[t, bb, k])
                    dz[H + k] = dcv * cs[t, bb, k] * fa[t, bb, k] * (1.0 - fa[t, bb, k])
                    dz[2 * H + k] = dcv * ia[t, bb, k] * (1.0 - ga[t, bb, k] * ga[t, bb, k])
                    dz[3 * H + k] = dov * oa[t, bb, k] * (1.0 - oa[t, bb, k])
                for j in range(4 * H):
                    dval = dz[j]
                    gb[j] += dval
                    gW[j, 0] += dval * x[bb, t]
                    for k in range(H):
                        gW[j, 1 + k] += dval * hs[t, bb, k]
                for k in range(H):
                    acc = 0.0
                    for j in range(4 * H):
                        acc += dz[j] * W[j, 1 + k]
                    dh[bb, k] = acc
                    dc[bb, k] *= fa[t, bb, k]
    return loss, gW_arr, gb_arr, gW1_arr, gb1_arr, gW2_arr, gb2_arr
