# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled model kernels; same signatures as ``_kernels_py``."""
import numpy as np
cimport numpy as cnp
from libc.math cimport exp, tanh

cnp.import_array()

BACKEND = "cython"


cdef inline double _sig(double a) nogil:
    return 1.0 / (1.0 + exp(-a))


cdef double _pinball(const double[::1] y, double[:, ::1] pred, const double[::1] qs,
                     double[:, ::1] g) nogil:
    cdef Py_ssize_t qi, k
    cdef double loss = 0.0, d, q
    for qi in range(qs.shape[0]):
        q = qs[qi]
        for k in range(y.shape[0]):
            d = y[k] - pred[qi, k]
            if d > 0:
                loss += q * d
            else:
                loss += (q - 1.0) * d
            if pred[qi, k] < y[k]:
                g[qi, k] = -q
            elif pred[qi, k] > y[k]:
                g[qi, k] = 1.0 - q
            else:
                g[qi, k] = 0.0
    return loss


cdef void _heads_forward(const double[::1] p, Py_ssize_t off, const double[::1] z,
                         Py_ssize_t horizons, Py_ssize_t n_q, double[:, ::1] out) nogil:
    cdef Py_ssize_t n_in = z.shape[0], qi, k, j, base
    cdef double acc
    for qi in range(n_q):
        base = off + qi * horizons * (n_in + 1)
        for k in range(horizons):
            acc = 0.0
            for j in range(n_in):
                acc = acc + p[base + k * n_in + j] * z[j]
            out[qi, k] = acc + p[base + horizons * n_in + k]


cdef void _heads_backward(const double[::1] p, Py_ssize_t off, const double[::1] z,
                          double[:, ::1] g, double[::1] grad, double[::1] dz) nogil:
    # writes head gradients into grad and accumulates d(loss)/dz into dz
    cdef Py_ssize_t n_in = z.shape[0], n_q = g.shape[0], horizons = g.shape[1]
    cdef Py_ssize_t qi, k, j, base, row
    cdef double gk
    for j in range(n_in):
        dz[j] = 0.0
    for qi in range(n_q):
        base = off + qi * horizons * (n_in + 1)
        for k in range(horizons):
            gk = g[qi, k]
            row = base + k * n_in
            for j in range(n_in):
                grad[row + j] = gk * z[j]
                dz[j] += p[row + j] * gk
            grad[base + horizons * n_in + k] = gk


# -- linear -----------------------------------------------------------------

def linear_forward(params, x, Py_ssize_t horizons, Py_ssize_t n_q):
    cdef const double[::1] p = np.ascontiguousarray(params, dtype=np.float64)
    cdef const double[::1] z = np.ascontiguousarray(x, dtype=np.float64).reshape(-1)
    out = np.empty((n_q, horizons))
    cdef double[:, ::1] o = out
    with nogil:
        _heads_forward(p, 0, z, horizons, n_q, o)
    return out


def linear_loss_grad(params, x, y, qs):
    cdef const double[::1] p = np.ascontiguousarray(params, dtype=np.float64)
    cdef const double[::1] z = np.ascontiguousarray(x, dtype=np.float64).reshape(-1)
    cdef const double[::1] yv = np.ascontiguousarray(y, dtype=np.float64)
    cdef const double[::1] qv = np.ascontiguousarray(qs, dtype=np.float64)
    cdef Py_ssize_t n_q = qv.shape[0], horizons = yv.shape[0]
    pred = np.empty((n_q, horizons))
    gq = np.empty((n_q, horizons))
    grad = np.empty(p.shape[0])
    dz = np.empty(z.shape[0])
    cdef double[:, ::1] pr = pred
    cdef double[:, ::1] gv = gq
    cdef double[::1] gr = grad
    cdef double[::1] dzv = dz
    cdef double loss
    with nogil:
        _heads_forward(p, 0, z, horizons, n_q, pr)
        loss = _pinball(yv, pr, qv, gv)
        _heads_backward(p, 0, z, gv, gr, dzv)
    return loss, grad


# -- mlp --------------------------------------------------------------------

cdef void _mlp_trunk(const double[::1] p, const double[::1] z, double[::1] hid) nogil:
    cdef Py_ssize_t n_in = z.shape[0], hidden = hid.shape[0], r, j
    cdef double acc
    for r in range(hidden):
        acc = 0.0
        for j in range(n_in):
            acc = acc + p[r * n_in + j] * z[j]
        hid[r] = tanh(acc + p[hidden * n_in + r])


def mlp_forward(params, x, Py_ssize_t hidden, Py_ssize_t horizons, Py_ssize_t n_q):
    cdef const double[::1] p = np.ascontiguousarray(params, dtype=np.float64)
    cdef const double[::1] z = np.ascontiguousarray(x, dtype=np.float64).reshape(-1)
    hid = np.empty(hidden)
    out = np.empty((n_q, horizons))
    cdef double[::1] hv = hid
    cdef double[:, ::1] o = out
    cdef Py_ssize_t off = hidden * (z.shape[0] + 1)
    with nogil:
        _mlp_trunk(p, z, hv)
        _heads_forward(p, off, hv, horizons, n_q, o)
    return out


def mlp_loss_grad(params, x, y, qs, Py_ssize_t hidden):
    cdef const double[::1] p = np.ascontiguousarray(params, dtype=np.float64)
    cdef const double[::1] z = np.ascontiguousarray(x, dtype=np.float64).reshape(-1)
    cdef const double[::1] yv = np.ascontiguousarray(y, dtype=np.float64)
    cdef const double[::1] qv = np.ascontiguousarray(qs, dtype=np.float64)
    cdef Py_ssize_t n_q = qv.shape[0], horizons = yv.shape[0], n_in = z.shape[0]
    cdef Py_ssize_t off = hidden * (n_in + 1), r, j
    hid = np.empty(hidden)
    dhid = np.empty(hidden)
    pred = np.empty((n_q, horizons))
    gq = np.empty((n_q, horizons))
    grad = np.empty(p.shape[0])
    cdef double[::1] hv = hid
    cdef double[::1] dh = dhid
    cdef double[:, ::1] pr = pred
    cdef double[:, ::1] gv = gq
    cdef double[::1] gr = grad
    cdef double loss, d
    with nogil:
        _mlp_trunk(p, z, hv)
        _heads_forward(p, off, hv, horizons, n_q, pr)
        loss = _pinball(yv, pr, qv, gv)
        _heads_backward(p, off, hv, gv, gr, dh)
        for r in range(hidden):
            d = dh[r] * (1.0 - hv[r] * hv[r])
            for j in range(n_in):
                gr[r * n_in + j] = d * z[j]
            gr[hidden * n_in + r] = d
    return loss, grad


# -- lstm -------------------------------------------------------------------
# gate blocks ordered [input, forget, candidate, output]

cdef void _lstm_run(const double[::1] p, const double[:, ::1] x, Py_ssize_t hidden,
                    double[:, ::1] hs, double[:, ::1] cs, double[:, ::1] gates) nogil:
    cdef Py_ssize_t steps = x.shape[0], n_feat = x.shape[1], g4 = 4 * hidden
    cdef Py_ssize_t wh_off = g4 * n_feat, b_off = g4 * (n_feat + hidden)
    cdef Py_ssize_t t, r, j
    cdef double acc
    for r in range(hidden):
        hs[0, r] = 0.0
        cs[0, r] = 0.0
    for t in range(steps):
        for r in range(g4):
            acc = p[b_off + r]
            for j in range(n_feat):
                acc = acc + p[r * n_feat + j] * x[t, j]
            for j in range(hidden):
                acc = acc + p[wh_off + r * hidden + j] * hs[t, j]
            if r < 2 * hidden or r >= 3 * hidden:
                gates[t, r] = _sig(acc)
            else:
                gates[t, r] = tanh(acc)
        for r in range(hidden):
            cs[t + 1, r] = gates[t, hidden + r] * cs[t, r] + gates[t, r] * gates[t, 2 * hidden + r]
            hs[t + 1, r] = gates[t, 3 * hidden + r] * tanh(cs[t + 1, r])


def lstm_forward(params, x, Py_ssize_t hidden, Py_ssize_t horizons, Py_ssize_t n_q):
    cdef const double[::1] p = np.ascontiguousarray(params, dtype=np.float64)
    cdef const double[:, ::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef Py_ssize_t steps = xv.shape[0]
    hs = np.empty((steps + 1, hidden))
    cs = np.empty((steps + 1, hidden))
    gates = np.empty((steps, 4 * hidden))
    out = np.empty((n_q, horizons))
    cdef double[:, ::1] hv = hs
    cdef double[:, ::1] cv = cs
    cdef double[:, ::1] gv = gates
    cdef double[:, ::1] o = out
    cdef Py_ssize_t off = 4 * hidden * (xv.shape[1] + hidden + 1)
    with nogil:
        _lstm_run(p, xv, hidden, hv, cv, gv)
        _heads_forward(p, off, hv[steps], horizons, n_q, o)
    return out


def lstm_loss_grad(params, x, y, qs, Py_ssize_t hidden):
    cdef const double[::1] p = np.ascontiguousarray(params, dtype=np.float64)
    cdef const double[:, ::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef const double[::1] yv = np.ascontiguousarray(y, dtype=np.float64)
    cdef const double[::1] qv = np.ascontiguousarray(qs, dtype=np.float64)
    cdef Py_ssize_t n_q = qv.shape[0], horizons = yv.shape[0]
    cdef Py_ssize_t steps = xv.shape[0], n_feat = xv.shape[1], g4 = 4 * hidden
    cdef Py_ssize_t wh_off = g4 * n_feat, b_off = g4 * (n_feat + hidden), off = b_off + g4
    cdef Py_ssize_t t, r, j
    hs = np.empty((steps + 1, hidden))
    cs = np.empty((steps + 1, hidden))
    gates = np.empty((steps, g4))
    pred = np.empty((n_q, horizons))
    gq = np.empty((n_q, horizons))
    grad = np.zeros(p.shape[0])
    dh_a = np.empty(hidden)
    dhn_a = np.empty(hidden)
    dc_a = np.zeros(hidden)
    da_a = np.empty(g4)
    cdef double[:, ::1] hv = hs
    cdef double[:, ::1] cv = cs
    cdef double[:, ::1] gt = gates
    cdef double[:, ::1] pr = pred
    cdef double[:, ::1] gv = gq
    cdef double[::1] gr = grad
    cdef double[::1] dh = dh_a
    cdef double[::1] dhn = dhn_a
    cdef double[::1] dc = dc_a
    cdef double[::1] da = da_a
    cdef double loss, i, f, gg, o, tc, acc
    with nogil:
        _lstm_run(p, xv, hidden, hv, cv, gt)
        _heads_forward(p, off, hv[steps], horizons, n_q, pr)
        loss = _pinball(yv, pr, qv, gv)
        _heads_backward(p, off, hv[steps], gv, gr, dh)
        for t in range(steps - 1, -1, -1):
            for r in range(hidden):
                i = gt[t, r]
                f = gt[t, hidden + r]
                gg = gt[t, 2 * hidden + r]
                o = gt[t, 3 * hidden + r]
                tc = tanh(cv[t + 1, r])
                dc[r] = dc[r] + dh[r] * o * (1.0 - tc * tc)
                da[r] = dc[r] * gg * i * (1.0 - i)
                da[hidden + r] = dc[r] * cv[t, r] * f * (1.0 - f)
                da[2 * hidden + r] = dc[r] * i * (1.0 - gg * gg)
                da[3 * hidden + r] = dh[r] * tc * o * (1.0 - o)
                dc[r] = dc[r] * f
            for r in range(g4):
                for j in range(n_feat):
                    gr[r * n_feat + j] += da[r] * xv[t, j]
                for j in range(hidden):
                    gr[wh_off + r * hidden + j] += da[r] * hv[t, j]
                gr[b_off + r] += da[r]
            for j in range(hidden):
                acc = 0.0
                for r in range(g4):
                    acc = acc + p[wh_off + r * hidden + j] * da[r]
                dhn[j] = acc
            for j in range(hidden):
                dh[j] = dhn[j]
    return loss, grad
