"""Pure numpy model kernels.

Reference implementation of the hot loops; :mod:`smoothsgd._kernels` is a
compiled drop-in with the same signatures. Parameter layouts are described
in :mod:`smoothsgd.models`.

Every ``*_loss_grad`` function returns ``(loss, grad)`` where ``loss`` is the
summed pinball loss over the quantile x horizon grid.
"""
import numpy as np

BACKEND = "python"


def _pinball(y, pred, qs):
    diff = y[None, :] - pred
    q = qs[:, None]
    loss = np.where(diff > 0, q * diff, (q - 1.0) * diff).sum()
    g = np.where(pred < y[None, :], -q, np.where(pred > y[None, :], 1.0 - q, 0.0))
    return float(loss), g


def _sigmoid(a):
    return 1.0 / (1.0 + np.exp(-a))


def _heads(params, offset, n_in, horizons, n_q):
    blocks = params[offset:].reshape(n_q, horizons * (n_in + 1))
    weights = blocks[:, : horizons * n_in].reshape(n_q, horizons, n_in)
    return weights, blocks[:, horizons * n_in:]


def _pack_heads(grad, offset, g, z, horizons, n_q):
    n_in = z.size
    blocks = grad[offset:].reshape(n_q, horizons * (n_in + 1))
    blocks[:, : horizons * n_in] = (g[:, :, None] * z[None, None, :]).reshape(n_q, -1)
    blocks[:, horizons * n_in:] = g


# -- linear -----------------------------------------------------------------

def linear_forward(params, x, horizons, n_q):
    z = x.reshape(-1)
    with np.errstate(all="ignore"):
        w, b = _heads(params, 0, z.size, horizons, n_q)
        return w @ z + b


def linear_loss_grad(params, x, y, qs):
    z = x.reshape(-1)
    n_q, horizons = qs.size, y.size
    with np.errstate(all="ignore"):
        w, b = _heads(params, 0, z.size, horizons, n_q)
        loss, g = _pinball(y, w @ z + b, qs)
        grad = np.empty_like(params)
        _pack_heads(grad, 0, g, z, horizons, n_q)
    return loss, grad


# -- mlp --------------------------------------------------------------------

def _mlp_trunk(params, z, hidden):
    n_in = z.size
    w1 = params[: hidden * n_in].reshape(hidden, n_in)
    b1 = params[hidden * n_in: hidden * (n_in + 1)]
    return w1, b1, np.tanh(w1 @ z + b1)


def mlp_forward(params, x, hidden, horizons, n_q):
    z = x.reshape(-1)
    with np.errstate(all="ignore"):
        _, _, hid = _mlp_trunk(params, z, hidden)
        w, b = _heads(params, hidden * (z.size + 1), hidden, horizons, n_q)
        return w @ hid + b


def mlp_loss_grad(params, x, y, qs, hidden):
    z = x.reshape(-1)
    n_in = z.size
    n_q, horizons = qs.size, y.size
    off = hidden * (n_in + 1)
    with np.errstate(all="ignore"):
        _, _, hid = _mlp_trunk(params, z, hidden)
        w, b = _heads(params, off, hidden, horizons, n_q)
        loss, g = _pinball(y, w @ hid + b, qs)
        grad = np.empty_like(params)
        _pack_heads(grad, off, g, hid, horizons, n_q)
        d_hid = np.einsum("qhk,qh->k", w, g)
        d_pre = d_hid * (1.0 - hid * hid)
        grad[: hidden * n_in] = np.outer(d_pre, z).reshape(-1)
        grad[hidden * n_in: off] = d_pre
    return loss, grad


# -- lstm -------------------------------------------------------------------
# gate blocks ordered [input, forget, candidate, output]

def _lstm_split(params, n_feat, hidden):
    g4 = 4 * hidden
    wx = params[: g4 * n_feat].reshape(g4, n_feat)
    o = g4 * n_feat
    wh = params[o: o + g4 * hidden].reshape(g4, hidden)
    o += g4 * hidden
    return wx, wh, params[o: o + g4], o + g4


def _lstm_run(wx, wh, b, x, hidden):
    steps = x.shape[0]
    h = np.zeros(hidden)
    c = np.zeros(hidden)
    hs = np.zeros((steps + 1, hidden))
    cs = np.zeros((steps + 1, hidden))
    gates = np.empty((steps, 4 * hidden))
    for t in range(steps):
        a = wx @ x[t] + wh @ h + b
        i = _sigmoid(a[:hidden])
        f = _sigmoid(a[hidden: 2 * hidden])
        gg = np.tanh(a[2 * hidden: 3 * hidden])
        o = _sigmoid(a[3 * hidden:])
        c = f * c + i * gg
        h = o * np.tanh(c)
        gates[t, :hidden] = i
        gates[t, hidden: 2 * hidden] = f
        gates[t, 2 * hidden: 3 * hidden] = gg
        gates[t, 3 * hidden:] = o
        hs[t + 1] = h
        cs[t + 1] = c
    return hs, cs, gates


def lstm_forward(params, x, hidden, horizons, n_q):
    with np.errstate(all="ignore"):
        wx, wh, b, off = _lstm_split(params, x.shape[1], hidden)
        hs, _, _ = _lstm_run(wx, wh, b, x, hidden)
        w, hb = _heads(params, off, hidden, horizons, n_q)
        return w @ hs[-1] + hb


def lstm_loss_grad(params, x, y, qs, hidden):
    n_q, horizons = qs.size, y.size
    steps, n_feat = x.shape
    with np.errstate(all="ignore"):
        wx, wh, b, off = _lstm_split(params, n_feat, hidden)
        hs, cs, gates = _lstm_run(wx, wh, b, x, hidden)
        w, hb = _heads(params, off, hidden, horizons, n_q)
        loss, g = _pinball(y, w @ hs[-1] + hb, qs)

        grad = np.zeros_like(params)
        _pack_heads(grad, off, g, hs[-1], horizons, n_q)
        g4 = 4 * hidden
        d_wx = grad[: g4 * n_feat].reshape(g4, n_feat)
        d_wh = grad[g4 * n_feat: g4 * (n_feat + hidden)].reshape(g4, hidden)
        d_b = grad[g4 * (n_feat + hidden): off]

        dh = np.einsum("qhk,qh->k", w, g)
        dc = np.zeros(hidden)
        da = np.empty(g4)
        for t in range(steps - 1, -1, -1):
            i = gates[t, :hidden]
            f = gates[t, hidden: 2 * hidden]
            gg = gates[t, 2 * hidden: 3 * hidden]
            o = gates[t, 3 * hidden:]
            tc = np.tanh(cs[t + 1])
            dc = dc + dh * o * (1.0 - tc * tc)
            da[:hidden] = dc * gg * i * (1.0 - i)
            da[hidden: 2 * hidden] = dc * cs[t] * f * (1.0 - f)
            da[2 * hidden: 3 * hidden] = dc * i * (1.0 - gg * gg)
            da[3 * hidden:] = dh * tc * o * (1.0 - o)
            d_wx += np.outer(da, x[t])
            d_wh += np.outer(da, hs[t])
            d_b += da
            dh = wh.T @ da
            dc = dc * f
    return loss, grad
