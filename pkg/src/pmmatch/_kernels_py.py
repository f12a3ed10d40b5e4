"""Pure-numpy particle/mesh transfer kernels.

Reference implementation of the compiled core in ``_kernels.pyx``. Every
function takes and returns C-contiguous float64 arrays; fields have shape
``(mx, my, 2)`` and particle arrays ``(n, 2)``. Grid node ``(i, j)`` sits at
``(i*hx, j*hy)`` and indices wrap periodically.
"""
import numpy as np


def _weights(s):
    # s: offsets in grid units, any shape. Returns B, B', B'' of the cardinal
    # cubic B-spline.
    a = np.abs(s)
    inner = a < 1.0
    outer = (a >= 1.0) & (a < 2.0)
    t = 2.0 - a
    w = np.where(inner, 2.0 / 3.0 - a * a + 0.5 * a ** 3,
                 np.where(outer, t ** 3 / 6.0, 0.0))
    dw = np.where(inner, -2.0 * s + 1.5 * s * a,
                  np.where(outer, -np.sign(s) * 0.5 * t * t, 0.0))
    d2w = np.where(inner, -2.0 + 3.0 * a, np.where(outer, t, 0.0))
    return w, dw, d2w


def _stencil(pts, h, m, axis):
    s = pts[:, axis] / h
    base = np.floor(s).astype(np.int64)
    offs = np.arange(-1, 3)
    nodes = base[:, None] + offs[None, :]
    w, dw, d2w = _weights(s[:, None] - nodes)
    return nodes % m, w, dw / h, d2w / (h * h)


def _gather(field, pts, hx, hy):
    mx, my = field.shape[:2]
    ix, wx, dwx, d2wx = _stencil(pts, hx, mx, 0)
    iy, wy, dwy, d2wy = _stencil(pts, hy, my, 1)
    # (n, 4, 4, 2) stencil values
    vals = field[ix[:, :, None], iy[:, None, :]]
    return vals, (wx, dwx, d2wx), (wy, dwy, d2wy)


def interp(field, pts, hx, hy):
    vals, (wx, _, _), (wy, _, _) = _gather(field, pts, hx, hy)
    return np.einsum("nabc,na,nb->nc", vals, wx, wy)


def interp_jac(field, pts, hx, hy):
    vals, (wx, dwx, _), (wy, dwy, _) = _gather(field, pts, hx, hy)
    out = np.empty((pts.shape[0], 2, 2))
    out[:, :, 0] = np.einsum("nabc,na,nb->nc", vals, dwx, wy)
    out[:, :, 1] = np.einsum("nabc,na,nb->nc", vals, wx, dwy)
    return out


def interp_hess(field, pts, hx, hy):
    vals, (wx, dwx, d2wx), (wy, dwy, d2wy) = _gather(field, pts, hx, hy)
    out = np.empty((pts.shape[0], 2, 2, 2))
    out[:, :, 0, 0] = np.einsum("nabc,na,nb->nc", vals, d2wx, wy)
    out[:, :, 1, 1] = np.einsum("nabc,na,nb->nc", vals, wx, d2wy)
    cross = np.einsum("nabc,na,nb->nc", vals, dwx, dwy)
    out[:, :, 0, 1] = cross
    out[:, :, 1, 0] = cross
    return out


def _scatter(contrib, ix, iy, mx, my):
    # contrib: (n, 4, 4, 2). np.add.at accumulates in particle order, so the
    # result is reproducible bit for bit.
    out = np.zeros((mx, my, 2))
    np.add.at(out, (ix[:, :, None], iy[:, None, :]), contrib)
    return out


def spread(vecs, pts, mx, my, hx, hy):
    ix, wx, _, _ = _stencil(pts, hx, mx, 0)
    iy, wy, _, _ = _stencil(pts, hy, my, 1)
    contrib = (wx[:, :, None] * wy[:, None, :])[..., None] * vecs[:, None, None, :]
    return _scatter(contrib, ix, iy, mx, my)


def spread_dir(vecs, dirs, pts, mx, my, hx, hy):
    ix, wx, dwx, _ = _stencil(pts, hx, mx, 0)
    iy, wy, dwy, _ = _stencil(pts, hy, my, 1)
    coef = (dwx[:, :, None] * wy[:, None, :] * dirs[:, 0, None, None]
            + wx[:, :, None] * dwy[:, None, :] * dirs[:, 1, None, None])
    contrib = coef[..., None] * vecs[:, None, None, :]
    return _scatter(contrib, ix, iy, mx, my)
