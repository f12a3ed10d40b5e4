# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled particle/mesh transfer kernels.

Same contracts as ``_kernels_py``; loops run in particle order so spreading
is deterministic.
"""
import numpy as np
from libc.math cimport floor, fabs


cdef inline void _bspline(double s, double* w, double* dw, double* d2w) noexcept nogil:
    cdef double a = fabs(s)
    cdef double t
    if a < 1.0:
        w[0] = 2.0 / 3.0 - a * a + 0.5 * a * a * a
        dw[0] = -2.0 * s + 1.5 * s * a
        d2w[0] = -2.0 + 3.0 * a
    elif a < 2.0:
        t = 2.0 - a
        w[0] = t * t * t / 6.0
        dw[0] = (-0.5 if s > 0 else 0.5) * t * t
        d2w[0] = t
    else:
        w[0] = 0.0
        dw[0] = 0.0
        d2w[0] = 0.0


cdef inline void _stencil(double x, double h, Py_ssize_t m, Py_ssize_t* idx,
                          double* w, double* dw, double* d2w) noexcept nogil:
    cdef double s = x / h
    cdef double fb = floor(s)
    cdef long base = <long>fb
    cdef Py_ssize_t a
    cdef long node
    for a in range(4):
        node = base - 1 + a
        _bspline(s - node, &w[a], &dw[a], &d2w[a])
        dw[a] /= h
        d2w[a] /= h * h
        node = node % m
        if node < 0:
            node += m
        idx[a] = node


def interp(const double[:, :, ::1] field, const double[:, ::1] pts, double hx, double hy):
    cdef Py_ssize_t mx = field.shape[0], my = field.shape[1], n = pts.shape[0]
    out_arr = np.zeros((n, 2))
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t ix[4]
    cdef Py_ssize_t iy[4]
    cdef double wx[4]
    cdef double dwx[4]
    cdef double d2wx[4]
    cdef double wy[4]
    cdef double dwy[4]
    cdef double d2wy[4]
    cdef Py_ssize_t b, a, c
    cdef double wab, s0, s1
    with nogil:
        for b in range(n):
            _stencil(pts[b, 0], hx, mx, ix, wx, dwx, d2wx)
            _stencil(pts[b, 1], hy, my, iy, wy, dwy, d2wy)
            s0 = 0.0
            s1 = 0.0
            for a in range(4):
                for c in range(4):
                    wab = wx[a] * wy[c]
                    s0 += field[ix[a], iy[c], 0] * wab
                    s1 += field[ix[a], iy[c], 1] * wab
            out[b, 0] = s0
            out[b, 1] = s1
    return out_arr


def interp_jac(const double[:, :, ::1] field, const double[:, ::1] pts, double hx, double hy):
    cdef Py_ssize_t mx = field.shape[0], my = field.shape[1], n = pts.shape[0]
    out_arr = np.zeros((n, 2, 2))
    cdef double[:, :, ::1] out = out_arr
    cdef Py_ssize_t ix[4]
    cdef Py_ssize_t iy[4]
    cdef double wx[4]
    cdef double dwx[4]
    cdef double d2wx[4]
    cdef double wy[4]
    cdef double dwy[4]
    cdef double d2wy[4]
    cdef Py_ssize_t b, a, c, comp
    cdef double gx, gy, v
    with nogil:
        for b in range(n):
            _stencil(pts[b, 0], hx, mx, ix, wx, dwx, d2wx)
            _stencil(pts[b, 1], hy, my, iy, wy, dwy, d2wy)
            for a in range(4):
                for c in range(4):
                    gx = dwx[a] * wy[c]
                    gy = wx[a] * dwy[c]
                    for comp in range(2):
                        v = field[ix[a], iy[c], comp]
                        out[b, comp, 0] += v * gx
                        out[b, comp, 1] += v * gy
    return out_arr


def interp_hess(const double[:, :, ::1] field, const double[:, ::1] pts, double hx, double hy):
    cdef Py_ssize_t mx = field.shape[0], my = field.shape[1], n = pts.shape[0]
    out_arr = np.zeros((n, 2, 2, 2))
    cdef double[:, :, :, ::1] out = out_arr
    cdef Py_ssize_t ix[4]
    cdef Py_ssize_t iy[4]
    cdef double wx[4]
    cdef double dwx[4]
    cdef double d2wx[4]
    cdef double wy[4]
    cdef double dwy[4]
    cdef double d2wy[4]
    cdef Py_ssize_t b, a, c, comp
    cdef double hxx, hyy, hxy, v
    with nogil:
        for b in range(n):
            _stencil(pts[b, 0], hx, mx, ix, wx, dwx, d2wx)
            _stencil(pts[b, 1], hy, my, iy, wy, dwy, d2wy)
            for a in range(4):
                for c in range(4):
                    hxx = d2wx[a] * wy[c]
                    hyy = wx[a] * d2wy[c]
                    hxy = dwx[a] * dwy[c]
                    for comp in range(2):
                        v = field[ix[a], iy[c], comp]
                        out[b, comp, 0, 0] += v * hxx
                        out[b, comp, 1, 1] += v * hyy
                        out[b, comp, 0, 1] += v * hxy
            for comp in range(2):
                out[b, comp, 1, 0] = out[b, comp, 0, 1]
    return out_arr


def spread(const double[:, ::1] vecs, const double[:, ::1] pts, Py_ssize_t mx, Py_ssize_t my,
           double hx, double hy):
    cdef Py_ssize_t n = pts.shape[0]
    out_arr = np.zeros((mx, my, 2))
    cdef double[:, :, ::1] out = out_arr
    cdef Py_ssize_t ix[4]
    cdef Py_ssize_t iy[4]
    cdef double wx[4]
    cdef double dwx[4]
    cdef double d2wx[4]
    cdef double wy[4]
    cdef double dwy[4]
    cdef double d2wy[4]
    cdef Py_ssize_t b, a, c
    cdef double wab
    with nogil:
        for b in range(n):
            _stencil(pts[b, 0], hx, mx, ix, wx, dwx, d2wx)
            _stencil(pts[b, 1], hy, my, iy, wy, dwy, d2wy)
            for a in range(4):
                for c in range(4):
                    wab = wx[a] * wy[c]
                    out[ix[a], iy[c], 0] += wab * vecs[b, 0]
                    out[ix[a], iy[c], 1] += wab * vecs[b, 1]
    return out_arr


def spread_dir(const double[:, ::1] vecs, const double[:, ::1] dirs, const double[:, ::1] pts,
               Py_ssize_t mx, Py_ssize_t my, double hx, double hy):
    cdef Py_ssize_t n = pts.shape[0]
    out_arr = np.zeros((mx, my, 2))
    cdef double[:, :, ::1] out = out_arr
    cdef Py_ssize_t ix[4]
    cdef Py_ssize_t iy[4]
    cdef double wx[4]
    cdef double dwx[4]
    cdef double d2wx[4]
    cdef double wy[4]
    cdef double dwy[4]
    cdef double d2wy[4]
    cdef Py_ssize_t b, a, c
    cdef double coef
    with nogil:
        for b in range(n):
            _stencil(pts[b, 0], hx, mx, ix, wx, dwx, d2wx)
            _stencil(pts[b, 1], hy, my, iy, wy, dwy, d2wy)
            for a in range(4):
                for c in range(4):
                    coef = dwx[a] * wy[c] * dirs[b, 0] + wx[a] * dwy[c] * dirs[b, 1]
                    out[ix[a], iy[c], 0] += coef * vecs[b, 0]
                    out[ix[a], iy[c], 1] += coef * vecs[b, 1]
    return out_arr
