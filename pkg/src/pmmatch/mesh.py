"""Periodic mesh, cubic B-spline particle/mesh transfer and spectral operators.

Mesh fields are numpy arrays of shape ``(mx, my, 2)``; node ``(i, j)`` is at
``(i*dx, j*dy)``. Particle arrays have shape ``(n, 2)``. Transfers use the
tensor product of cardinal cubic B-splines in grid units (4x4 stencil per
particle) with periodic wrap.

Quadrature convention: every mesh integral is a Riemann sum weighted by
``dx*dy``. The discrete momentum map therefore reads
``dx*dy * apply_metric(u) = spread_to_mesh(P, Q)``.
"""
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from ._backend import kernels as _k
from ._kernels_py import _weights


@dataclass(frozen=True)
class MeshConfig:
    """Periodic rectangular grid with ``mx * my`` nodes on ``[0, Lx) x [0, Ly)``."""

    mx: int = 128
    my: int = 128
    Lx: float = 2 * np.pi
    Ly: float = 2 * np.pi

    def __post_init__(self):
        if int(self.mx) != self.mx or int(self.my) != self.my:
            raise ValueError("grid sizes must be integers")
        if self.mx < 8 or self.my < 8:
            raise ValueError(f"grid must be at least 8x8, got {self.mx}x{self.my}")
        if not (self.Lx > 0 and self.Ly > 0 and np.isfinite(self.Lx) and np.isfinite(self.Ly)):
            raise ValueError("domain lengths must be positive and finite")

    @classmethod
    def square(cls, m=128, L=2 * np.pi):
        return cls(m, m, L, L)

    @property
    def dx(self):
        return self.Lx / self.mx

    @property
    def dy(self):
        return self.Ly / self.my

    @property
    def cell_area(self):
        return self.dx * self.dy

    @property
    def shape(self):
        return (self.mx, self.my, 2)

    def zeros(self):
        return np.zeros(self.shape)

    def nodes(self):
        """Node coordinates as an ``(mx, my, 2)`` array."""
        x = np.arange(self.mx) * self.dx
        y = np.arange(self.my) * self.dy
        return np.stack(np.meshgrid(x, y, indexing="ij"), axis=-1)

    def wrap(self, points):
        """Map positions into the fundamental domain."""
        points = np.asarray(points, dtype=float)
        return np.mod(points, [self.Lx, self.Ly])


@dataclass(frozen=True)
class NormOperator:
    """The operator ``(1 - alpha^2 Laplacian)^power`` on periodic fields."""

    alpha: float = 0.4
    power: int = 2

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if int(self.power) != self.power or self.power < 1:
            raise ValueError(f"power must be a positive integer, got {self.power}")

    def multiplier(self, mesh):
        return helmholtz_multiplier(mesh, self.alpha, int(self.power))


def helmholtz_multiplier(mesh, alpha, power):
    """``(1 + alpha^2 |k|^2)^power`` on the half-spectrum used by ``rfft2``."""
    return _multiplier(mesh.mx, mesh.my, mesh.Lx, mesh.Ly, float(alpha), int(power))


@lru_cache(maxsize=32)
def _multiplier(mx, my, Lx, Ly, alpha, power):
    kx = 2 * np.pi * np.fft.fftfreq(mx, d=Lx / mx)
    ky = 2 * np.pi * np.fft.rfftfreq(my, d=Ly / my)
    k2 = kx[:, None] ** 2 + ky[None, :] ** 2
    mult = (1.0 + alpha ** 2 * k2) ** power
    mult.setflags(write=False)
    return mult


def wavenumbers(mesh):
    """Angular wavenumbers ``(kx, ky)`` of the full 2-D DFT on ``mesh``."""
    kx = 2 * np.pi * np.fft.fftfreq(mesh.mx, d=mesh.dx)
    ky = 2 * np.pi * np.fft.fftfreq(mesh.my, d=mesh.dy)
    return kx, ky


def bspline_weight(r):
    """Cardinal cubic B-spline, support ``|r| < 2``."""
    w, _, _ = _k_weights(r)
    return w


def bspline_weight_deriv(r):
    """Exact derivative of :func:`bspline_weight`."""
    _, dw, _ = _k_weights(r)
    return dw


def bspline_weight_deriv2(r):
    _, _, d2w = _k_weights(r)
    return d2w


def _k_weights(r):
    r = np.asarray(r, dtype=float)
    w, dw, d2w = _weights(r)
    if r.ndim == 0:
        return float(w), float(dw), float(d2w)
    return w, dw, d2w


def _points(points):
    return np.ascontiguousarray(np.asarray(points, dtype=float).reshape(-1, 2))


def _field(field, mesh):
    field = np.ascontiguousarray(field, dtype=float)
    if field.shape != mesh.shape:
        raise ValueError(f"field shape {field.shape} does not match mesh {mesh.shape}")
    return field


def interp_to_points(field, points, mesh):
    """Evaluate ``sum_k u_k psi_k(x)`` at each point; returns ``(n, 2)``."""
    return _k.interp(_field(field, mesh), _points(points), mesh.dx, mesh.dy)


def interp_jacobian(field, points, mesh):
    """Spatial gradient of the interpolated field, ``out[b, i, j] = d u_i / d x_j``."""
    return _k.interp_jac(_field(field, mesh), _points(points), mesh.dx, mesh.dy)


def interp_hessian(field, points, mesh):
    """Second derivatives, ``out[b, i, j, l] = d^2 u_i / d x_j d x_l``."""
    return _k.interp_hess(_field(field, mesh), _points(points), mesh.dx, mesh.dy)


def spread_to_mesh(vectors, points, mesh):
    """Transpose of :func:`interp_to_points`: ``m_k = sum_b v_b psi_k(Q_b)``."""
    vectors = _points(vectors)
    points = _points(points)
    if vectors.shape != points.shape:
        raise ValueError("vectors and points must have the same length")
    return _k.spread(vectors, points, mesh.mx, mesh.my, mesh.dx, mesh.dy)


def spread_directional(vectors, directions, points, mesh):
    """``m_k = sum_b v_b (grad psi_k(Q_b) . d_b)``, the Q-derivative of spreading."""
    return _k.spread_dir(_points(vectors), _points(directions), _points(points),
                         mesh.mx, mesh.my, mesh.dx, mesh.dy)


def apply_spectral(field, multiplier):
    spec = np.fft.rfft2(field, axes=(0, 1))
    spec *= multiplier[:, :, None]
    return np.fft.irfft2(spec, s=field.shape[:2], axes=(0, 1))


def apply_metric(field, op, mesh):
    """Apply ``(1 - alpha^2 Laplacian)^n`` spectrally."""
    return apply_spectral(_field(field, mesh), op.multiplier(mesh))


def invert_metric(field, op, mesh):
    """Apply the inverse of :func:`apply_metric`; the multiplier is never below 1."""
    return apply_spectral(_field(field, mesh), 1.0 / op.multiplier(mesh))


def inner(a, b, mesh):
    """Riemann-sum L2 inner product of two mesh fields."""
    return mesh.cell_area * float(np.vdot(a, b))


def norm_squared(field, op, mesh):
    """Discrete squared norm ``dx*dy * sum_k u_k . (A u)_k``."""
    field = _field(field, mesh)
    return inner(field, apply_metric(field, op, mesh), mesh)
