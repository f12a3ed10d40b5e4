"""Curves as discrete currents on the mesh and the kernel mismatch functional.

A curve's current is ``v_k = sum_b (Q_b - Q_{b-1}) psi_k(Q_b)``. Two curves
are compared through ``f = dx*dy * <d, K d>`` with ``d`` the difference of
their currents and ``K`` the periodic Green's function of
``(1 - alpha^2 Laplacian)^power``, applied spectrally.
"""
from dataclasses import dataclass

import numpy as np

from .mesh import (apply_spectral, helmholtz_multiplier, inner, interp_jacobian,
                   interp_to_points, spread_to_mesh)
from .shape import as_points, edge_vectors


@dataclass(frozen=True)
class KernelOperator:
    alpha: float = 0.4
    power: int = 2

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError(f"kernel alpha must be positive, got {self.alpha}")
        if int(self.power) != self.power or self.power < 1:
            raise ValueError(f"kernel power must be a positive integer, got {self.power}")

    def multiplier(self, mesh):
        return helmholtz_multiplier(mesh, self.alpha, -int(self.power))

    def apply(self, field, mesh):
        return apply_spectral(np.asarray(field, dtype=float), self.multiplier(mesh))


def singular_current(curve, mesh):
    """Spread the edge vectors to the mesh at the particle positions."""
    pts = as_points(curve)
    return spread_to_mesh(edge_vectors(pts), pts, mesh)


def mismatch_current(curve, target_current, kernel, mesh):
    d = singular_current(curve, mesh) - target_current
    return inner(d, kernel.apply(d, mesh), mesh)


def mismatch(curve_a, curve_b, kernel, mesh):
    """Kernel distance between the currents of two curves; zero iff they coincide."""
    return mismatch_current(curve_a, singular_current(curve_b, mesh), kernel, mesh)


def mismatch_gradient_current(curve, target_current, kernel, mesh):
    pts = as_points(curve)
    d = singular_current(pts, mesh) - target_current
    w = 2.0 * mesh.cell_area * kernel.apply(d, mesh)
    E = edge_vectors(pts)
    W = interp_to_points(w, pts, mesh)
    # position dependence of psi_k(Q_b), then the edge terms: Q_b enters
    # E_b with + and E_{b+1} with -
    grad = np.einsum("nij,ni->nj", interp_jacobian(w, pts, mesh), E)
    grad += W - np.roll(W, -1, axis=0)
    return grad


def mismatch_gradient(curve_a, curve_b, kernel, mesh):
    """Gradient of :func:`mismatch` with respect to the particles of ``curve_a``."""
    return mismatch_gradient_current(curve_a, singular_current(curve_b, mesh), kernel, mesh)
