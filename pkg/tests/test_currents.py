import math

import numpy as np
import pytest
from scipy.optimize import minimize_scalar

import oracles
from pmmatch.currents import KernelOperator, mismatch, mismatch_gradient, singular_current
from pmmatch.mesh import MeshConfig, spread_to_mesh
from pmmatch.shape import ParticleCurve, edge_vectors, make_shape

K = KernelOperator(0.4, 2)


def test_kernel_validation():
    with pytest.raises(ValueError):
        KernelOperator(0.0, 2)
    with pytest.raises(ValueError):
        KernelOperator(0.4, 0)


def test_kernel_multiplier_range(mesh32):
    mult = K.multiplier(mesh32)
    assert mult[0, 0] == 1.0
    assert np.all((mult > 0) & (mult <= 1))


def test_current_cyclic_relabel(mesh32):
    c = make_shape("ellipse", (1.2, 0.6), 60)
    a = singular_current(c, mesh32)
    b = singular_current(c.roll(17), mesh32)
    assert np.max(np.abs(a - b)) <= 1e-13 * np.max(np.abs(a))


def test_current_of_collapsed_curve_is_zero(mesh16):
    pts = np.full((5, 2), 2.5)
    assert not np.any(singular_current(pts, mesh16))


def test_reversed_orientation_negates_current(mesh32):
    # reversal moves each edge's weight to its other endpoint, so negation holds
    # exactly for the total and to first order in edge length for the field
    defects = []
    for n_p in (80, 160, 320):
        c = make_shape("rounded_rectangle", (2.0, 1.4, 0.3), n_p)
        a = singular_current(c, mesh32)
        b = singular_current(c.reversed(), mesh32)
        np.testing.assert_allclose(b.sum(axis=(0, 1)), -a.sum(axis=(0, 1)), atol=1e-13)
        defects.append(np.max(np.abs(a + b)) / np.max(np.abs(a)))
    ratios = np.array(defects[:-1]) / np.array(defects[1:])
    assert np.all((ratios > 1.8) & (ratios < 2.2))


def test_current_linear_in_edges(mesh32, rng):
    c = make_shape("ellipse", (1.2, 0.6), 40)
    E = edge_vectors(c)
    np.testing.assert_allclose(spread_to_mesh(2.5 * E, c.points, mesh32),
                               2.5 * singular_current(c, mesh32), rtol=1e-14, atol=1e-16)


def test_mismatch_identical_is_exact_zero(mesh32):
    c = make_shape("ellipse", (1.2, 0.6), 50)
    assert mismatch(c, c, K, mesh32) == 0.0
    assert not np.any(mismatch_gradient(c, c, K, mesh32))


def test_mismatch_relabel_invariance(mesh32):
    a = make_shape("circle", 0.8, 70)
    b = make_shape("ellipse", (1.2, 0.6), 55)
    ref = mismatch(a, b, K, mesh32)
    assert ref > 0
    assert mismatch(a.roll(9), a, K, mesh32) <= 1e-13 * ref
    assert abs(mismatch(a.roll(9), b.roll(4), K, mesh32) - ref) <= 1e-13 * ref


def test_mismatch_symmetric_nonnegative(rng, mesh32):
    for _ in range(10):
        a = ParticleCurve(rng.uniform(1.5, 4.5, (rng.integers(3, 30), 2)))
        b = ParticleCurve(rng.uniform(1.5, 4.5, (rng.integers(3, 30), 2)))
        fab = mismatch(a, b, K, mesh32)
        assert fab >= 0
        assert fab == pytest.approx(mismatch(b, a, K, mesh32), rel=1e-13)


def test_translated_circle_against_dense_kernel():
    mesh = MeshConfig.square(16)
    a = make_shape("circle", 0.8, 24)
    b = make_shape("circle", 0.8, 24, center=(math.pi + 0.5, math.pi))
    f = mismatch(a, b, K, mesh)
    assert f > 0
    dense = oracles.dense_mismatch(a.points, b.points, 16, mesh.Lx, K.alpha, K.power)
    assert f == pytest.approx(dense, rel=1e-10)


def test_gradient_matches_finite_differences(mesh32, rng):
    a = make_shape("circle", 0.8, 15).points + 0.05 * rng.standard_normal((15, 2))
    b = make_shape("ellipse", (1.1, 0.6), 21)
    g = mismatch_gradient(a, b, K, mesh32)
    fd = oracles.finite_difference_gradient(lambda x: mismatch(x.reshape(-1, 2), b, K, mesh32),
                                            a.ravel(), eps=1e-6).reshape(-1, 2)
    assert np.max(np.abs(g - fd)) <= 1e-6 * np.max(np.abs(fd))


def test_translation_gradient_vanishes_at_optimum(mesh32):
    a = make_shape("ellipse", (1.0, 0.5), 40)
    b = make_shape("circle", 0.7, 40, center=(math.pi + 0.2, math.pi))

    def f(t):
        return mismatch(a.points + [t, 0.0], b, K, mesh32)

    t_opt = minimize_scalar(f, bracket=(-0.2, 0.3), tol=1e-12).x
    g = mismatch_gradient(a.points + [t_opt, 0.0], b, K, mesh32)
    g0 = mismatch_gradient(a.points, b, K, mesh32)
    assert abs(g[:, 0].sum()) <= 1e-5 * abs(g0[:, 0].sum())
