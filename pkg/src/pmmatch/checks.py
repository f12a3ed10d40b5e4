"""Quick invariant suite behind ``pmmatch check``; runs in a few seconds."""
import numpy as np

from .currents import KernelOperator, mismatch
from .flow import TimeGrid, conservation_summary, integrate
from .mesh import (MeshConfig, NormOperator, apply_metric, interp_to_points, invert_metric,
                   spread_to_mesh)
from .shape import edge_vectors, make_shape
from .shooting import ShootingProblem, objective, value_and_gradient


def _rel(a, b):
    return abs(a - b) / max(abs(a), abs(b), 1e-300)


def run_checks(seed=0):
    """Return a list of ``(name, passed, detail)`` tuples."""
    rng = np.random.default_rng(seed)
    mesh = MeshConfig.square(16)
    op = NormOperator(0.4, 2)
    kernel = KernelOperator(0.4, 2)
    out = []

    Q = rng.uniform(0, mesh.Lx, (7, 2))
    P = rng.standard_normal((7, 2))
    w = rng.standard_normal(mesh.shape)
    lhs = float(np.vdot(spread_to_mesh(P, Q, mesh), w))
    rhs = float(np.sum(P * interp_to_points(w, Q, mesh)))
    err = _rel(lhs, rhs)
    out.append(("spread/interp adjointness", err <= 1e-12, f"rel err {err:.1e}"))

    ones = np.ones(mesh.shape)
    err = float(np.max(np.abs(interp_to_points(ones, Q, mesh) - 1.0)))
    out.append(("partition of unity", err <= 1e-13, f"max err {err:.1e}"))

    back = invert_metric(apply_metric(w, op, mesh), op, mesh)
    err = float(np.max(np.abs(back - w)) / np.max(np.abs(w)))
    out.append(("metric roundtrip", err <= 1e-12, f"rel err {err:.1e}"))

    src = make_shape("circle", (0.8,), 12)
    tgt = make_shape("ellipse", (1.0, 0.6), 15)
    p = 0.05 * rng.standard_normal(12)
    prob = ShootingProblem(src, tgt, mesh=mesh, norm_op=op, kernel=kernel, grid=TimeGrid(4))
    traj = integrate(src.points, prob.initial_momentum(p), prob.grid, op, mesh)
    diag = conservation_summary(traj, edge_vectors(src))
    scale = float(np.max(np.abs(p)) * np.max(np.linalg.norm(edge_vectors(src), axis=1)))
    out.append(("J^T P conservation", diag["relabel_drift_max"] <= 1e-10,
                f"max rel drift {diag['relabel_drift_max']:.1e}"))
    out.append(("normal momentum stays normal", diag["tangential_max"] <= 1e-10 * scale,
                f"max tangential {diag['tangential_max']:.1e}"))

    f_same = mismatch(src, src.roll(5), kernel, mesh)
    out.append(("reparameterisation invariance", abs(f_same) <= 1e-13, f"f = {f_same:.1e}"))

    _, g, _ = value_and_gradient(p, prob)
    eps = 1e-6
    fd = np.array([(objective(p + eps * e, prob)[0] - objective(p - eps * e, prob)[0]) / (2 * eps)
                   for e in np.eye(len(p))])
    err = float(np.max(np.abs(g - fd)) / np.max(np.abs(fd)))
    out.append(("adjoint gradient vs finite differences", err <= 1e-6, f"rel err {err:.1e}"))
    return out
