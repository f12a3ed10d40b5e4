"""Reference problems shared by unit and acceptance tests."""
import numpy as np

from pmmatch import KernelOperator, MeshConfig, NormOperator, TimeGrid, make_shape
from pmmatch.shape import edge_normals, edge_vectors
from pmmatch.shooting import ShootingProblem


def reference_flow(amp=0.02, m=64, n_p=100):
    """Circle r=0.8 pushed by a cos(2 theta) normal momentum."""
    mesh = MeshConfig.square(m)
    curve = make_shape("circle", 0.8, n_p)
    theta = 2 * np.pi * np.arange(n_p) / n_p
    P0 = amp * np.cos(2 * theta)[:, None] * edge_normals(curve)
    return mesh, NormOperator(0.4, 2), curve.points, P0, edge_vectors(curve)


def random_data(rng, n=50, noise=0.05, scale=0.01):
    theta = np.sort(rng.uniform(0, 2 * np.pi, n))
    Q = np.pi + np.stack([np.cos(theta), np.sin(theta)], axis=1)
    Q += noise * rng.standard_normal(Q.shape)
    return Q, scale * rng.standard_normal(Q.shape)


def ellipse_problem(m=64, n_p=100, N=20, **kw):
    mesh = MeshConfig.square(m)
    return ShootingProblem(make_shape("circle", 0.8, n_p), make_shape("ellipse", (1.2, 0.6), n_p),
                           mesh=mesh, norm_op=NormOperator(0.4, 2), kernel=KernelOperator(0.4, 2),
                           grid=TimeGrid(N), **kw)


def small_problem(m=32, n_p=20, N=5, target=("ellipse", (1.0, 0.7)), **kw):
    mesh = MeshConfig.square(m)
    return ShootingProblem(make_shape("circle", 0.8, n_p), make_shape(target[0], target[1], n_p + 3),
                           mesh=mesh, norm_op=NormOperator(0.4, 2), kernel=KernelOperator(0.4, 2),
                           grid=TimeGrid(N), **kw)
