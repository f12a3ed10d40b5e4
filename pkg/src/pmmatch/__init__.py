"""Particle-mesh geodesic shooting for diffeomorphic matching of planar curves."""
from ._backend import BACKEND
from .currents import KernelOperator, mismatch, mismatch_gradient, singular_current
from .flow import (ConvergenceError, PhaseState, TimeGrid, Trajectory, evolve_jacobian,
                   hamiltonian, integrate, relabelling_momentum, step, tangential_component,
                   transport_points, velocity_from_momentum)
from .mesh import (MeshConfig, NormOperator, apply_metric, bspline_weight, bspline_weight_deriv,
                   interp_to_points, invert_metric, norm_squared, spread_to_mesh)
from .shape import (ParticleCurve, edge_vectors, make_shape, outward_normals, read_curve,
                    write_curve)
from .shooting import OptimResult, ShootingProblem, gradient, minimize, objective

__version__ = "0.1.0"
