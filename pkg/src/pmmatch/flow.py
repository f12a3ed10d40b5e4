"""Symplectic Euler integration of the particle-mesh geodesic equations.

One step maps ``(Q^n, P^n, J^n)`` to ``(Q^{n+1}, P^{n+1}, J^{n+1})`` by solving

    dx*dy * A u = sum_b P^{n+1}_b psi_k(Q^n_b)
    P^{n+1} = P^n - dt * G(u, Q^n)^T P^{n+1}
    Q^{n+1} = Q^n + dt * u(Q^n)
    J^{n+1} = (I + dt * G(u, Q^n)) J^n

where ``A`` is the metric operator and ``G_b = sum_k u_k (x) grad psi_k(Q_b)``
is the interpolated velocity gradient at each particle. The implicit pair
``(P^{n+1}, u)`` is found by fixed-point iteration.
"""
from dataclasses import dataclass, field

import numpy as np

from .mesh import (MeshConfig, NormOperator, apply_metric, interp_jacobian,
                   interp_to_points, invert_metric, norm_squared, spread_to_mesh)

TOL_FP = 1e-13
MAX_ITER_FP = 500


class ConvergenceError(RuntimeError):
    """The implicit step did not converge; usually the time step is too large."""

    def __init__(self, residual, iterations, step_index=None):
        where = "" if step_index is None else f" at step {step_index}"
        super().__init__(f"fixed-point iteration did not converge{where} after "
                         f"{iterations} iterations (residual {residual:.3e}); reduce dt")
        self.residual = residual
        self.iterations = iterations
        self.step_index = step_index


@dataclass(frozen=True)
class TimeGrid:
    N: int = 20

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 1:
            raise ValueError(f"number of steps must be a positive integer, got {self.N}")

    @property
    def dt(self):
        return 1.0 / self.N

    def step_of(self, t):
        """Nearest step index for a time in ``[0, 1]``."""
        if not 0.0 <= t <= 1.0:
            raise ValueError(f"time {t} outside [0, 1]")
        return int(round(t * self.N))


@dataclass
class PhaseState:
    Q: np.ndarray
    P: np.ndarray
    J: np.ndarray = None

    def __post_init__(self):
        self.Q = np.array(self.Q, dtype=float).reshape(-1, 2)
        self.P = np.array(self.P, dtype=float).reshape(-1, 2)
        if self.Q.shape != self.P.shape:
            raise ValueError(f"Q and P shapes differ: {self.Q.shape} vs {self.P.shape}")
        if self.J is None:
            self.J = np.broadcast_to(np.eye(2), (len(self.Q), 2, 2)).copy()
        else:
            self.J = np.array(self.J, dtype=float).reshape(-1, 2, 2)


@dataclass
class Trajectory:
    """Stored forward solution; ``velocities[n]`` is ``u^{n+1}``."""

    Q: np.ndarray           # (N+1, n, 2)
    P: np.ndarray           # (N+1, n, 2)
    J: np.ndarray           # (N+1, n, 2, 2)
    velocities: np.ndarray  # (N, mx, my, 2)
    hamiltonians: np.ndarray  # (N+1,)
    mesh: MeshConfig
    op: NormOperator
    grid: TimeGrid
    iterations: np.ndarray = field(default=None)

    @property
    def N(self):
        return self.grid.N

    @property
    def states(self):
        return [self.state(n) for n in range(self.N + 1)]

    def state(self, n):
        return PhaseState(self.Q[n], self.P[n], self.J[n])

    @property
    def final(self):
        return self.state(self.N)


def velocity_from_momentum(P, Q, op, mesh):
    """Solve the discrete momentum map for the mesh velocity."""
    m = spread_to_mesh(P, Q, mesh)
    return invert_metric(m, op, mesh) / mesh.cell_area


def _solve_2x2(M, rhs):
    # Batched 2x2 solve via the explicit inverse; M (n, 2, 2), rhs (n, 2).
    a, b = M[:, 0, 0], M[:, 0, 1]
    c, d = M[:, 1, 0], M[:, 1, 1]
    det = a * d - b * c
    x0 = (d * rhs[:, 0] - b * rhs[:, 1]) / det
    x1 = (a * rhs[:, 1] - c * rhs[:, 0]) / det
    return np.stack([x0, x1], axis=1)


def _step_core(Q, P, dt, op, mesh, tol_fp, max_iter):
    """Converged implicit solve; returns ``(P_new, u, G, iterations)``."""
    eye = np.eye(2)
    Pk = P
    tol = max(tol_fp, 64 * np.finfo(float).eps * float(np.max(np.abs(P), initial=0.0)))
    delta = np.inf
    for it in range(1, max_iter + 1):
        u = velocity_from_momentum(Pk, Q, op, mesh)
        G = interp_jacobian(u, Q, mesh)
        # the momentum equation is linear in P_new for fixed u; solve it exactly
        P_new = _solve_2x2(eye + dt * np.swapaxes(G, 1, 2), P)
        delta = float(np.max(np.abs(P_new - Pk), initial=0.0))
        if not np.isfinite(delta):
            break
        if delta <= tol:
            return P_new, u, G, it
        Pk = P_new
    raise ConvergenceError(delta, it)


def evolve_jacobian(J, Q, u, dt, mesh, G=None):
    """Linearised position update: ``J^{n+1} = (I + dt G(u, Q)) J^n``."""
    if G is None:
        G = interp_jacobian(u, Q, mesh)
    return J + dt * np.einsum("nij,njk->nik", G, J)


def step(state, dt, op, mesh, tol_fp=TOL_FP, max_iter=MAX_ITER_FP):
    """Advance one symplectic Euler step; returns ``(new_state, u^{n+1})``."""
    Q = state.Q
    P_new, u, G, _ = _step_core(Q, state.P, dt, op, mesh, tol_fp, max_iter)
    Q_new = Q + dt * interp_to_points(u, Q, mesh)
    J_new = evolve_jacobian(state.J, Q, u, dt, mesh, G=G)
    return PhaseState(Q_new, P_new, J_new), u


def hamiltonian(P, Q, op, mesh):
    """Half the squared norm of the velocity generated by ``(P, Q)``."""
    return 0.5 * norm_squared(velocity_from_momentum(P, Q, op, mesh), op, mesh)


def integrate(Q0, P0, grid, op, mesh, tol_fp=TOL_FP, max_iter=MAX_ITER_FP):
    """Integrate from ``t = 0`` to ``t = 1`` in ``grid.N`` steps with ``J^0 = I``.

    ``hamiltonians[0]`` is ``H(P^0, Q^0)``; ``hamiltonians[n+1]`` is half the
    squared norm of ``u^{n+1}``, i.e. ``H`` evaluated on ``(P^{n+1}, Q^n)``
    as staggered by the scheme.
    """
    Q0 = np.array(Q0, dtype=float).reshape(-1, 2)
    P0 = np.array(P0, dtype=float).reshape(-1, 2)
    if Q0.shape != P0.shape:
        raise ValueError(f"Q0 and P0 shapes differ: {Q0.shape} vs {P0.shape}")
    N, dt, n = grid.N, grid.dt, len(Q0)
    Q = np.empty((N + 1, n, 2))
    P = np.empty((N + 1, n, 2))
    J = np.empty((N + 1, n, 2, 2))
    vel = np.empty((N,) + mesh.shape)
    H = np.empty(N + 1)
    iters = np.zeros(N, dtype=int)
    Q[0], P[0], J[0] = Q0, P0, np.eye(2)
    H[0] = hamiltonian(P0, Q0, op, mesh)
    for k in range(N):
        try:
            P[k + 1], u, G, iters[k] = _step_core(Q[k], P[k], dt, op, mesh, tol_fp, max_iter)
        except ConvergenceError as exc:
            raise ConvergenceError(exc.residual, exc.iterations, step_index=k) from None
        Q[k + 1] = Q[k] + dt * interp_to_points(u, Q[k], mesh)
        J[k + 1] = evolve_jacobian(J[k], Q[k], u, dt, mesh, G=G)
        vel[k] = u
        H[k + 1] = 0.5 * norm_squared(u, op, mesh)
    return Trajectory(Q, P, J, vel, H, mesh, op, grid, iters)


def relabelling_momentum(state):
    """``J_b^T P_b`` per particle, conserved exactly by the scheme."""
    return np.einsum("nji,nj->ni", state.J, state.P)


def tangential_component(state, dQ0):
    """``P_b . (J_b dQ0_b)``: momentum along the transported initial edge."""
    transported = np.einsum("nij,nj->ni", state.J, np.asarray(dQ0, dtype=float))
    return np.einsum("ni,ni->n", state.P, transported)


def transported_edges(traj, dQ0):
    """``J^n_b dQ0_b`` for every step, shape ``(N+1, n, 2)``."""
    return np.einsum("tnij,nj->tni", traj.J, np.asarray(dQ0, dtype=float))


def transport_points(aux, traj):
    """Advect passive points through the stored velocities, ``(N+1, m, 2)``.

    Uses the same explicit update as the curve particles and does not feed
    back into the dynamics.
    """
    X = np.array(aux, dtype=float).reshape(-1, 2)
    out = np.empty((traj.N + 1,) + X.shape)
    out[0] = X
    dt = traj.grid.dt
    for k in range(traj.N):
        out[k + 1] = out[k] + dt * interp_to_points(traj.velocities[k], out[k], traj.mesh)
    return out


def conservation_series(traj, dQ0=None):
    """Per-step diagnostics.

    Returns a dict of arrays of length ``N+1``: ``hamiltonian``,
    ``relabel_drift`` (max over particles of ``|J^T P - P^0|`` divided by
    ``max |P^0|``) and, when ``dQ0`` is given, ``tangential_max``
    (max ``|P . J dQ0|``).
    """
    JtP = np.einsum("tnji,tnj->tni", traj.J, traj.P)
    scale = float(np.max(np.linalg.norm(traj.P[0], axis=1), initial=0.0))
    drift = np.max(np.linalg.norm(JtP - JtP[0], axis=2), axis=1)
    out = {
        "hamiltonian": traj.hamiltonians.copy(),
        "relabel_drift": drift / scale if scale > 0 else drift,
    }
    if dQ0 is not None:
        edges = transported_edges(traj, dQ0)
        out["tangential_max"] = np.max(np.abs(np.einsum("tni,tni->tn", traj.P, edges)), axis=1)
    return out


def conservation_summary(traj, dQ0=None):
    """Scalar maxima of :func:`conservation_series` plus Hamiltonian drift."""
    series = conservation_series(traj, dQ0)
    H = series["hamiltonian"]
    summary = {
        "relabel_drift_max": float(np.max(series["relabel_drift"])),
        "hamiltonian_drift_max": float(np.max(np.abs(H - H[0]))),
        "hamiltonian_drift_rel": float(np.max(np.abs(H - H[0])) / H[0]) if H[0] > 0 else 0.0,
    }
    if dQ0 is not None:
        summary["tangential_max"] = float(np.max(series["tangential_max"]))
    return summary


def step_residuals(Q, P_old, P_new, u, dt, op, mesh):
    """Residuals of the momentum map and momentum update for a stored step.

    Returns ``(mom_map, mom_update)``: max-norm residuals, the first relative
    to the largest spread momentum on the mesh.
    """
    lhs = mesh.cell_area * apply_metric(u, op, mesh)
    rhs = spread_to_mesh(P_new, Q, mesh)
    scale = max(float(np.max(np.abs(rhs))), np.finfo(float).tiny)
    mom_map = float(np.max(np.abs(lhs - rhs))) / scale
    G = interp_jacobian(u, Q, mesh)
    update = P_new + dt * np.einsum("nji,nj->ni", G, P_new) - P_old
    return mom_map, float(np.max(np.abs(update)))
