"""Geodesic shooting: optimise initial normal momenta to match a target curve.

The control is one scalar per source particle, ``P^0_b = p_b n_b`` with
``n_b`` the outward unit normal to the edge ``Q_b - Q_{b-1}``, so the initial
momentum has no tangential component and the scheme keeps it that way. Gradients come from the discrete adjoint of
the converged implicit steps (implicit-function differentiation), so they are
exact up to the fixed-point tolerance no matter how many iterations each
forward solve took.
"""
import logging
from dataclasses import dataclass, field

import numpy as np

from .currents import KernelOperator, mismatch_current, mismatch_gradient_current, singular_current
from .flow import (MAX_ITER_FP, TOL_FP, ConvergenceError, TimeGrid, Trajectory, _solve_2x2,
                   conservation_summary, integrate)
from .mesh import (MeshConfig, NormOperator, apply_metric, interp_hessian, interp_jacobian,
                   interp_to_points, invert_metric, spread_directional, spread_to_mesh)
from .shape import ParticleCurve, edge_normals, edge_vectors

log = logging.getLogger(__name__)

METHODS = ("ncg", "newton-cg")


@dataclass
class ShootingProblem:
    source: ParticleCurve
    target: ParticleCurve
    mesh: MeshConfig = field(default_factory=MeshConfig)
    norm_op: NormOperator = field(default_factory=NormOperator)
    kernel: KernelOperator = field(default_factory=KernelOperator)
    grid: TimeGrid = field(default_factory=TimeGrid)
    method: str = "ncg"
    max_iters: int = 200
    grad_tol: float = 1e-12
    grad_rtol: float = 1e-3
    sigma: float = None
    tol_fp: float = TOL_FP
    max_iter_fp: int = MAX_ITER_FP

    def __post_init__(self):
        if not isinstance(self.source, ParticleCurve):
            self.source = ParticleCurve(self.source)
        if not isinstance(self.target, ParticleCurve):
            self.target = ParticleCurve(self.target)
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}, got {self.method!r}")
        if int(self.max_iters) != self.max_iters or self.max_iters < 0:
            raise ValueError(f"max_iters must be a non-negative integer, got {self.max_iters}")
        if self.grad_tol < 0 or self.grad_rtol < 0:
            raise ValueError("gradient tolerances must be non-negative")
        if self.sigma is not None and not self.sigma > 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        self.normals = edge_normals(self.source)
        self.source_edges = edge_vectors(self.source)
        self.target_current = singular_current(self.target, self.mesh)

    @property
    def n_controls(self):
        return len(self.source)

    def gradient_threshold(self, g0_norm):
        """Stop once the gradient norm is at or below this value."""
        return max(self.grad_tol, self.grad_rtol * g0_norm)

    @property
    def mismatch_weight(self):
        return 1.0 if self.sigma is None else self.sigma ** -2

    def initial_momentum(self, control):
        control = np.asarray(control, dtype=float)
        if control.shape != (self.n_controls,):
            raise ValueError(f"control must have shape ({self.n_controls},), got {control.shape}")
        return control[:, None] * self.normals

    def forward(self, control):
        return integrate(self.source.points, self.initial_momentum(control), self.grid,
                         self.norm_op, self.mesh, tol_fp=self.tol_fp, max_iter=self.max_iter_fp)

    def evaluate(self, traj):
        """Objective value of a forward trajectory."""
        value = self.mismatch_weight * mismatch_current(traj.Q[-1], self.target_current,
                                                        self.kernel, self.mesh)
        if self.sigma is not None:
            # sum_n dt * ||u^{n+1}||^2 = sum_n dt * 2 H^{n+1}
            value += 2.0 * self.grid.dt * float(np.sum(traj.hamiltonians[1:]))
        return value


def objective(control, prob):
    """Return ``(value, trajectory)`` for a control vector."""
    traj = prob.forward(control)
    return prob.evaluate(traj), traj


def _adjoint_step(Q, P_new, u, dt, Qbar, Pbar, ubar_extra, op, mesh, tol):
    """Pull ``(Qbar, Pbar)`` at step ``n+1`` back to step ``n``."""
    area = mesh.cell_area
    G = interp_jacobian(u, Q, mesh)
    M = np.eye(2) + dt * G
    Qbar_prev = Qbar + dt * np.einsum("nji,nj->ni", G, Qbar)
    ubar = dt * spread_to_mesh(Qbar, Q, mesh)
    if ubar_extra is not None:
        ubar = ubar + ubar_extra

    lam_u = ubar
    w = invert_metric(lam_u, op, mesh) / area
    lam_P = _solve_2x2(M, Pbar + interp_to_points(w, Q, mesh))
    scale = float(np.max(np.abs(lam_P), initial=0.0))
    if scale > 0.0:
        for _ in range(MAX_ITER_FP):
            lam_u = ubar - dt * spread_directional(P_new, lam_P, Q, mesh)
            w = invert_metric(lam_u, op, mesh) / area
            lam_next = _solve_2x2(M, Pbar + interp_to_points(w, Q, mesh))
            delta = float(np.max(np.abs(lam_next - lam_P)))
            lam_P = lam_next
            if delta <= tol * max(scale, float(np.max(np.abs(lam_P)))):
                break
        else:
            log.warning("adjoint fixed point stalled at relative change %.2e", delta / scale)
        lam_u = ubar - dt * spread_directional(P_new, lam_P, Q, mesh)
        w = invert_metric(lam_u, op, mesh) / area

    # position sensitivities of the momentum map and of the momentum update
    Qbar_prev += np.einsum("nji,nj->ni", interp_jacobian(w, Q, mesh), P_new)
    H = interp_hessian(u, Q, mesh)
    Qbar_prev -= dt * np.einsum("na,nabc,nc->nb", P_new, H, lam_P)
    return Qbar_prev, lam_P


def adjoint(traj, Qbar_final, prob):
    """Reverse sweep; returns ``(Qbar^0, Pbar^0)`` for terminal cotangent ``Qbar^N``."""
    mesh, op, dt = traj.mesh, traj.op, traj.grid.dt
    Qbar = np.array(Qbar_final, dtype=float)
    Pbar = np.zeros_like(Qbar)
    penalised = prob is not None and prob.sigma is not None
    for k in range(traj.N - 1, -1, -1):
        u = traj.velocities[k]
        extra = 2.0 * dt * mesh.cell_area * apply_metric(u, op, mesh) if penalised else None
        Qbar, Pbar = _adjoint_step(traj.Q[k], traj.P[k + 1], u, dt, Qbar, Pbar, extra,
                                   op, mesh, 1e-14)
    return Qbar, Pbar


def value_and_gradient(control, prob):
    """Return ``(value, gradient, trajectory)``."""
    traj = prob.forward(control)
    value = prob.evaluate(traj)
    Qbar = prob.mismatch_weight * mismatch_gradient_current(
        traj.Q[-1], prob.target_current, prob.kernel, prob.mesh)
    _, Pbar = adjoint(traj, Qbar, prob)
    grad = np.einsum("ni,ni->n", Pbar, prob.normals)
    return value, grad, traj


def gradient(control, prob):
    return value_and_gradient(control, prob)[1]


@dataclass
class OptimResult:
    control: np.ndarray
    objective_history: list
    grad_norm_history: list
    trajectory: Trajectory
    converged: bool
    iterations: int
    n_evaluations: int
    message: str
    diagnostics: dict = field(default_factory=dict)

    @property
    def initial_objective(self):
        return self.objective_history[0]

    @property
    def final_objective(self):
        return self.objective_history[-1]

    @property
    def reduction_factor(self):
        if self.final_objective == 0.0:
            return float("inf") if self.initial_objective > 0 else 1.0
        return self.initial_objective / self.final_objective


class _Evaluator:
    """Caches the last evaluation so line searches and callbacks share work."""

    def __init__(self, prob):
        self.prob = prob
        self.count = 0
        self._key = None
        self._val = None

    def __call__(self, x):
        key = np.asarray(x, dtype=float).tobytes()
        if key != self._key:
            self.count += 1
            value, grad, traj = value_and_gradient(np.asarray(x, dtype=float), self.prob)
            self._key, self._val = key, (value, grad, traj)
        return self._val

    def trial(self, x):
        """Like calling the evaluator, but an unstable forward solve counts as +inf."""
        try:
            return self(x)
        except ConvergenceError as exc:
            log.info("trial step rejected: %s", exc)
            return np.inf, None, None


def _line_search(ev, x, f0, g0, d, alpha0, c1=1e-4, max_steps=30):
    """Backtracking with quadratic/cubic interpolation under the Armijo condition."""
    slope = float(g0 @ d)
    alpha, prev = alpha0, None
    for _ in range(max_steps):
        f, g, traj = ev.trial(x + alpha * d)
        if np.isfinite(f) and f <= f0 + c1 * alpha * slope:
            return alpha, f, g, traj
        if not np.isfinite(f):
            new = 0.1 * alpha
        elif prev is None:
            new = -slope * alpha ** 2 / (2.0 * (f - f0 - slope * alpha))
        else:
            a_p, f_p = prev
            r1 = f - f0 - slope * alpha
            r2 = f_p - f0 - slope * a_p
            a = (r1 / alpha ** 2 - r2 / a_p ** 2) / (alpha - a_p)
            b = (-a_p * r1 / alpha ** 2 + alpha * r2 / a_p ** 2) / (alpha - a_p)
            if a == 0.0:
                new = -slope / (2.0 * b)
            else:
                disc = max(b * b - 3.0 * a * slope, 0.0)
                new = (-b + np.sqrt(disc)) / (3.0 * a)
        prev = (alpha, f) if np.isfinite(f) else None
        alpha = float(np.clip(new, 0.1 * alpha, 0.5 * alpha)) if np.isfinite(new) else 0.1 * alpha
    return None


def _ncg(prob, x0, callback):
    ev = _Evaluator(prob)
    x = np.array(x0, dtype=float)
    f, g, traj = ev(x)
    fh, gh = [f], [float(np.linalg.norm(g))]
    g_tol = prob.gradient_threshold(gh[0])
    d = -g
    alpha_prev = slope_prev = None
    converged, message, it = False, "maximum iterations reached", 0
    while it < prob.max_iters:
        if gh[-1] <= g_tol:
            converged, message = True, "gradient tolerance reached"
            break
        slope = float(g @ d)
        if slope >= 0.0:
            d, slope = -g, -float(g @ g)
        if alpha_prev is None:
            # step predicted to remove the objective under a linear model
            alpha0 = min(f / -slope, 1.0 / np.max(np.abs(d))) if f > 0 else 1.0 / np.max(np.abs(d))
        else:
            alpha0 = min(2.0 * alpha_prev * slope_prev / slope, 10.0 * alpha_prev)
        found = _line_search(ev, x, f, g, d, alpha0)
        if found is None and not np.array_equal(d, -g):
            d, slope = -g, -float(g @ g)
            found = _line_search(ev, x, f, g, d, 1.0 / np.max(np.abs(d)))
        if found is None:
            message = "line search failed"
            break
        alpha, f_new, g_new, traj = found
        x = x + alpha * d
        it += 1
        # Polak-Ribiere with automatic restart (beta clipped at zero)
        beta = max(0.0, float(g_new @ (g_new - g)) / float(g @ g))
        if it % len(x) == 0:
            beta = 0.0
        alpha_prev, slope_prev = alpha, slope
        f_old, f, g = f, f_new, g_new
        d = -g + beta * d
        fh.append(f)
        gh.append(float(np.linalg.norm(g)))
        if callback is not None:
            callback(it, f, gh[-1])
        if f_old - f <= 1e-15 * max(abs(f_old), 1e-300):
            converged, message = True, "objective stalled"
            break
    return x, fh, gh, traj, converged, it, ev.count, message


def _newton_cg(prob, x0, callback):
    from scipy.optimize import minimize as sp_minimize

    ev = _Evaluator(prob)
    f, g, traj = ev(x0)
    fh, gh = [f], [float(np.linalg.norm(g))]
    g_tol = prob.gradient_threshold(gh[0])
    if gh[0] <= prob.grad_tol:
        return np.array(x0, dtype=float), fh, gh, traj, True, 0, ev.count, "gradient tolerance reached"

    def fun(x):
        value, grad, _ = ev.trial(x)
        return (value, grad) if grad is not None else (np.inf, np.zeros_like(x))

    def hessp(x, v):
        # forward difference of the adjoint gradient along v
        _, g0, _ = ev(x)
        eps = 1e-7 * (1.0 + np.linalg.norm(x)) / max(np.linalg.norm(v), 1e-300)
        _, g1, _ = value_and_gradient(x + eps * v, prob)
        ev.count += 1
        return (g1 - g0) / eps

    def cb(xk):
        value, grad, _ = ev(xk)
        fh.append(value)
        gh.append(float(np.linalg.norm(grad)))
        if callback is not None:
            callback(len(fh) - 1, value, gh[-1])

    res = sp_minimize(fun, np.asarray(x0, dtype=float), jac=True, hessp=hessp, method="Newton-CG",
                      callback=cb, options={"maxiter": prob.max_iters, "xtol": 1e-12})
    value, grad, traj = ev(res.x)
    converged = bool(res.success) or gh[-1] <= g_tol
    return res.x, fh, gh, traj, converged, int(res.nit), ev.count, str(res.message)


def minimize(prob, control=None, callback=None):
    """Minimise the shooting objective starting from ``control`` (zeros by default)."""
    x0 = np.zeros(prob.n_controls) if control is None else np.asarray(control, dtype=float)
    runner = _ncg if prob.method == "ncg" else _newton_cg
    x, fh, gh, traj, converged, it, nev, message = runner(prob, x0, callback)
    diag = conservation_summary(traj, prob.source_edges)
    return OptimResult(x, fh, gh, traj, converged, it, nev, message, diag)
