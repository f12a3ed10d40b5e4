"""Command-line front end.

Subcommands: ``match``, ``forward``, ``deform-grid``, ``check`` and
``default-config``. Exit codes: 0 success, 1 usage/config/IO error,
2 numerical failure, 3 optimiser did not converge (results still written).
"""
import argparse
import json
import logging
import math
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import __version__
from ._backend import BACKEND
from .config import ConfigError, default_config_text, load_config
from .flow import (ConvergenceError, TimeGrid, Trajectory, conservation_series,
                   conservation_summary, integrate, transport_points, transported_edges)
from .mesh import MeshConfig, NormOperator
from .shape import edge_vectors, read_vectors
from .shooting import minimize

log = logging.getLogger("pmmatch")

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC, EXIT_NOT_CONVERGED = 0, 1, 2, 3
TRAJ_DIR = "trajectory"


def _atomic_write(path, write):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as fh:
            write(fh)
        os.replace(tmp, path)
    except BaseException:
        os.unlink(tmp)
        raise


def write_text(path, text):
    _atomic_write(path, lambda fh: fh.write(text.encode()))


def write_csv(path, header, rows):
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(v if isinstance(v, str) else
                              (str(v) if isinstance(v, (int, np.integer)) else f"{v:.17g}")
                              for v in row))
    write_text(path, "\n".join(lines) + "\n")


def write_npy(path, array):
    _atomic_write(path, lambda fh: np.save(fh, np.ascontiguousarray(array)))


def _tag(t):
    return f"{t:g}"


def write_snapshots(outdir, traj, dQ0, times):
    edges = transported_edges(traj, dQ0)
    for t in times:
        n = traj.grid.step_of(t)
        write_csv(outdir / f"curve_t{_tag(t)}.csv", ("x", "y"), traj.Q[n])
        write_csv(outdir / f"momentum_t{_tag(t)}.csv", ("px", "py"), traj.P[n])
        write_csv(outdir / f"dQ_t{_tag(t)}.csv", ("dx", "dy"), edges[n])


def write_conservation(outdir, traj, dQ0):
    series = conservation_series(traj, dQ0)
    rows = [(n, series["hamiltonian"][n], series["relabel_drift"][n], series["tangential_max"][n])
            for n in range(traj.N + 1)]
    write_csv(outdir / "conservation.csv",
              ("step", "hamiltonian", "relabel_drift", "tangential_max"), rows)


def write_trajectory(outdir, traj):
    """Velocity fields, one ``.npy`` per step, plus a plain-text header."""
    tdir = outdir / TRAJ_DIR
    mesh = traj.mesh
    header = {
        "steps": traj.N, "mx": mesh.mx, "my": mesh.my, "Lx": repr(mesh.Lx), "Ly": repr(mesh.Ly),
        "dx": repr(mesh.dx), "dy": repr(mesh.dy), "dt": repr(traj.grid.dt),
        "alpha": repr(traj.op.alpha), "power": traj.op.power, "dtype": "float64",
    }
    write_text(tdir / "header.txt", "".join(f"{k} {v}\n" for k, v in header.items()))
    for k in range(traj.N):
        write_npy(tdir / f"u_{k + 1:04d}.npy", traj.velocities[k])
    write_npy(tdir / "Q.npy", traj.Q)


def read_trajectory(outdir):
    """Load what :func:`write_trajectory` stored, as a velocity-only Trajectory."""
    tdir = Path(outdir) / TRAJ_DIR
    header_path = tdir / "header.txt"
    if not header_path.exists():
        raise FileNotFoundError(f"no trajectory header at {header_path}")
    header = dict(line.split(None, 1) for line in header_path.read_text().splitlines() if line)
    N, mx, my = int(header["steps"]), int(header["mx"]), int(header["my"])
    mesh = MeshConfig(mx, my, float(header["Lx"]), float(header["Ly"]))
    vel = np.empty((N, mx, my, 2))
    for k in range(N):
        path = tdir / f"u_{k + 1:04d}.npy"
        if not path.exists():
            raise FileNotFoundError(f"missing velocity file {path}")
        vel[k] = np.load(path)
    Q = np.load(tdir / "Q.npy") if (tdir / "Q.npy").exists() else None
    op = NormOperator(float(header["alpha"]), int(header["power"]))
    return Trajectory(Q, None, None, vel, None, mesh, op, TimeGrid(N))


def _summary_common(cfg):
    return {
        "version": __version__,
        "backend": BACKEND,
        "mesh": {"m": cfg.mesh.mx, "L": cfg.mesh.Lx},
        "norm": {"alpha": cfg.norm.alpha, "power": cfg.norm.power},
        "kernel": {"alpha": cfg.kernel.alpha, "power": cfg.kernel.power},
        "steps": cfg.grid.N,
    }


def write_summary(path, data):
    write_text(path, json.dumps(data, indent=2, sort_keys=True) + "\n")


def cmd_match(args):
    cfg = load_config(args.config)
    outdir = Path(args.output) if args.output else cfg.output
    prob = cfg.problem()
    log.info("matching %d -> %d particles on %dx%d mesh (%s backend)",
             len(prob.source), len(prob.target), cfg.mesh.mx, cfg.mesh.my, BACKEND)

    def progress(it, f, g):
        log.info("iter %4d  objective %.6e  |grad| %.3e", it, f, g)

    res = minimize(prob, callback=progress)
    traj = res.trajectory
    write_csv(outdir / "history.csv", ("iter", "objective", "grad_norm"),
              [(i, f, g) for i, (f, g) in enumerate(zip(res.objective_history,
                                                        res.grad_norm_history))])
    write_csv(outdir / "control.csv", ("p",), [(p,) for p in res.control])
    write_snapshots(outdir, traj, prob.source_edges, cfg.snapshots)
    write_conservation(outdir, traj, prob.source_edges)
    write_trajectory(outdir, traj)
    summary = _summary_common(cfg)
    summary.update({
        "initial_objective": res.initial_objective,
        "final_objective": res.final_objective,
        "reduction_factor": res.reduction_factor if math.isfinite(res.reduction_factor) else None,
        "iterations": res.iterations,
        "evaluations": res.n_evaluations,
        "converged": res.converged,
        "message": res.message,
        "method": prob.method,
        "n_source": len(prob.source),
        "n_target": len(prob.target),
        **res.diagnostics,
    })
    write_summary(outdir / "summary.json", summary)
    log.info("objective %.6e -> %.6e (%s); outputs in %s", res.initial_objective,
             res.final_objective, res.message, outdir)
    return EXIT_OK if res.converged else EXIT_NOT_CONVERGED


def cmd_forward(args):
    cfg = load_config(args.config)
    outdir = Path(args.output) if args.output else cfg.output
    source, _ = cfg.curves()
    mpath = Path(args.momentum)
    if not mpath.exists():
        raise ConfigError(f"momentum file not found: {mpath}")
    P0 = read_vectors(mpath, header=("px", "py"))
    if len(P0) != len(source):
        raise ConfigError(f"momentum file has {len(P0)} rows but the curve has "
                          f"{len(source)} particles")
    traj = integrate(source.points, P0, cfg.grid, cfg.norm, cfg.mesh,
                     tol_fp=cfg.tol_fp, max_iter=cfg.max_iter_fp)
    dQ0 = edge_vectors(source)
    write_snapshots(outdir, traj, dQ0, cfg.snapshots)
    write_conservation(outdir, traj, dQ0)
    write_trajectory(outdir, traj)
    summary = _summary_common(cfg)
    summary.update(conservation_summary(traj, dQ0))
    summary["fixed_point_iterations_max"] = int(traj.iterations.max())
    write_summary(outdir / "summary.json", summary)
    return EXIT_OK


def grid_lines(mesh, spacing, resolution=None):
    """Points on equispaced vertical and horizontal lines, with line ids."""
    if not spacing > 0:
        raise ConfigError(f"grid-line spacing must be positive, got {spacing}")
    if spacing > min(mesh.Lx, mesh.Ly):
        raise ConfigError(f"grid-line spacing {spacing} exceeds the domain size")
    res = resolution or 0.5 * min(mesh.dx, mesh.dy)
    ids, pts = [], []
    line = 0
    for axis, (L_across, L_along) in enumerate([(mesh.Lx, mesh.Ly), (mesh.Ly, mesh.Lx)]):
        along = np.linspace(0.0, L_along, int(math.ceil(L_along / res)) + 1)
        for c in np.arange(0.0, L_across, spacing):
            seg = np.empty((len(along), 2))
            seg[:, axis] = c
            seg[:, 1 - axis] = along
            pts.append(seg)
            ids.append(np.full(len(along), line))
            line += 1
    return np.concatenate(ids), np.concatenate(pts)


def cmd_deform_grid(args):
    tdir = Path(args.trajectory)
    try:
        traj = read_trajectory(tdir)
    except FileNotFoundError as exc:
        raise ConfigError(str(exc)) from None
    outdir = Path(args.output) if args.output else tdir
    ids, pts = grid_lines(traj.mesh, args.spacing, args.resolution)
    paths = transport_points(pts, traj)
    header = ("line", "x", "y")
    write_csv(outdir / "gridlines_initial.csv", header,
              [(int(i), x, y) for i, (x, y) in zip(ids, paths[0])])
    write_csv(outdir / "gridlines_final.csv", header,
              [(int(i), x, y) for i, (x, y) in zip(ids, paths[-1])])
    return EXIT_OK


def cmd_check(args):
    from .checks import run_checks

    results = run_checks()
    for name, ok, detail in results:
        print(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
    return EXIT_OK if all(ok for _, ok, _ in results) else EXIT_NUMERIC


def cmd_default_config(args):
    sys.stdout.write(default_config_text())
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="pmmatch", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("match", help="optimise initial momenta to match source onto target")
    p.add_argument("config")
    p.add_argument("-o", "--output", help="output directory (overrides [output] directory)")
    p.set_defaults(func=cmd_match)

    p = sub.add_parser("forward", help="integrate the source curve from given initial momenta")
    p.add_argument("config")
    p.add_argument("--momentum", required=True, help="CSV with header px,py, one row per particle")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_forward)

    p = sub.add_parser("deform-grid", help="transport grid lines through a stored trajectory")
    p.add_argument("trajectory", help="output directory of a match or forward run")
    p.add_argument("--spacing", type=float, default=0.25, help="distance between grid lines")
    p.add_argument("--resolution", type=float, default=None,
                   help="sample spacing along each line (default half a mesh cell)")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_deform_grid)

    p = sub.add_parser("check", help="run the invariant suite on a tiny problem")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("default-config", help="print the default configuration")
    p.set_defaults(func=cmd_default_config)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConvergenceError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"pmmatch: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ValueError, OSError) as exc:
        print(f"pmmatch: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
