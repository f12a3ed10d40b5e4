"""Closed planar curves represented by an ordered, cyclic list of particles."""
import csv
import math
from dataclasses import dataclass

import numpy as np


class CurveError(ValueError):
    """Invalid curve data or geometry."""


class DegenerateCurveError(CurveError):
    def __init__(self, index):
        super().__init__(f"degenerate curve: zero-length centered difference at particle {index}")
        self.index = index


class CurveParseError(CurveError):
    def __init__(self, path, line, msg):
        super().__init__(f"{path}:{line}: {msg}")
        self.path = path
        self.line = line


@dataclass(frozen=True, eq=False)
class ParticleCurve:
    """Particle positions ``(n_p, 2)``; particle ``b - 1`` precedes ``b`` cyclically."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.array(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise CurveError(f"points must have shape (n, 2), got {pts.shape}")
        if pts.shape[0] < 3:
            raise CurveError(f"a closed curve needs at least 3 particles, got {pts.shape[0]}")
        if not np.all(np.isfinite(pts)):
            raise CurveError("curve contains non-finite coordinates")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    def __len__(self):
        return self.points.shape[0]

    def __array__(self, dtype=None, copy=None):
        return self.points if dtype is None else self.points.astype(dtype)

    @property
    def centroid(self):
        return self.points.mean(axis=0)

    def roll(self, shift):
        """Relabel particles cyclically (same curve, shifted indices)."""
        return ParticleCurve(np.roll(self.points, shift, axis=0))

    def reversed(self):
        return ParticleCurve(self.points[::-1])

    def fits_in(self, Lx, Ly, margin):
        lo = self.points.min(axis=0)
        hi = self.points.max(axis=0)
        return bool(lo[0] >= margin and lo[1] >= margin
                    and hi[0] <= Lx - margin and hi[1] <= Ly - margin)


def as_points(curve):
    if isinstance(curve, ParticleCurve):
        return curve.points
    return np.asarray(curve, dtype=float)


def edge_vectors(curve):
    """Backward differences ``Q_b - Q_{b-1}`` around the cycle."""
    pts = as_points(curve)
    return pts - np.roll(pts, 1, axis=0)


def outward_normals(curve):
    """Unit normals from centered differences, oriented away from the centroid.

    The centered difference ``Q_{b+1} - Q_{b-1}`` is rotated by -90 degrees,
    which points outward for a counterclockwise curve; any normal that still
    points toward the centroid is flipped.
    """
    pts = as_points(curve)
    d = np.roll(pts, -1, axis=0) - np.roll(pts, 1, axis=0)
    length = np.hypot(d[:, 0], d[:, 1])
    bad = np.flatnonzero(length == 0.0)
    if bad.size:
        raise DegenerateCurveError(int(bad[0]))
    normals = np.stack([d[:, 1], -d[:, 0]], axis=1) / length[:, None]
    radial = pts - pts.mean(axis=0)
    flip = np.einsum("ij,ij->i", normals, radial) < 0
    normals[flip] *= -1.0
    return normals


def signed_area(curve):
    """Shoelace area; positive for counterclockwise curves."""
    pts = as_points(curve)
    nxt = np.roll(pts, -1, axis=0)
    return 0.5 * float(np.sum(pts[:, 0] * nxt[:, 1] - nxt[:, 0] * pts[:, 1]))


def edge_normals(curve):
    """Outward unit normals to the backward edges ``Q_b - Q_{b-1}``.

    A momentum ``p_b * edge_normals[b]`` has exactly zero component along
    the discrete tangent used by the relabelling diagnostics. Orientation
    follows the sign of the enclosed area rather than a per-particle test.
    """
    E = edge_vectors(curve)
    length = np.hypot(E[:, 0], E[:, 1])
    bad = np.flatnonzero(length == 0.0)
    if bad.size:
        raise CurveError(f"degenerate curve: zero-length edge at particle {int(bad[0])}")
    normals = np.stack([E[:, 1], -E[:, 0]], axis=1) / length[:, None]
    return normals if signed_area(curve) >= 0 else -normals


def _circle(params, t):
    (r,) = params
    return r * np.cos(t), r * np.sin(t)


def _ellipse(params, t):
    a, b = params
    return a * np.cos(t), b * np.sin(t)


def _rounded_rectangle(params, t):
    # Arc-length parameterisation of a rectangle of full width w and height h
    # with corner radius rc, starting at the middle of the right side.
    w, h, rc = params
    if not 0 < rc <= min(w, h) / 2:
        raise CurveError("corner radius must be in (0, min(w, h)/2]")
    sx, sy = w / 2 - rc, h / 2 - rc
    quarter = math.pi * rc / 2
    segments = [
        ("line", (w / 2, 0.0), (0.0, 1.0), sy),
        ("arc", (sx, sy), 0.0, quarter),
        ("line", (sx, h / 2), (-1.0, 0.0), 2 * sx),
        ("arc", (-sx, sy), math.pi / 2, quarter),
        ("line", (-w / 2, sy), (0.0, -1.0), 2 * sy),
        ("arc", (-sx, -sy), math.pi, quarter),
        ("line", (-sx, -h / 2), (1.0, 0.0), 2 * sx),
        ("arc", (sx, -sy), 1.5 * math.pi, quarter),
        ("line", (w / 2, -sy), (0.0, 1.0), sy),
    ]
    total = sum(seg[-1] for seg in segments)
    s = t / (2 * math.pi) * total
    x = np.empty_like(s)
    y = np.empty_like(s)
    start = 0.0
    for kind, origin, direction, length in segments:
        sel = (s >= start) & (s < start + length)
        u = s[sel] - start
        if kind == "line":
            x[sel] = origin[0] + direction[0] * u
            y[sel] = origin[1] + direction[1] * u
        else:
            ang = direction + u / rc
            x[sel] = origin[0] + rc * np.cos(ang)
            y[sel] = origin[1] + rc * np.sin(ang)
        start += length
    return x, y


_SHAPES = {
    "circle": (_circle, 1),
    "ellipse": (_ellipse, 2),
    "rounded_rectangle": (_rounded_rectangle, 3),
}

SHAPE_KINDS = tuple(_SHAPES)


def make_shape(kind, params, n_p, center=(math.pi, math.pi),
               domain=(2 * math.pi, 2 * math.pi), margin=1.6):
    """Sample an analytic closed shape at ``n_p`` equally spaced parameter values.

    ``params`` is ``(r,)`` for a circle, ``(a, b)`` semi-axes for an ellipse
    and ``(width, height, corner_radius)`` for a rounded rectangle. The
    result is counterclockwise and must keep ``margin`` (default 4*0.4)
    clear of the periodic domain boundary.
    """
    if kind not in _SHAPES:
        raise CurveError(f"unknown shape kind {kind!r}; expected one of {SHAPE_KINDS}")
    fn, nparams = _SHAPES[kind]
    params = tuple(float(p) for p in np.atleast_1d(params))
    if len(params) != nparams:
        raise CurveError(f"{kind} takes {nparams} parameter(s), got {len(params)}")
    if any(not p > 0 for p in params):
        raise CurveError(f"{kind} dimensions must be positive")
    if int(n_p) != n_p or n_p < 3:
        raise CurveError(f"n_p must be an integer >= 3, got {n_p}")
    t = 2 * np.pi * np.arange(n_p) / n_p
    x, y = fn(params, t)
    curve = ParticleCurve(np.stack([x + center[0], y + center[1]], axis=1))
    if not curve.fits_in(domain[0], domain[1], margin):
        raise CurveError(f"{kind} with params {params} at {tuple(center)} is closer "
                         f"than {margin:g} to the domain boundary")
    return curve


def write_curve(curve, path, header=("x", "y")):
    """Write one ``%.17g,%.17g`` row per particle under a header line."""
    pts = as_points(curve)
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for x, y in pts:
            fh.write(f"{x:.17g},{y:.17g}\n")


def read_vectors(path, header=("x", "y"), min_rows=1):
    """Parse a two-column CSV with the given header; errors carry line numbers."""
    rows = []
    line = 0
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        for row in reader:
            line = reader.line_num
            if line == 1:
                if [c.strip() for c in row] != list(header):
                    raise CurveParseError(path, line, f"expected header {','.join(header)!r}")
                continue
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 2:
                raise CurveParseError(path, line, f"expected 2 fields, got {len(row)}")
            try:
                x, y = float(row[0]), float(row[1])
            except ValueError:
                raise CurveParseError(path, line, f"not a number: {','.join(row)!r}") from None
            if not (math.isfinite(x) and math.isfinite(y)):
                raise CurveParseError(path, line, "non-finite value")
            rows.append((x, y))
    if line == 0:
        raise CurveParseError(path, 1, "empty file")
    if len(rows) < min_rows:
        raise CurveParseError(path, line, f"need at least {min_rows} rows, got {len(rows)}")
    return np.array(rows, dtype=float).reshape(-1, 2)


def read_curve(path):
    return ParticleCurve(read_vectors(path, min_rows=3))
