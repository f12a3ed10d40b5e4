"""Run configuration: INI-style sections with a documented default for every key.

Unknown sections or keys are errors, so a typo never silently falls back to a
default. Defaults reproduce the reference experiment: 128x128 mesh on a
2*pi square, H^2 norm with alpha = 0.4, kernel (1 - alpha^2 Laplacian)^-2
with alpha = 0.4, 420 particles.
"""
import configparser
import math
from dataclasses import dataclass, field
from pathlib import Path

from .currents import KernelOperator
from .flow import MAX_ITER_FP, TOL_FP, TimeGrid
from .mesh import MeshConfig, NormOperator
from .shape import SHAPE_KINDS, CurveError, make_shape, read_curve
from .shooting import METHODS, ShootingProblem


class ConfigError(ValueError):
    pass


# section -> key -> (default, help)
DEFAULTS = {
    "mesh": {
        "m": ("128", "grid points per axis"),
        "L": ("6.283185307179586", "side length of the periodic square domain"),
    },
    "norm": {
        "alpha": ("0.4", "length scale of the velocity norm"),
        "power": ("2", "exponent n of (1 - alpha^2 Laplacian)^n"),
    },
    "kernel": {
        "alpha": ("0.4", "length scale of the current-matching kernel"),
        "power": ("2", "kernel is (1 - alpha^2 Laplacian)^-power"),
    },
    "time": {
        "steps": ("20", "number of time steps N, dt = 1/N"),
        "tol_fp": (repr(TOL_FP), "fixed-point tolerance of the implicit step"),
        "max_iter_fp": (str(MAX_ITER_FP), "fixed-point iteration cap"),
    },
    "source": {
        "kind": ("circle", "one of " + ", ".join(SHAPE_KINDS) + "; ignored when file is set"),
        "params": ("0.8", "comma-separated shape dimensions"),
        "n_p": ("420", "number of particles"),
        "center": ("", "x,y centre; empty means the domain centre"),
        "file": ("", "curve CSV to load instead of generating a shape"),
    },
    "target": {
        "kind": ("ellipse", "as for [source]"),
        "params": ("1.2,0.6", "as for [source]"),
        "n_p": ("420", "as for [source]"),
        "center": ("", "as for [source]"),
        "file": ("", "as for [source]"),
    },
    "optimizer": {
        "method": ("ncg", "one of " + ", ".join(METHODS)),
        "max_iters": ("200", "iteration cap"),
        "grad_tol": ("1e-12", "absolute gradient-norm tolerance"),
        "grad_rtol": ("1e-3", "gradient-norm tolerance relative to the initial gradient"),
        "sigma": ("", "penalty width; empty for pure shooting on the mismatch"),
    },
    "output": {
        "directory": ("pmmatch-out", "output directory"),
        "snapshots": ("0,0.2,0.4,0.6,0.8,1", "times at which curves are written"),
    },
}


def default_config_text():
    lines = []
    for section, keys in DEFAULTS.items():
        lines.append(f"[{section}]")
        for key, (value, doc) in keys.items():
            lines.append(f"# {doc}")
            lines.append(f"{key} = {value}")
        lines.append("")
    return "\n".join(lines)


@dataclass
class CurveSpec:
    kind: str
    params: tuple
    n_p: int
    center: tuple
    file: str

    def build(self, mesh, margin):
        if self.file:
            path = Path(self.file)
            if not path.exists():
                raise ConfigError(f"curve file not found: {path}")
            return read_curve(path)
        center = self.center or (mesh.Lx / 2, mesh.Ly / 2)
        return make_shape(self.kind, self.params, self.n_p, center=center,
                          domain=(mesh.Lx, mesh.Ly), margin=margin)


@dataclass
class RunConfig:
    mesh: MeshConfig = field(default_factory=MeshConfig)
    norm: NormOperator = field(default_factory=NormOperator)
    kernel: KernelOperator = field(default_factory=KernelOperator)
    grid: TimeGrid = field(default_factory=TimeGrid)
    tol_fp: float = TOL_FP
    max_iter_fp: int = MAX_ITER_FP
    source: CurveSpec = None
    target: CurveSpec = None
    method: str = "ncg"
    max_iters: int = 200
    grad_tol: float = 1e-12
    grad_rtol: float = 1e-3
    sigma: float = None
    output: Path = Path("pmmatch-out")
    snapshots: tuple = (0.0, 0.2, 0.4, 0.6, 0.8, 1.0)
    base_dir: Path = Path(".")

    def curves(self):
        margin = 4 * self.norm.alpha
        try:
            return (self.source.build(self.mesh, margin), self.target.build(self.mesh, margin))
        except CurveError as exc:
            raise ConfigError(str(exc)) from exc

    def problem(self):
        source, target = self.curves()
        return ShootingProblem(source, target, mesh=self.mesh, norm_op=self.norm,
                               kernel=self.kernel, grid=self.grid, method=self.method,
                               max_iters=self.max_iters, grad_tol=self.grad_tol,
                               grad_rtol=self.grad_rtol, sigma=self.sigma,
                               tol_fp=self.tol_fp, max_iter_fp=self.max_iter_fp)


def _floats(text, what):
    try:
        return tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise ConfigError(f"{what}: expected comma-separated numbers, got {text!r}") from None


def _get(raw, section, key, conv, what=None):
    text = raw[section][key]
    what = what or f"[{section}] {key}"
    try:
        value = conv(text)
    except ValueError:
        raise ConfigError(f"{what}: invalid value {text!r}") from None
    if isinstance(value, float) and not math.isfinite(value):
        raise ConfigError(f"{what}: must be finite")
    return value


def _curve(raw, section, base_dir):
    center = _floats(raw[section]["center"], f"[{section}] center")
    if center and len(center) != 2:
        raise ConfigError(f"[{section}] center: expected x,y")
    kind = raw[section]["kind"].strip()
    file = raw[section]["file"].strip()
    if not file and kind not in SHAPE_KINDS:
        raise ConfigError(f"[{section}] kind: expected one of {SHAPE_KINDS}, got {kind!r}")
    if file:
        file = str((base_dir / file) if not Path(file).is_absolute() else Path(file))
    return CurveSpec(kind=kind, params=_floats(raw[section]["params"], f"[{section}] params"),
                     n_p=_get(raw, section, "n_p", int), center=center, file=file)


def parse_config(text="", base_dir="."):
    """Parse configuration text; missing keys take their documented defaults."""
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from None
    raw = {s: {k: v for k, (v, _) in keys.items()} for s, keys in DEFAULTS.items()}
    for section in parser.sections():
        if section not in DEFAULTS:
            raise ConfigError(f"unknown section [{section}]")
        for key, value in parser[section].items():
            if key not in DEFAULTS[section]:
                raise ConfigError(f"unknown key {key!r} in [{section}]")
            raw[section][key] = value.strip()

    base_dir = Path(base_dir)
    try:
        m = _get(raw, "mesh", "m", int)
        L = _get(raw, "mesh", "L", float)
        mesh = MeshConfig(m, m, L, L)
        norm = NormOperator(_get(raw, "norm", "alpha", float), _get(raw, "norm", "power", int))
        kernel = KernelOperator(_get(raw, "kernel", "alpha", float),
                                _get(raw, "kernel", "power", int))
        grid = TimeGrid(_get(raw, "time", "steps", int))
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from None

    tol_fp = _get(raw, "time", "tol_fp", float)
    max_iter_fp = _get(raw, "time", "max_iter_fp", int)
    if not tol_fp > 0 or max_iter_fp < 1:
        raise ConfigError("[time] tol_fp must be positive and max_iter_fp at least 1")

    method = raw["optimizer"]["method"].strip()
    if method not in METHODS:
        raise ConfigError(f"[optimizer] method: expected one of {METHODS}, got {method!r}")
    sigma_text = raw["optimizer"]["sigma"].strip()
    sigma = _get(raw, "optimizer", "sigma", float) if sigma_text else None
    if sigma is not None and not sigma > 0:
        raise ConfigError("[optimizer] sigma must be positive")
    max_iters = _get(raw, "optimizer", "max_iters", int)
    grad_tol = _get(raw, "optimizer", "grad_tol", float)
    grad_rtol = _get(raw, "optimizer", "grad_rtol", float)
    if max_iters < 0 or grad_tol < 0 or grad_rtol < 0:
        raise ConfigError("[optimizer] max_iters and tolerances must be non-negative")

    snapshots = _floats(raw["output"]["snapshots"], "[output] snapshots")
    if any(not 0.0 <= t <= 1.0 for t in snapshots):
        raise ConfigError("[output] snapshots must lie in [0, 1]")
    out = Path(raw["output"]["directory"])
    if not out.is_absolute():
        out = base_dir / out

    return RunConfig(mesh=mesh, norm=norm, kernel=kernel, grid=grid, tol_fp=tol_fp,
                     max_iter_fp=max_iter_fp, source=_curve(raw, "source", base_dir),
                     target=_curve(raw, "target", base_dir), method=method,
                     max_iters=max_iters, grad_tol=grad_tol, grad_rtol=grad_rtol, sigma=sigma,
                     output=out, snapshots=tuple(sorted(set(snapshots))), base_dir=base_dir)


def load_config(path):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text, base_dir=path.parent)
