import os
import subprocess
import sys

import numpy as np
import pytest

from pmmatch._backend import BACKEND, get_kernels

py = get_kernels("python")
try:
    cy = get_kernels("cython")
except ImportError:  # extension not built
    cy = None

needs_ext = pytest.mark.skipif(cy is None, reason="compiled extension not built")


@pytest.fixture
def data(rng):
    mx, my = 24, 20
    hx, hy = 2 * np.pi / mx, 3.0 / my
    pts = rng.uniform(-4, 10, (57, 2))
    return dict(mx=mx, my=my, hx=hx, hy=hy, pts=pts, field=rng.standard_normal((mx, my, 2)),
                vecs=rng.standard_normal((57, 2)), dirs=rng.standard_normal((57, 2)))


@needs_ext
@pytest.mark.parametrize("name", ["interp", "interp_jac", "interp_hess"])
def test_interpolation_kernels_agree(data, name):
    a = getattr(py, name)(data["field"], data["pts"], data["hx"], data["hy"])
    b = getattr(cy, name)(data["field"], data["pts"], data["hx"], data["hy"])
    np.testing.assert_allclose(b, a, rtol=1e-13, atol=1e-13)


@needs_ext
def test_spread_kernels_agree(data):
    d = data
    a = py.spread(d["vecs"], d["pts"], d["mx"], d["my"], d["hx"], d["hy"])
    b = cy.spread(d["vecs"], d["pts"], d["mx"], d["my"], d["hx"], d["hy"])
    np.testing.assert_allclose(b, a, rtol=1e-13, atol=1e-14)
    a = py.spread_dir(d["vecs"], d["dirs"], d["pts"], d["mx"], d["my"], d["hx"], d["hy"])
    b = cy.spread_dir(d["vecs"], d["dirs"], d["pts"], d["mx"], d["my"], d["hx"], d["hy"])
    np.testing.assert_allclose(b, a, rtol=1e-13, atol=1e-13)


@needs_ext
@pytest.mark.skipif(os.environ.get("PMMATCH_BACKEND", "").lower() == "python",
                    reason="fallback forced by environment")
def test_compiled_backend_is_default():
    assert BACKEND == "cython"


def test_unknown_backend():
    with pytest.raises(ValueError):
        get_kernels("fortran")


def test_env_forces_fallback():
    env = dict(os.environ, PMMATCH_BACKEND="python")
    out = subprocess.run([sys.executable, "-c", "import pmmatch; print(pmmatch.BACKEND)"],
                         capture_output=True, text=True, env=env, check=True)
    assert out.stdout.strip() == "python"


def test_fallback_check_suite_passes():
    env = dict(os.environ, PMMATCH_BACKEND="python")
    out = subprocess.run([sys.executable, "-m", "pmmatch.cli", "check"], capture_output=True,
                         text=True, env=env)
    assert out.returncode == 0, out.stdout + out.stderr


@needs_ext
def test_benchmark_script_runs():
    from pathlib import Path

    script = Path(__file__).resolve().parents[1] / "benchmarks" / "bench_kernels.py"
    out = subprocess.run([sys.executable, str(script), "--particles", "30", "--mesh", "16",
                          "--repeat", "2", "--no-e2e"], capture_output=True, text=True)
    assert out.returncode == 0, out.stderr
    assert "spread" in out.stdout
