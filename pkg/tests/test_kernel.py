import os
import subprocess
import sys

import numpy as np
import pytest

from mracref import Init, kernel
from mracref.sim import RefInput, Scheme, integrate

from .conftest import aircraft_scenario

needs_compiled = pytest.mark.skipif(not kernel.COMPILED, reason="compiled kernel not built")


def test_get_engine():
    assert kernel.get_engine("python") is kernel.ENGINES["python"]
    assert kernel.get_engine() is kernel.rk4_closed_loop
    with pytest.raises(ValueError):
        kernel.get_engine("fortran")


@needs_compiled
@pytest.mark.parametrize("scheme", list(Scheme))
def test_compiled_matches_python(scheme):
    sc = aircraft_scenario(scheme, ref_input=RefInput(100.0, ((50.0, 0.5),)), horizon=2.0)
    a = integrate(sc, engine="compiled")
    b = integrate(sc, engine="python")
    assert a.engine == "compiled" and b.engine == "python"
    scale = np.abs(a.theta).max()
    assert np.max(np.abs(a.theta - b.theta)) < 1e-12 * scale
    assert np.max(np.abs(a.e - b.e)) < 1e-12
    assert np.max(np.abs(a.u - b.u)) < 1e-9 * np.abs(a.u).max()


def test_python_matches_reference():
    sc = aircraft_scenario(Scheme.SFB_YM, horizon=0.3)
    a = integrate(sc, engine="python")
    b = integrate(sc, engine="reference")
    assert np.allclose(a.theta, b.theta, rtol=1e-10, atol=1e-9)
    assert np.allclose(a.m, b.m, rtol=1e-12)


def test_divergence_index_agrees():
    sc = aircraft_scenario(Scheme.SFB_XM, theta0=Init(-50.0), adapt=False,
                           horizon=200.0)
    a = integrate(sc, engine="python")
    if kernel.COMPILED:
        b = integrate(sc, engine="compiled")
        assert len(a) == len(b)
    assert a.diverged


def test_pure_python_switch():
    env = dict(os.environ, MRACREF_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "import mracref; print(mracref.COMPILED)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "False"
