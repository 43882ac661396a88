import re

import numpy as np
import pytest

from mracref.design import Scheme
from mracref.scenario import ScenarioParseError, parse_scenario

from .conftest import SCENARIOS

FILES = sorted(SCENARIOS.glob("*.scn"))
KEY_LINE = re.compile(r"^\s*([A-Za-z_0-9]+)\s*=")


def test_there_are_example_files():
    assert len(FILES) >= 6


@pytest.mark.parametrize("path", FILES, ids=lambda p: p.name)
def test_example_files_parse(path):
    sc = parse_scenario(path.read_text(), str(path))
    assert sc.dt > 0 and sc.horizon > 0


@pytest.mark.parametrize("path", FILES, ids=lambda p: p.name)
def test_deleting_any_key_names_it(path):
    lines = path.read_text().splitlines()
    keyed = [(i, KEY_LINE.match(l).group(1)) for i, l in enumerate(lines) if KEY_LINE.match(l)]
    assert keyed
    for i, key in keyed:
        text = "\n".join(lines[:i] + lines[i + 1:])
        with pytest.raises(ScenarioParseError) as exc:
            parse_scenario(text, str(path))
        assert exc.value.key == key, (path.name, key, str(exc.value))
        assert key in str(exc.value)


def _aircraft_text():
    return (SCENARIOS / "aircraft_const.scn").read_text()


def test_unknown_key_names_line_and_key():
    text = _aircraft_text().replace("gamma = 5", "gama = 5")
    with pytest.raises(ScenarioParseError) as exc:
        parse_scenario(text, "x.scn")
    lineno = text.splitlines().index("gama = 5") + 1
    assert exc.value.line == lineno and exc.value.key == "gama"
    assert f"x.scn:{lineno} [gama]" in str(exc.value)


@pytest.mark.parametrize("old, new, key", [
    ("dt = 0.001", "dt = fast", "dt"),
    ("Pm = 1, 2, 1", "Pm = 1, 2, 2", "Pm"),
    ("sign_kp = -1", "sign_kp = 0", "sign_kp"),
    ("theta0 = scale 1.1", "theta0 = scale", "theta0"),
    ("input = const 300", "input = step 300", "input"),
    ("scheme = OFB_YM", "scheme = LQR", "scheme"),
    ("c = 0, 0, 0, 1\n", "c = 0, 0, 0, x\n", "c"),
])
def test_bad_values(old, new, key):
    text = _aircraft_text().replace(old, new, 1)
    with pytest.raises(ScenarioParseError) as exc:
        parse_scenario(text)
    assert exc.value.key == key


def test_structure_errors():
    with pytest.raises(ScenarioParseError, match="unknown section"):
        parse_scenario("[plnt]\n")
    with pytest.raises(ScenarioParseError, match="outside"):
        parse_scenario("A = 1\n")
    text = _aircraft_text().replace("dt = 0.001", "dt = 0.001\ndt = 0.002")
    with pytest.raises(ScenarioParseError, match="duplicate key"):
        parse_scenario(text)
    with pytest.raises(ScenarioParseError, match="rows"):
        parse_scenario(_aircraft_text().replace("; 0, 0, 1, 0", "; 0, 0, 1", 1))


def test_values_parsed():
    sc = parse_scenario(_aircraft_text())
    assert sc.scheme is Scheme.OFB_YM
    assert sc.plant.A.shape == (4, 4)
    assert sc.plant.A[1, 2] == 220.55
    assert sc.pm.coeffs.tolist() == [1.0, 2.0, 1.0]
    assert sc.theta0.scale == 1.1
    assert sc.Gamma == 5.0 and sc.sign_kp == -1


def test_sines_and_explicit_vector():
    text = (SCENARIOS / "aircraft_sine3.scn").read_text()
    text = text.replace("rho0 = scale 1.1", "rho0 = -0.02")
    sc = parse_scenario(text)
    assert sc.ref_input.sines == ((300.0, 0.3), (250.0, 0.5), (200.0, 0.7))
    assert np.array_equal(sc.rho0.value, [-0.02])


def test_scheme_override_checks_required_keys():
    text = (SCENARIOS / "scalar.scn").read_text()
    with pytest.raises(ScenarioParseError) as exc:
        parse_scenario(text, scheme_override=Scheme.SFB_YM)
    assert exc.value.key == "Lambda_e"


def test_tf_plant_form():
    sc = parse_scenario((SCENARIOS / "aircraft_tf.scn").read_text())
    assert sc.plant.n == 4
    bad = (SCENARIOS / "aircraft_tf.scn").read_text().replace("[plant]\n", "[plant]\nc = 1\n")
    with pytest.raises(ScenarioParseError, match="either"):
        parse_scenario(bad)
