"""Strict parser for scenario files.

Format::

    # comment
    [plant]
    A = a11, a12; a21, a22      # row-major, rows separated by ';'
    b = 0, 1
    c = 1, 0
    ...

Polynomials are ascending coefficient lists (``Pm = 1, 2, 1`` is
``(s+1)^2``). The plant may instead be given as ``num``/``den`` (ascending,
non-monic allowed). Unknown sections or keys are errors.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .design import Scheme
from .lti import LTIError, Polynomial, RationalTF, StateSpace, ss_from_tf
from .sim import Init, RefInput, Scenario


class ScenarioParseError(ValueError):
    def __init__(self, message: str, line: Optional[int] = None, key: Optional[str] = None,
                 source: str = "<scenario>"):
        where = source + (f":{line}" if line else "")
        what = f" [{key}]" if key else ""
        super().__init__(f"{where}{what}: {message}")
        self.line, self.key, self.source = line, key, source


SECTIONS = {
    "plant": {"A", "b", "c", "num", "den"},
    "reference": {"A", "b", "c", "k1m", "input"},
    "design": {"scheme", "Pm", "Lambda", "Lambda_e"},
    "adaptation": {"Gamma", "gamma", "sign_kp", "theta0", "rho0"},
    "sim": {"horizon", "dt", "x0", "xm0"},
}


def required_keys(scheme: Scheme, plant_form: str) -> list[tuple[str, str]]:
    req = [("plant", k) for k in (("A", "b", "c") if plant_form == "ss" else ("num", "den"))]
    req += [("reference", k) for k in ("A", "b", "c", "k1m", "input")]
    req += [("design", "scheme"), ("design", "Pm")]
    if not scheme.state_feedback:
        req.append(("design", "Lambda"))
    if not scheme.uses_xm:
        req.append(("design", "Lambda_e"))
    req += [("adaptation", k) for k in ("Gamma", "gamma", "sign_kp", "theta0", "rho0")]
    req += [("sim", "horizon"), ("sim", "dt")]
    return req


@dataclass
class _Entry:
    value: str
    line: int


def _split(text: str, source: str) -> dict[str, dict[str, _Entry]]:
    data: dict[str, dict[str, _Entry]] = {}
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = re.fullmatch(r"\[\s*([A-Za-z_]+)\s*\]", line)
        if m:
            section = m.group(1)
            if section not in SECTIONS:
                raise ScenarioParseError(f"unknown section [{section}]", lineno, None, source)
            if section in data:
                raise ScenarioParseError(f"duplicate section [{section}]", lineno, None, source)
            data[section] = {}
            continue
        if "=" not in line:
            raise ScenarioParseError("expected 'key = value'", lineno, None, source)
        key, _, value = (s.strip() for s in line.partition("="))
        if section is None:
            raise ScenarioParseError("key outside of any section", lineno, key, source)
        if key not in SECTIONS[section]:
            raise ScenarioParseError(f"unknown key in [{section}]", lineno, key, source)
        if key in data[section]:
            raise ScenarioParseError("duplicate key", lineno, key, source)
        if not value:
            raise ScenarioParseError("empty value", lineno, key, source)
        data[section][key] = _Entry(value, lineno)
    return data


class _Reader:
    def __init__(self, data, source):
        self.data, self.source = data, source

    def has(self, section, key) -> bool:
        return key in self.data.get(section, {})

    def _entry(self, section, key) -> _Entry:
        try:
            return self.data[section][key]
        except KeyError:
            raise ScenarioParseError(f"missing required key in [{section}]", None, key,
                                     self.source) from None

    def fail(self, section, key, msg):
        raise ScenarioParseError(msg, self._entry(section, key).line, key, self.source)

    def raw(self, section, key) -> str:
        return self._entry(section, key).value

    def vector(self, section, key) -> np.ndarray:
        try:
            return np.array([float(v) for v in self.raw(section, key).split(",")])
        except ValueError:
            self.fail(section, key, "expected a comma-separated list of numbers")

    def matrix(self, section, key) -> np.ndarray:
        try:
            rows = [[float(v) for v in r.split(",")] for r in self.raw(section, key).split(";")]
        except ValueError:
            self.fail(section, key, "expected rows of numbers separated by ';'")
        if len({len(r) for r in rows}) != 1:
            self.fail(section, key, "rows have different lengths")
        return np.array(rows)

    def number(self, section, key) -> float:
        try:
            return float(self.raw(section, key))
        except ValueError:
            self.fail(section, key, "expected a number")

    def poly(self, section, key) -> Polynomial:
        p = Polynomial(self.vector(section, key))
        if p.is_zero or not p.is_monic:
            self.fail(section, key, "polynomial must be monic (ascending coefficients, last = 1)")
        return p

    def init(self, section, key) -> Init:
        text = self.raw(section, key)
        parts = text.split(None, 1)
        if parts[0] == "scale":
            if len(parts) != 2:
                self.fail(section, key, "expected 'scale <factor>'")
            try:
                return Init(float(parts[1]))
            except ValueError:
                self.fail(section, key, "expected 'scale <factor>'")
        return Init.of(self.vector(section, key))

    def ref_input(self, section, key) -> RefInput:
        text = self.raw(section, key)
        kind, _, rest = text.partition(" ")
        try:
            if kind == "const":
                return RefInput(float(rest))
            if kind == "sines":
                terms = []
                for term in rest.split(";"):
                    a, w = (float(v) for v in term.split(","))
                    terms.append((a, w))
                return RefInput(0.0, tuple(terms))
        except ValueError:
            pass
        self.fail(section, key, "expected 'const <v>' or 'sines a1,w1; a2,w2; ...'")


def parse_scenario(text: str, source: str = "<scenario>",
                   scheme_override: Optional[Scheme] = None) -> Scenario:
    data = _split(text, source)
    r = _Reader(data, source)

    try:
        scheme = scheme_override or Scheme.parse(r.raw("design", "scheme"))
    except ValueError as exc:
        if isinstance(exc, ScenarioParseError):
            raise
        r.fail("design", "scheme", str(exc))
    plant_keys = set(data.get("plant", {}))
    if plant_keys & {"num", "den"} and plant_keys & {"A", "b", "c"}:
        raise ScenarioParseError("give the plant either as A, b, c or as num, den", None,
                                 None, source)
    plant_form = "tf" if plant_keys & {"num", "den"} else "ss"
    for section, key in required_keys(scheme, plant_form):
        r.raw(section, key)

    try:
        if plant_form == "ss":
            plant = StateSpace(r.matrix("plant", "A"), r.vector("plant", "b"),
                               r.vector("plant", "c"))
        else:
            plant = ss_from_tf(RationalTF.from_coeffs(r.vector("plant", "num"),
                                                      r.vector("plant", "den")))
    except LTIError as exc:
        raise ScenarioParseError(f"bad plant: {exc}", None, None, source) from exc
    try:
        ref = StateSpace(r.matrix("reference", "A"), r.vector("reference", "b"),
                         r.vector("reference", "c"))
    except LTIError as exc:
        raise ScenarioParseError(f"bad reference: {exc}", None, None, source) from exc

    sign = r.number("adaptation", "sign_kp")
    if sign not in (-1.0, 1.0):
        r.fail("adaptation", "sign_kp", "must be +1 or -1")
    Gamma_raw = r.raw("adaptation", "Gamma")
    Gamma = r.number("adaptation", "Gamma") if ";" not in Gamma_raw else r.matrix("adaptation", "Gamma")
    kw = {}
    if r.has("sim", "x0"):
        kw["x0"] = r.vector("sim", "x0")
    if r.has("sim", "xm0"):
        kw["xm0"] = r.vector("sim", "xm0")
    return Scenario(
        plant=plant, ref=ref,
        ref_input=r.ref_input("reference", "input"),
        scheme=scheme,
        pm=r.poly("design", "Pm"),
        sign_kp=int(sign),
        k1m=r.vector("reference", "k1m"),
        lam=r.poly("design", "Lambda") if r.has("design", "Lambda") else None,
        lambda_e=r.poly("design", "Lambda_e") if r.has("design", "Lambda_e") else None,
        Gamma=Gamma,
        gamma=r.number("adaptation", "gamma"),
        theta0=r.init("adaptation", "theta0"),
        rho0=r.init("adaptation", "rho0"),
        horizon=r.number("sim", "horizon"),
        dt=r.number("sim", "dt"),
        **kw,
    )


def load_scenario(path, scheme_override: Optional[Scheme] = None) -> Scenario:
    path = Path(path)
    return parse_scenario(path.read_text(), str(path), scheme_override)
