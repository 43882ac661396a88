"""Nominal (matched) controller parameters for the four tracking schemes.

Everything here is plain linear algebra on known models: the results are
the "true" parameters the adaptive laws try to recover, used for
initialisation, diagnostics and golden checks.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .lti import (
    LTIError,
    Polynomial,
    RationalTF,
    StateSpace,
    acker,
    is_hurwitz,
    leverrier,
    mul,
    place_observer_gain,
    relative_degree,
    tf_from_ss,
)


class DesignError(ValueError):
    """A design assumption is violated; ``assumption`` names which one."""

    def __init__(self, message: str, assumption: str = "design"):
        super().__init__(message)
        self.assumption = assumption


class Scheme(enum.Enum):
    SFB_XM = "SFB_XM"
    SFB_YM = "SFB_YM"
    OFB_XM = "OFB_XM"
    OFB_YM = "OFB_YM"

    @property
    def state_feedback(self) -> bool:
        return self in (Scheme.SFB_XM, Scheme.SFB_YM)

    @property
    def uses_xm(self) -> bool:
        return self in (Scheme.SFB_XM, Scheme.OFB_XM)

    def p(self, n: int, n_ref: Optional[int] = None) -> int:
        """Regressor dimension for plant order ``n`` (reference order defaults to ``n``)."""
        nm = n if n_ref is None else n_ref
        plant_part = n if self.state_feedback else 2 * (n - 1) + 1
        ref_part = nm + 1 if self.uses_xm else 2 * (nm - 1) + 2
        return plant_part + ref_part

    @classmethod
    def parse(cls, name: str) -> "Scheme":
        try:
            return cls[name.strip().upper().replace("-", "_")]
        except KeyError:
            raise ValueError(f"unknown scheme {name!r}; choose from "
                             f"{', '.join(s.name for s in cls)}") from None


# ---------------------------------------------------------------------------
# Result types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class OutputFbMatch:
    theta1: np.ndarray
    theta2: np.ndarray
    theta20: float
    theta3: float


@dataclass(frozen=True)
class StateFbMatch:
    k1: np.ndarray
    k2: float


@dataclass(frozen=True)
class RmParamXm:
    alpha1: np.ndarray
    alpha2: float
    n_star_ref: int


@dataclass(frozen=True)
class ObserverDesign:
    """Reduced-order observer for the reference system.

    ``Theta1``/``Theta2`` are coefficient matrices: row ``i`` holds the
    ascending ``s**k`` coefficients of component ``i`` of ``G_um(s)`` and
    ``G_ym(s)``, so that ``w_m = Theta1 @ omega_um + Theta2 @ omega_ym``.
    """

    T: np.ndarray
    Q: np.ndarray
    Abar: np.ndarray
    Bbar: np.ndarray
    L_r: np.ndarray
    F: np.ndarray
    g: np.ndarray
    h: np.ndarray
    Theta1: np.ndarray
    Theta2: np.ndarray
    lambda_e: Polynomial

    @property
    def dim(self) -> int:
        return self.T.shape[0] - 1

    def estimate(self, w: np.ndarray, y_m: float) -> np.ndarray:
        """State estimate from the dynamic part ``w`` and the measured output."""
        y_m = np.ravel(y_m)[0]
        return self.Q @ np.concatenate([[y_m], w + self.L_r * y_m])


@dataclass(frozen=True)
class RmParamYm:
    beta1: np.ndarray
    beta2: np.ndarray
    beta20: float
    alpha2: float


@dataclass(frozen=True)
class NominalDesign:
    scheme: Scheme
    theta_star: np.ndarray
    rho_star: float


# ---------------------------------------------------------------------------
# Matching equations
# ---------------------------------------------------------------------------


def _shift(p: Polynomial, k: int) -> np.ndarray:
    return np.concatenate([np.zeros(k), p.coeffs])


def _pad(c: np.ndarray, size: int) -> np.ndarray:
    out = np.zeros(size)
    out[: len(c)] = c
    return out


def output_matching_residual(G: RationalTF, lam: Polynomial, pm: Polynomial,
                             m: OutputFbMatch) -> float:
    """Largest coefficient mismatch of the polynomial matching identity,
    relative to the largest coefficient magnitude on either side."""
    n = G.den.degree
    P, Z, kp = G.den.coeffs, G.num.coeffs, G.gain
    size = 2 * n
    lhs = np.zeros(size)
    for i in range(n - 1):
        lhs += m.theta1[i] * _pad(_shift(G.den, i), size)
        lhs += m.theta2[i] * kp * _pad(_shift(G.num, i), size)
    lhs += m.theta20 * kp * _pad(np.convolve(lam.coeffs, Z), size)
    rhs_inner = _pad(P, n + 1) - kp * m.theta3 * _pad(np.convolve(Z, pm.coeffs), n + 1)
    rhs = _pad(np.convolve(lam.coeffs, rhs_inner), size)
    scale_ = max(np.max(np.abs(lhs)), np.max(np.abs(rhs)), 1e-300)
    return float(np.max(np.abs(lhs - rhs)) / scale_)


def solve_output_matching(G: RationalTF, lam: Polynomial, pm: Polynomial) -> OutputFbMatch:
    """Solve the output-feedback polynomial matching equation.

    With ``theta3 = 1/k_p`` fixed, the identity is linear in
    ``(theta1, theta2, theta20)``; its ``2n-1`` coefficients form a square
    system, singular exactly when ``Z`` and ``P`` share a root.
    """
    n = G.den.degree
    n_star = relative_degree(G)
    if n < 2:
        raise DesignError("output-feedback schemes need plant order n >= 2", "n")
    if lam.degree != n - 1 or not lam.is_monic or not is_hurwitz(lam):
        raise DesignError(f"Lambda must be monic Hurwitz of degree {n - 1}", "Lambda")
    if pm.degree != n_star or not pm.is_monic or not is_hurwitz(pm):
        raise DesignError(f"P_m must be monic Hurwitz of degree n* = {n_star}", "P_m")
    kp = G.gain
    theta3 = 1.0 / kp
    size = 2 * n - 1
    cols = []
    for i in range(n - 1):
        cols.append(_pad(_shift(G.den, i), 2 * n)[:size])
    for i in range(n - 1):
        cols.append(kp * _pad(_shift(G.num, i), 2 * n)[:size])
    cols.append(kp * _pad(np.convolve(lam.coeffs, G.num.coeffs), 2 * n)[:size])
    M = np.column_stack(cols)
    inner = _pad(G.den.coeffs, n + 1) - _pad(np.convolve(G.num.coeffs, pm.coeffs), n + 1)
    rhs = _pad(np.convolve(lam.coeffs, inner), 2 * n)
    # the s^(2n-1) terms cancel because P and Z*P_m are both monic of degree n
    rhs = rhs[:size]
    if np.linalg.cond(M) > 1e14:
        raise DesignError("matching system is singular: Z(s) and P(s) are not coprime", "A1")
    sol = np.linalg.solve(M, rhs)
    return OutputFbMatch(sol[: n - 1].copy(), sol[n - 1: 2 * n - 2].copy(),
                         float(sol[-1]), float(theta3))


def solve_state_matching(sys: StateSpace, pm: Polynomial) -> StateFbMatch:
    """``k1`` places ``char(A + b k1^T) = Z(s) P_m(s)``; ``k2 = 1/k_p``."""
    G = tf_from_ss(sys)
    n_star = relative_degree(G)
    if pm.degree != n_star or not pm.is_monic or not is_hurwitz(pm):
        raise DesignError(f"P_m must be monic Hurwitz of degree n* = {n_star}", "P_m")
    try:
        k = acker(sys.A, sys.b, mul(G.num, pm))
    except LTIError as exc:
        raise DesignError(f"state matching infeasible: {exc}", "controllability") from exc
    return StateFbMatch(-k, 1.0 / G.gain)


def state_matching_residual(sys: StateSpace, pm: Polynomial, m: StateFbMatch,
                            freqs: Optional[np.ndarray] = None) -> float:
    """Max relative deviation of ``c (sI - A - b k1^T)^-1 b k2`` from ``1/P_m``."""
    if freqs is None:
        freqs = np.logspace(-2, 2, 20)
    closed = StateSpace(sys.A + np.outer(sys.b, m.k1), sys.b * m.k2, sys.c)
    s = 1j * freqs
    H = closed.freq_response(s)
    W = 1.0 / pm(s)
    return float(np.max(np.abs(H - W) / np.abs(W)))


# ---------------------------------------------------------------------------
# Reference-signal parametrisations
# ---------------------------------------------------------------------------


def rm_param_xm(ref: StateSpace, pm: Polynomial, n_star: int) -> RmParamXm:
    """Coefficients expressing ``P_m(s)[y_m]`` through ``x_m`` and ``u_m``."""
    if pm.degree != n_star or not pm.is_monic:
        raise DesignError(f"P_m must be monic of degree {n_star}", "P_m")
    n_star_ref = ref.relative_degree()
    if n_star_ref < n_star:
        raise DesignError(
            f"reference relative degree {n_star_ref} < plant relative degree {n_star}; "
            "derivatives of u_m would be required", "A2")
    rows = [ref.c]
    for _ in range(n_star):
        rows.append(rows[-1] @ ref.A)
    alpha1 = sum(coef * row for coef, row in zip(pm.coeffs, rows))
    alpha2 = float(rows[n_star - 1] @ ref.b) if n_star_ref == n_star else 0.0
    return RmParamXm(np.asarray(alpha1, dtype=float), alpha2, n_star_ref)


def _completion_candidates(c: np.ndarray):
    for pivot in np.argsort(-np.abs(c), kind="stable"):
        if c[pivot] == 0.0:
            break
        keep = [j for j in range(len(c)) if j != pivot]
        yield np.vstack([c, np.eye(len(c))[keep]])


def reduced_observer_design(ref: StateSpace, lambda_e: Polynomial) -> ObserverDesign:
    """Reduced-order observer of ``x_m`` from ``(u_m, y_m)`` with error poles ``lambda_e``."""
    n = ref.n
    if n < 2:
        raise DesignError("reduced-order observer needs reference order >= 2", "n")
    if not np.any(ref.c):
        raise DesignError("reference output map is zero", "A2")
    if lambda_e.degree != n - 1 or not lambda_e.is_monic or not is_hurwitz(lambda_e):
        raise DesignError(f"Lambda_e must be monic Hurwitz of degree {n - 1}", "Lambda_e")
    T = None
    for cand in _completion_candidates(ref.c):
        if np.linalg.cond(cand) < 1e12:
            T = cand
            break
    if T is None:
        raise DesignError("no well-conditioned basis completion for c_m", "observer")
    Q = np.linalg.inv(T)
    Abar = T @ ref.A @ Q
    Bbar = T @ ref.b
    A11, A12 = Abar[0, 0], Abar[0, 1:]
    A21, A22 = Abar[1:, 0], Abar[1:, 1:]
    B1, B2 = Bbar[0], Bbar[1:]
    try:
        L = place_observer_gain(A22, A12, lambda_e)
    except LTIError as exc:
        raise DesignError(f"(A_m, c_m) not observable: {exc}", "A2") from exc
    F = A22 - np.outer(L, A12)
    g = B2 - L * B1
    h = F @ L + A21 - L * A11
    _, M = leverrier(F)
    Theta1 = np.column_stack([Mk @ g for Mk in M])
    Theta2 = np.column_stack([Mk @ h for Mk in M])
    return ObserverDesign(T, Q, Abar, Bbar, L, F, g, h, Theta1, Theta2, lambda_e)


def rm_param_ym(obs: ObserverDesign, axm: RmParamXm) -> RmParamYm:
    """Coefficients expressing ``P_m(s)[y_m]`` through filtered ``u_m``, ``y_m``."""
    if len(axm.alpha1) != obs.T.shape[0]:
        raise DesignError("observer and alpha1 dimensions disagree", "dimension")
    abar = obs.Q.T @ axm.alpha1
    a_y, a_rest = abar[0], abar[1:]
    beta1 = obs.Theta1.T @ a_rest
    beta2 = obs.Theta2.T @ a_rest
    beta20 = float(a_rest @ obs.L_r + a_y)
    return RmParamYm(beta1, beta2, beta20, axm.alpha2)


# ---------------------------------------------------------------------------
# Assembly
# ---------------------------------------------------------------------------


def assemble_nominal(scheme: Scheme, ofb: Optional[OutputFbMatch] = None,
                     sfb: Optional[StateFbMatch] = None,
                     axm: Optional[RmParamXm] = None,
                     aym: Optional[RmParamYm] = None) -> NominalDesign:
    """Lay out ``theta*`` in regressor order for ``scheme``."""
    if scheme.state_feedback:
        if sfb is None:
            raise DesignError(f"{scheme.name} needs the state-feedback matching solution",
                              "missing")
        gain, rho = sfb.k2, 1.0 / sfb.k2
        plant = [sfb.k1]
    else:
        if ofb is None:
            raise DesignError(f"{scheme.name} needs the output-feedback matching solution",
                              "missing")
        gain, rho = ofb.theta3, 1.0 / ofb.theta3
        plant = [ofb.theta1, ofb.theta2, [ofb.theta20]]
    if scheme.uses_xm:
        if axm is None:
            raise DesignError(f"{scheme.name} needs the x_m parametrisation (alpha)", "missing")
        ref = [gain * axm.alpha1, [gain * axm.alpha2]]
    else:
        if aym is None:
            raise DesignError(f"{scheme.name} needs the y_m parametrisation (beta)", "missing")
        ref = [gain * aym.beta1, gain * aym.beta2, [gain * aym.beta20], [gain * aym.alpha2]]
    theta = np.concatenate([np.ravel(np.asarray(v, dtype=float)) for v in plant + ref])
    return NominalDesign(scheme, theta, float(rho))


@dataclass(frozen=True)
class DesignReport:
    """All intermediate design artefacts for one plant/reference pair."""

    scheme: Scheme
    plant_tf: RationalTF
    n_star: int
    axm: RmParamXm
    nominal: NominalDesign
    ofb: Optional[OutputFbMatch] = None
    sfb: Optional[StateFbMatch] = None
    observer: Optional[ObserverDesign] = None
    aym: Optional[RmParamYm] = None


def check_plant(G: RationalTF) -> None:
    if G.num.degree > 0 and not is_hurwitz(G.num):
        raise DesignError(f"plant zeros {np.round(G.num.roots(), 6)} are not all stable", "A1")


def design(scheme: Scheme, plant: StateSpace | RationalTF, ref: StateSpace,
           pm: Polynomial, lam: Optional[Polynomial] = None,
           lambda_e: Optional[Polynomial] = None) -> DesignReport:
    """Run every design step ``scheme`` needs and assemble ``theta*``.

    ``plant`` may be a transfer function for output-feedback schemes; the
    state-feedback schemes need the state-space model.
    """
    G = plant if isinstance(plant, RationalTF) else tf_from_ss(plant)
    check_plant(G)
    n_star = relative_degree(G)
    axm = rm_param_xm(ref, pm, n_star)
    ofb = sfb = obs = aym = None
    if scheme.state_feedback:
        if not isinstance(plant, StateSpace):
            raise DesignError("state-feedback schemes need a state-space plant", "missing")
        sfb = solve_state_matching(plant, pm)
    else:
        if lam is None:
            raise DesignError(f"{scheme.name} needs Lambda", "missing")
        ofb = solve_output_matching(G, lam, pm)
    if not scheme.uses_xm:
        if lambda_e is None:
            raise DesignError(f"{scheme.name} needs Lambda_e", "missing")
        obs = reduced_observer_design(ref, lambda_e)
        aym = rm_param_ym(obs, axm)
    nominal = assemble_nominal(scheme, ofb, sfb, axm, aym)
    return DesignReport(scheme, G, n_star, axm, nominal, ofb, sfb, obs, aym)


# ---------------------------------------------------------------------------
# Key-value serialisation
# ---------------------------------------------------------------------------


def _fmt(values) -> str:
    return ", ".join(format(float(v), ".17g") for v in np.ravel(values))


def to_keyvalue(report: DesignReport) -> str:
    """Flat ``key = v1, v2, ...`` block at full double precision."""
    rows = [("scheme", report.scheme.name),
            ("n_star", str(report.n_star)),
            ("k_p", _fmt([report.plant_tf.gain])),
            ("alpha1", _fmt(report.axm.alpha1)),
            ("alpha2", _fmt([report.axm.alpha2]))]
    if report.ofb is not None:
        rows += [("theta1", _fmt(report.ofb.theta1)),
                 ("theta2", _fmt(report.ofb.theta2)),
                 ("theta20", _fmt([report.ofb.theta20])),
                 ("theta3", _fmt([report.ofb.theta3]))]
    if report.sfb is not None:
        rows += [("k1", _fmt(report.sfb.k1)), ("k2", _fmt([report.sfb.k2]))]
    if report.observer is not None:
        ob = report.observer
        rows += [("L_r", _fmt(ob.L_r)),
                 ("Theta1", _fmt(ob.Theta1)),
                 ("Theta2", _fmt(ob.Theta2))]
    if report.aym is not None:
        rows += [("beta1", _fmt(report.aym.beta1)),
                 ("beta2", _fmt(report.aym.beta2)),
                 ("beta20", _fmt([report.aym.beta20]))]
    rows += [("theta_star", _fmt(report.nominal.theta_star)),
             ("rho_star", _fmt([report.nominal.rho_star]))]
    return "".join(f"{k} = {v}\n" for k, v in rows)


def parse_keyvalue(text: str) -> dict[str, object]:
    """Inverse of :func:`to_keyvalue`; numeric values come back as float arrays."""
    out: dict[str, object] = {}
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#") or "=" not in line:
            continue
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key == "scheme":
            out[key] = Scheme.parse(value)
        else:
            out[key] = np.array([float(v) for v in value.split(",")])
    return out
