"""Closed-loop simulation of plant, leader (reference system) and adaptive follower.

The flat state is laid out as::

    [ x | x_m | w1 (u-filter) | w2 (y-filter) | w_um | w_ym | zeta channels | xi channel | theta | rho ]

where the four filter banks are present only for the schemes that use them,
``zeta`` holds ``p`` copies of the ``W_m`` realization (``deg P_m`` states
each) and ``xi`` one more copy driven by ``theta^T omega``. For the aircraft
example with the output-feedback/``y_m`` scheme that is
``4 + 4 + 3*4 + 15*2 + 2 + 15 + 1 = 68`` states.
"""

from __future__ import annotations

import dataclasses
import logging
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import sparse

from . import kernel
from .adaptive import (
    ControllerState,
    Gains,
    adaptation_rates,
    build_regressor,
    control_output,
    estimation_error,
    lyapunov_v,
)
from .design import DesignError, DesignReport, Scheme, design
from .lti import (
    FilterBank,
    Polynomial,
    StateSpace,
    VectorFilter,
    char_poly,
    is_hurwitz,
    realize_filter_bank,
    realize_wm,
)

log = logging.getLogger(__name__)

CSV_COLUMNS = ("t", "y", "y_m", "e", "u", "u_m", "theta_norm", "rho", "eps_over_m", "V")


@dataclass(frozen=True)
class RefInput:
    """Leader reference input ``v_m(t) = constant + sum a_i sin(w_i t)``."""

    constant: float = 0.0
    sines: tuple[tuple[float, float], ...] = ()

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        out = np.full(t.shape, float(self.constant))
        for a, w in self.sines:
            out = out + a * np.sin(w * t)
        return out if out.ndim else float(out)

    def describe(self) -> str:
        parts = []
        if self.constant or not self.sines:
            parts.append(f"const {self.constant:g}")
        if self.sines:
            parts.append("sines " + "; ".join(f"{a:g},{w:g}" for a, w in self.sines))
        return " + ".join(parts)


def ref_input(spec: RefInput, t):
    return spec(t)


@dataclass(frozen=True)
class Init:
    """Initial parameter estimate: either ``scale * nominal`` or an explicit value."""

    scale: Optional[float] = 1.0
    value: Optional[np.ndarray] = None

    @classmethod
    def of(cls, value) -> "Init":
        return cls(None, np.atleast_1d(np.asarray(value, dtype=float)))

    def resolve(self, nominal):
        if self.value is not None:
            return self.value.copy()
        return self.scale * np.asarray(nominal, dtype=float)


@dataclass(frozen=True, eq=False)
class Scenario:
    plant: StateSpace
    ref: StateSpace
    ref_input: RefInput
    scheme: Scheme
    pm: Polynomial
    sign_kp: int
    k1m: Optional[np.ndarray] = None
    lam: Optional[Polynomial] = None
    lambda_e: Optional[Polynomial] = None
    Gamma: float | np.ndarray = 1.0
    gamma: float = 1.0
    theta0: Init = Init()
    rho0: Init = Init()
    x0: Optional[np.ndarray] = None
    xm0: Optional[np.ndarray] = None
    horizon: float = 200.0
    dt: float = 1e-3
    adapt: bool = True

    def replace(self, **changes) -> "Scenario":
        return dataclasses.replace(self, **changes)

    @property
    def nsteps(self) -> int:
        return int(round(self.horizon / self.dt))

    @property
    def ref_closed(self) -> np.ndarray:
        k1m = np.zeros(self.ref.n) if self.k1m is None else self.k1m
        return self.ref.A + np.outer(self.ref.b, k1m)

    def validate(self) -> DesignReport:
        """Check the scenario's standing assumptions and return the nominal design."""
        if self.k1m is not None and np.shape(self.k1m) != (self.ref.n,):
            raise DesignError(f"k1m must have length {self.ref.n}", "dimension")
        for name, val, n in (("x0", self.x0, self.plant.n), ("xm0", self.xm0, self.ref.n)):
            if val is not None and np.shape(val) != (n,):
                raise DesignError(f"{name} must have length {n}", "dimension")
        if not (self.dt > 0 and self.horizon > 0):
            raise DesignError("dt and horizon must be positive", "sim")
        if not is_hurwitz(char_poly(self.ref_closed)):
            raise DesignError("leader closed loop A_m + b_m k1m^T is not Hurwitz", "A2")
        return design(self.scheme, self.plant, self.ref, self.pm, self.lam, self.lambda_e)


# ---------------------------------------------------------------------------
# Wiring
# ---------------------------------------------------------------------------


@dataclass(eq=False)
class Wiring:
    """Layout and linear structure of the closed loop for one scenario.

    With ``z`` the physical and filter states, every signal the controller
    sees is affine in ``(z, v_m)``: ``omega = Cw z + dw v_m`` and
    ``zdot = A0 z + bu u + bv v_m`` with ``u = theta^T omega``. The kernels
    only need these matrices plus the adaptive-law bookkeeping.
    """

    scenario: Scenario
    report: DesignReport
    gains: Gains
    theta0: np.ndarray
    rho0: float
    slices: dict[str, slice]
    N: int
    p: int
    n_star: int
    bank: Optional[FilterBank]
    bank_e: Optional[FilterBank]
    wm: VectorFilter
    A0: np.ndarray = field(repr=False)
    bu: np.ndarray = field(repr=False)
    bv: np.ndarray = field(repr=False)
    Cw: np.ndarray = field(repr=False)
    dw: np.ndarray = field(repr=False)
    cy: np.ndarray = field(repr=False)
    cym: np.ndarray = field(repr=False)
    cum: np.ndarray = field(repr=False)
    zeta_idx: np.ndarray = field(repr=False)
    xi_idx: int = 0

    @property
    def size(self) -> int:
        return self.N + self.p + 1

    def initial_state(self) -> np.ndarray:
        sc = self.scenario
        s = np.zeros(self.size)
        if sc.x0 is not None:
            s[self.slices["x"]] = sc.x0
        if sc.xm0 is not None:
            s[self.slices["x_m"]] = sc.xm0
        s[self.N: self.N + self.p] = self.theta0
        s[-1] = self.rho0
        return s

    def controller_view(self, state: np.ndarray) -> ControllerState:
        sl = self.slices
        return ControllerState(
            theta=state[self.N: self.N + self.p],
            rho=float(state[-1]),
            zeta=state[sl["zeta"]].reshape(self.p, self.n_star),
            xi=state[sl["xi"]],
            fb_u=state[sl["w1"]], fb_y=state[sl["w2"]],
            fb_um=state[sl["w_um"]], fb_ym=state[sl["w_ym"]],
        )

    def closed_loop_matrix(self, theta: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """``(A_cl, b_cl)`` of the linear part with ``theta`` frozen."""
        return (self.A0 + np.outer(self.bu, theta @ self.Cw),
                self.bv + self.bu * (theta @ self.dw))


def build_wiring(scenario: Scenario, report: Optional[DesignReport] = None) -> Wiring:
    if report is None:
        report = scenario.validate()
    sc = scenario
    scheme = sc.scheme
    plant, ref = sc.plant, sc.ref
    n, nm = plant.n, ref.n
    n_star = report.n_star
    p = scheme.p(n, nm)
    k1m = np.zeros(nm) if sc.k1m is None else np.asarray(sc.k1m, dtype=float)

    bank = realize_filter_bank(sc.lam) if not scheme.state_feedback else None
    bank_e = realize_filter_bank(sc.lambda_e) if not scheme.uses_xm else None
    wm = realize_wm(sc.pm, p)

    nf = 0 if bank is None else bank.dim
    nfe = 0 if bank_e is None else bank_e.dim
    sizes = [("x", n), ("x_m", nm), ("w1", nf), ("w2", nf), ("w_um", nfe), ("w_ym", nfe),
             ("zeta", p * n_star), ("xi", n_star)]
    slices, pos = {}, 0
    for name, size in sizes:
        slices[name] = slice(pos, pos + size)
        pos += size
    N = pos

    A0 = np.zeros((N, N))
    bu = np.zeros(N)
    bv = np.zeros(N)
    cy = np.zeros(N)
    cym = np.zeros(N)
    cum = np.zeros(N)
    sx, sm = slices["x"], slices["x_m"]
    cy[sx] = plant.c
    cym[sm] = ref.c
    cum[sm] = k1m

    A0[sx, sx] = plant.A
    bu[sx] = plant.b
    A0[sm, sm] = ref.A + np.outer(ref.b, k1m)
    bv[sm] = ref.b
    if bank is not None:
        s1, s2 = slices["w1"], slices["w2"]
        A0[s1, s1] = bank.A
        bu[s1] = bank.b
        A0[s2, s2] = bank.A
        A0[s2, sx] = np.outer(bank.b, plant.c)
    if bank_e is not None:
        s1, s2 = slices["w_um"], slices["w_ym"]
        A0[s1, s1] = bank_e.A
        A0[s1, sm] = np.outer(bank_e.b, k1m)
        bv[s1] = bank_e.b
        A0[s2, s2] = bank_e.A
        A0[s2, sm] = np.outer(bank_e.b, ref.c)

    # regressor rows, same order as build_regressor
    rows, drow = [], []

    def add_rows(mat, d=0.0):
        mat = np.atleast_2d(mat)
        for r in mat:
            rows.append(r)
            drow.append(d)

    def unit(sl):
        m = np.zeros((sl.stop - sl.start, N))
        m[:, sl] = np.eye(sl.stop - sl.start)
        return m

    if scheme.state_feedback:
        add_rows(unit(sx))
    else:
        add_rows(unit(slices["w1"]))
        add_rows(unit(slices["w2"]))
        add_rows(cy)
    if scheme.uses_xm:
        add_rows(unit(sm))
    else:
        add_rows(unit(slices["w_um"]))
        add_rows(unit(slices["w_ym"]))
        add_rows(cym)
    add_rows(cum, 1.0)
    Cw = np.array(rows)
    dw = np.array(drow)
    assert Cw.shape == (p, N)

    sz = slices["zeta"].start
    for i in range(p):
        blk = slice(sz + i * n_star, sz + (i + 1) * n_star)
        A0[blk, blk] = wm.A
        A0[blk, :] += np.outer(wm.b, Cw[i])
        bv[blk] += wm.b * dw[i]
    sxi = slices["xi"]
    A0[sxi, sxi] = wm.A
    bu[sxi] = wm.b
    zeta_idx = sz + n_star * np.arange(p)

    nominal = report.nominal
    G = sc.Gamma
    Gmat = np.asarray(G, dtype=float) * np.eye(p) if np.ndim(G) == 0 else np.asarray(G, dtype=float)
    gains = Gains(Gmat, float(sc.gamma), int(sc.sign_kp))
    theta0 = sc.theta0.resolve(nominal.theta_star)
    if theta0.shape != (p,):
        raise DesignError(f"theta0 must have length {p} for {scheme.name}", "dimension")
    rho0 = float(sc.rho0.resolve(nominal.rho_star).ravel()[0])

    return Wiring(sc, report, gains, theta0, rho0, slices, N, p, n_star, bank, bank_e, wm,
                  A0, bu, bv, Cw, dw, cy, cym, cum, zeta_idx.astype(np.int64),
                  int(sxi.start))


def closed_loop_rhs(state: np.ndarray, t: float, scenario: Scenario, wiring: Wiring) -> np.ndarray:
    """Time derivative of the full closed loop, assembled signal by signal.

    This is the readable reference route; the kernels evaluate the same
    thing from the wiring matrices.
    """
    w = wiring
    sl = w.slices
    plant, ref = scenario.plant, scenario.ref
    k1m = np.zeros(ref.n) if scenario.k1m is None else scenario.k1m
    x, x_m = state[sl["x"]], state[sl["x_m"]]
    cs = w.controller_view(state)

    v_m = float(scenario.ref_input(t))
    u_m = float(k1m @ x_m) + v_m
    y_m = float(ref.c @ x_m)
    dx_m = ref.A @ x_m + ref.b * u_m
    y = float(plant.c @ x)
    omega = build_regressor(scenario.scheme, x, y, x_m, y_m, u_m, cs)
    u = control_output(cs.theta, omega)
    dx = plant.A @ x + plant.b * u
    e = y - y_m
    zeta = VectorFilter.output(cs.zeta)
    eps, xi, m = estimation_error(e, cs.rho, cs.theta, zeta, float(cs.xi[0]))
    if scenario.adapt:
        dtheta, drho = adaptation_rates(eps, zeta, xi, m, w.gains)
    else:
        dtheta, drho = np.zeros(w.p), 0.0

    out = np.zeros_like(state)
    out[sl["x"]] = dx
    out[sl["x_m"]] = dx_m
    if w.bank is not None:
        out[sl["w1"]] = w.bank.deriv(cs.fb_u, u)
        out[sl["w2"]] = w.bank.deriv(cs.fb_y, y)
    if w.bank_e is not None:
        out[sl["w_um"]] = w.bank_e.deriv(cs.fb_um, u_m)
        out[sl["w_ym"]] = w.bank_e.deriv(cs.fb_ym, y_m)
    out[sl["zeta"]] = w.wm.deriv(cs.zeta, omega).ravel()
    out[sl["xi"]] = w.wm.deriv(cs.xi[None, :], np.array([u])).ravel()
    out[w.N: w.N + w.p] = dtheta
    out[-1] = drho
    return out


# ---------------------------------------------------------------------------
# Integration
# ---------------------------------------------------------------------------


def rk4(f: Callable, y0: np.ndarray, t0: float, dt: float, nsteps: int) -> np.ndarray:
    """Classic fixed-step RK4; returns the ``(nsteps+1, dim)`` trajectory."""
    y = np.array(y0, dtype=float)
    out = np.empty((nsteps + 1, y.size))
    out[0] = y
    for k in range(nsteps):
        t = t0 + k * dt
        k1 = f(t, y)
        k2 = f(t + 0.5 * dt, y + 0.5 * dt * k1)
        k3 = f(t + 0.5 * dt, y + 0.5 * dt * k2)
        k4 = f(t + dt, y + dt * k3)
        y = y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        out[k + 1] = y
    return out


@dataclass(eq=False)
class Trace:
    t: np.ndarray
    y: np.ndarray
    y_m: np.ndarray
    u: np.ndarray
    u_m: np.ndarray
    eps: np.ndarray
    m: np.ndarray
    theta: np.ndarray
    rho: np.ndarray
    V: np.ndarray
    diverged: bool = False
    scenario: Optional[Scenario] = None
    engine: str = ""

    @property
    def e(self) -> np.ndarray:
        return self.y - self.y_m

    @property
    def eps_over_m(self) -> np.ndarray:
        return self.eps / self.m

    @property
    def theta_norm(self) -> np.ndarray:
        return np.linalg.norm(self.theta, axis=1)

    def __len__(self) -> int:
        return len(self.t)

    def columns(self) -> dict[str, np.ndarray]:
        return {"t": self.t, "y": self.y, "y_m": self.y_m, "e": self.e, "u": self.u,
                "u_m": self.u_m, "theta_norm": self.theta_norm, "rho": self.rho,
                "eps_over_m": self.eps_over_m, "V": self.V}

    def to_csv(self, fh, stride: int = 1) -> None:
        if stride < 1:
            raise ValueError("stride must be >= 1")
        cols = self.columns()
        data = np.column_stack([cols[c] for c in CSV_COLUMNS])[::stride]
        np.savetxt(fh, data, fmt="%.17g", delimiter=",", header=",".join(CSV_COLUMNS),
                   comments="")


def _csr(mat: np.ndarray):
    m = sparse.csr_matrix(mat)
    return (m.indptr.astype(np.int64), m.indices.astype(np.int64),
            np.ascontiguousarray(m.data, dtype=float))


def integrate(scenario: Scenario, engine: str = "auto",
              wiring: Optional[Wiring] = None) -> Trace:
    """Fixed-step RK4 over ``[0, horizon]``; logs every step.

    ``engine`` is ``"auto"``, ``"compiled"``, ``"python"`` (both drive the
    wiring matrices) or ``"reference"`` (generic RK4 over
    :func:`closed_loop_rhs`; slow, meant for cross-checks).
    """
    w = build_wiring(scenario) if wiring is None else wiring
    K = scenario.nsteps
    dt = scenario.dt
    sig = np.zeros((K + 1, 6))
    th = np.zeros((K + 1, w.p))
    rho = np.zeros(K + 1)
    if engine == "reference":
        last = _integrate_reference(scenario, w, sig, th, rho)
        used = "reference"
    else:
        fn = kernel.get_engine(engine)
        used = "compiled" if fn is kernel.ENGINES.get("compiled") else "python"
        v = scenario.ref_input(0.5 * dt * np.arange(2 * K + 1))
        z0 = np.ascontiguousarray(w.initial_state()[: w.N])
        Gamma = w.gains.Gamma if scenario.adapt else np.zeros((w.p, w.p))
        gamma = w.gains.gamma if scenario.adapt else 0.0
        last = fn(z0, np.ascontiguousarray(w.theta0), w.rho0,
                  *_csr(w.A0), w.bu, w.bv, *_csr(w.Cw), w.dw,
                  w.cy, w.cym, w.cum, w.zeta_idx, w.xi_idx,
                  np.ascontiguousarray(Gamma), gamma, float(scenario.sign_kp),
                  np.ascontiguousarray(v, dtype=float), dt, K, sig, th, rho)
    diverged = last < K
    n = last + 1
    if diverged:
        log.warning("integration diverged at t=%.6g s", last * dt)
    t = dt * np.arange(n)
    with np.errstate(all="ignore"):
        V = lyapunov_v(th[:n], rho[:n], w.report.nominal, w.gains)
    return Trace(t, sig[:n, 0].copy(), sig[:n, 1].copy(), sig[:n, 2].copy(), sig[:n, 3].copy(),
                 sig[:n, 4].copy(), sig[:n, 5].copy(), th[:n].copy(), rho[:n].copy(), V,
                 diverged, scenario, used)


def _integrate_reference(sc: Scenario, w: Wiring, sig, th, rho) -> int:
    sl = w.slices
    k1m = np.zeros(sc.ref.n) if sc.k1m is None else sc.k1m

    def log_signals(k, s, t):
        cs = w.controller_view(s)
        x, x_m = s[sl["x"]], s[sl["x_m"]]
        v_m = float(sc.ref_input(t))
        u_m = float(k1m @ x_m) + v_m
        y, y_m = float(sc.plant.c @ x), float(sc.ref.c @ x_m)
        omega = build_regressor(sc.scheme, x, y, x_m, y_m, u_m, cs)
        eps, _, m = estimation_error(y - y_m, cs.rho, cs.theta,
                                     VectorFilter.output(cs.zeta), float(cs.xi[0]))
        sig[k] = (y, y_m, control_output(cs.theta, omega), u_m, eps, m)
        th[k] = cs.theta
        rho[k] = cs.rho

    s = w.initial_state()
    f = lambda t, y: closed_loop_rhs(y, t, sc, w)  # noqa: E731
    for k in range(sc.nsteps):
        log_signals(k, s, k * sc.dt)
        s = rk4(f, s, k * sc.dt, sc.dt, 1)[-1]
        if not np.all(np.isfinite(s)):
            return k
    log_signals(sc.nsteps, s, sc.nsteps * sc.dt)
    return sc.nsteps


# ---------------------------------------------------------------------------
# Diagnostics
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Metrics:
    tail_rms_e: float
    max_abs_e: float
    signal_bound_flags: dict
    V_violation_max: float
    L2_integral: float
    V0: float

    def summary(self) -> str:
        ok = all(self.signal_bound_flags.values())
        return (f"tail_rms_e={self.tail_rms_e:.6g} max_abs_e={self.max_abs_e:.6g} "
                f"V_violation_max={self.V_violation_max:.6g} L2_integral={self.L2_integral:.6g} "
                f"V0={self.V0:.6g} bounded={'yes' if ok else 'no'}")


def metrics(trace: Trace, tail_fraction: float = 0.2) -> Metrics:
    """Tracking and Lyapunov diagnostics of a finished trace."""
    e = trace.e
    n = len(trace)
    start = int(np.floor((1.0 - tail_fraction) * (n - 1)))
    tail = e[start:]
    with np.errstate(over="ignore", invalid="ignore"):
        tail_rms = float(np.sqrt(np.mean(tail ** 2))) if tail.size else 0.0
        em2 = trace.eps_over_m ** 2
    max_abs = float(np.max(np.abs(e))) if n else 0.0
    V = trace.V
    if n > 1 and np.all(np.isfinite(V)):
        dV = np.diff(V)
        v_viol = float(max(0.0, np.max(dV)))
    else:
        v_viol = 0.0 if n <= 1 else float("nan")
    l2 = float(np.trapezoid(em2, trace.t)) if n > 1 else 0.0
    V0 = float(V[0]) if n else 0.0
    ym = np.abs(trace.y_m)
    half = max(1, n // 2)
    flags = {
        "finite": (not trace.diverged) and bool(np.all(np.isfinite(
            np.column_stack([trace.y, trace.y_m, trace.u, trace.theta, trace.rho])))),
        "V_nonincreasing": bool(np.isfinite(v_viol) and v_viol < 1e-8),
        "ref_bounded": bool(n < 2 or ym[half:].max() <= 10.0 * max(ym[:half].max(), 1e-300)),
    }
    return Metrics(tail_rms, max_abs, flags, v_viol, l2, V0)
