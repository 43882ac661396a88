"""SISO linear time-invariant building blocks.

Polynomials are stored with ascending coefficients (``coeffs[i]`` multiplies
``s**i``). Descending order only appears at I/O boundaries, e.g. when
printing a transfer function the way a control textbook would.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from numpy.polynomial import polynomial as npoly

log = logging.getLogger(__name__)

ROUTH_EPS = 1e-12
MARKOV_ZERO_TOL = 1e-10
ACKER_COND_WARN = 1e12


class LTIError(ValueError):
    """Malformed or degenerate LTI data."""


class DegeneratePlantError(LTIError):
    """Transfer function is identically zero."""


class UnobservableError(LTIError):
    """Pole placement requested on an uncontrollable/unobservable pair."""


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float)
    arr.setflags(write=False)
    return arr


# ---------------------------------------------------------------------------
# Polynomials
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Polynomial:
    """Real polynomial with ascending coefficients."""

    coeffs: np.ndarray

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.coeffs, dtype=float))
        if c.ndim != 1:
            raise LTIError("polynomial coefficients must be a 1-D sequence")
        nz = np.flatnonzero(c)
        c = c[: nz[-1] + 1] if nz.size else np.zeros(1)
        object.__setattr__(self, "coeffs", _frozen(c))

    @classmethod
    def from_roots(cls, roots: Sequence[complex]) -> "Polynomial":
        return cls(np.real(npoly.polyfromroots(roots)))

    @classmethod
    def from_descending(cls, coeffs: Sequence[float]) -> "Polynomial":
        return cls(np.asarray(coeffs, dtype=float)[::-1])

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    @property
    def is_zero(self) -> bool:
        return self.degree == 0 and self.coeffs[0] == 0.0

    @property
    def leading(self) -> float:
        return float(self.coeffs[-1])

    @property
    def is_monic(self) -> bool:
        return self.leading == 1.0

    def monic(self) -> "Polynomial":
        if self.is_zero:
            raise LTIError("zero polynomial has no monic normalisation")
        return Polynomial(self.coeffs / self.leading)

    def descending(self) -> np.ndarray:
        return self.coeffs[::-1].copy()

    def roots(self) -> np.ndarray:
        return npoly.polyroots(self.coeffs) if self.degree > 0 else np.zeros(0)

    def __add__(self, other: "Polynomial") -> "Polynomial":
        return add(self, other)

    def __sub__(self, other: "Polynomial") -> "Polynomial":
        return add(self, scale(other, -1.0))

    def __mul__(self, other) -> "Polynomial":
        if isinstance(other, Polynomial):
            return mul(self, other)
        return scale(self, float(other))

    __rmul__ = __mul__

    def __call__(self, s):
        return evaluate(self, s)

    def __eq__(self, other) -> bool:
        return isinstance(other, Polynomial) and np.array_equal(self.coeffs, other.coeffs)

    def __hash__(self):
        return hash(self.coeffs.tobytes())

    def __repr__(self) -> str:
        return f"Polynomial({self.coeffs.tolist()})"


def add(p: Polynomial, q: Polynomial) -> Polynomial:
    return Polynomial(npoly.polyadd(p.coeffs, q.coeffs))


def scale(p: Polynomial, k: float) -> Polynomial:
    return Polynomial(p.coeffs * k)


def mul(p: Polynomial, q: Polynomial) -> Polynomial:
    return Polynomial(npoly.polymul(p.coeffs, q.coeffs))


def evaluate(p: Polynomial, s):
    """Horner evaluation; accepts scalars or arrays, real or complex."""
    return npoly.polyval(s, p.coeffs)


def derivative(p: Polynomial) -> Polynomial:
    if p.degree == 0:
        return Polynomial([0.0])
    return Polynomial(npoly.polyder(p.coeffs))


def is_hurwitz(p: Polynomial) -> bool:
    """Routh-Hurwitz test: True iff every root has strictly negative real part.

    A first-column entry with magnitude below ``ROUTH_EPS`` (relative to the
    largest coefficient) counts as zero, and zeros are rejected. Marginal
    polynomials are therefore never reported as Hurwitz.
    """
    if p.is_zero:
        raise LTIError("zero polynomial")
    if p.degree < 1:
        raise LTIError("Routh test needs degree >= 1")
    c = p.descending() / p.leading
    tol = ROUTH_EPS * np.max(np.abs(c))
    if np.any(c <= tol):
        # all coefficients of a Hurwitz polynomial share the leading sign
        return False
    n = p.degree
    width = n // 2 + 1
    prev = np.zeros(width)
    cur = np.zeros(width)
    prev[: len(c[0::2])] = c[0::2]
    cur[: len(c[1::2])] = c[1::2]
    for _ in range(n - 1):
        pivot = cur[0]
        if pivot <= tol:
            return False
        nxt = np.zeros(width)
        nxt[:-1] = prev[1:] - prev[0] / pivot * cur[1:]
        prev, cur = cur, nxt
    return bool(cur[0] > tol)


# ---------------------------------------------------------------------------
# Transfer functions and state space
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class RationalTF:
    """SISO transfer function ``gain * num(s) / den(s)`` with monic num and den."""

    gain: float
    num: Polynomial
    den: Polynomial

    def __post_init__(self):
        if not (self.num.is_monic and self.den.is_monic):
            raise LTIError("numerator and denominator must be monic")
        if self.num.degree > self.den.degree:
            raise LTIError("improper transfer function")
        if self.gain == 0.0:
            raise DegeneratePlantError("zero high-frequency gain")

    @classmethod
    def from_coeffs(cls, num, den) -> "RationalTF":
        """Build from ascending, not necessarily monic, coefficient lists."""
        n, d = Polynomial(num), Polynomial(den)
        if n.is_zero:
            raise DegeneratePlantError("zero numerator")
        return cls(n.leading / d.leading, n.monic(), d.monic())

    @property
    def relative_degree(self) -> int:
        return relative_degree(self)

    def __call__(self, s):
        return self.gain * evaluate(self.num, s) / evaluate(self.den, s)

    def __repr__(self) -> str:
        return f"RationalTF(gain={self.gain!r}, num={self.num!r}, den={self.den!r})"


def relative_degree(tf: RationalTF) -> int:
    return tf.den.degree - tf.num.degree


@dataclass(frozen=True, eq=False)
class StateSpace:
    """``xdot = A x + b u``, ``y = c x``."""

    A: np.ndarray
    b: np.ndarray
    c: np.ndarray

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        b = np.atleast_1d(np.asarray(self.b, dtype=float)).ravel()
        c = np.atleast_1d(np.asarray(self.c, dtype=float)).ravel()
        n = A.shape[0]
        if n < 1 or A.shape != (n, n) or b.shape != (n,) or c.shape != (n,):
            raise LTIError(f"inconsistent dimensions A{A.shape} b{b.shape} c{c.shape}")
        object.__setattr__(self, "A", _frozen(A))
        object.__setattr__(self, "b", _frozen(b))
        object.__setattr__(self, "c", _frozen(c))

    @property
    def n(self) -> int:
        return self.A.shape[0]

    def markov(self, count: int) -> np.ndarray:
        """``c A^i b`` for ``i = 0 .. count-1``."""
        out = np.empty(count)
        v = self.b.copy()
        for i in range(count):
            out[i] = self.c @ v
            v = self.A @ v
        return out

    def markov_zero_tol(self, i: int) -> float:
        return (MARKOV_ZERO_TOL * max(1.0, np.linalg.norm(self.A, 2)) ** i
                * np.linalg.norm(self.b) * np.linalg.norm(self.c))

    def relative_degree(self) -> int:
        """Index of the first Markov parameter above the zero threshold, plus one."""
        mk = self.markov(self.n)
        for i, h in enumerate(mk):
            if abs(h) > self.markov_zero_tol(i):
                return i + 1
        raise DegeneratePlantError("c (sI - A)^-1 b is identically zero")

    def freq_response(self, s) -> np.ndarray:
        s = np.atleast_1d(s)
        eye = np.eye(self.n)
        return np.array([self.c @ np.linalg.solve(si * eye - self.A, self.b) for si in s])


def leverrier(A: np.ndarray) -> tuple[np.ndarray, list[np.ndarray]]:
    """Faddeev-LeVerrier: characteristic polynomial and adjugate coefficients.

    Returns ``(char, M)`` with ``char`` ascending (monic, length n+1) and
    ``adj(sI - A) = sum_k M[k] s**k`` for ``k = 0 .. n-1``.
    """
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    char = np.zeros(n + 1)
    char[n] = 1.0
    M = [None] * n
    Mk = np.eye(n)
    for k in range(1, n + 1):
        M[n - k] = Mk
        AM = A @ Mk
        char[n - k] = -np.trace(AM) / k
        Mk = AM + char[n - k] * np.eye(n)
    return char, M


def char_poly(A: np.ndarray) -> Polynomial:
    return Polynomial(leverrier(A)[0])


def tf_from_ss(sys: StateSpace) -> RationalTF:
    """Transfer function of ``sys`` without pole-zero cancellation."""
    n_star = sys.relative_degree()
    char, M = leverrier(sys.A)
    num = np.array([sys.c @ Mk @ sys.b for Mk in M])
    deg = sys.n - n_star
    num = num[: deg + 1]
    # leading coefficient equals the first nonzero Markov parameter exactly
    kp = float(sys.markov(n_star)[-1])
    num[-1] = kp
    return RationalTF(kp, Polynomial(num / kp), Polynomial(char))


def near_cancellations(tf: RationalTF, tol: float = 1e-6) -> list[tuple[complex, complex]]:
    """Pole/zero pairs closer than ``tol``; reported, never cancelled."""
    zs, ps = tf.num.roots(), tf.den.roots()
    return [(z, p) for z in zs for p in ps if abs(z - p) < tol]


def companion(p: Polynomial) -> tuple[np.ndarray, np.ndarray]:
    """Controllable companion form of ``1/p(s)`` with monic ``p``.

    State ``i`` carries ``s**i / p(s)`` applied to the input.
    """
    if not p.is_monic:
        raise LTIError("companion form needs a monic polynomial")
    m = p.degree
    A = np.zeros((m, m))
    A[:-1, 1:] = np.eye(m - 1)
    A[-1, :] = -p.coeffs[:-1]
    b = np.zeros(m)
    b[-1] = 1.0
    return A, b


def ss_from_tf(tf: RationalTF) -> StateSpace:
    """Controllable canonical realization of ``tf`` (strictly proper only)."""
    if relative_degree(tf) < 1:
        raise LTIError("realization needs a strictly proper transfer function")
    A, b = companion(tf.den)
    c = np.zeros(tf.den.degree)
    c[: tf.num.degree + 1] = tf.gain * tf.num.coeffs
    return StateSpace(A, b, c)


def ctrb(A: np.ndarray, b: np.ndarray) -> np.ndarray:
    n = A.shape[0]
    cols = [b]
    for _ in range(n - 1):
        cols.append(A @ cols[-1])
    return np.column_stack(cols)


def poly_of_matrix(p: Polynomial, A: np.ndarray) -> np.ndarray:
    n = A.shape[0]
    out = np.zeros_like(A, dtype=float)
    for coef in p.coeffs[::-1]:
        out = out @ A + coef * np.eye(n)
    return out


def acker(A: np.ndarray, b: np.ndarray, desired: Polynomial) -> np.ndarray:
    """Ackermann's formula: gain ``k`` with ``char(A - b k^T) == desired``."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.atleast_1d(np.asarray(b, dtype=float)).ravel()
    n = A.shape[0]
    if desired.degree != n or not desired.is_monic:
        raise LTIError(f"desired polynomial must be monic of degree {n}")
    C = ctrb(A, b)
    cond = np.linalg.cond(C)
    if not np.isfinite(cond) or cond > 1e16:
        raise UnobservableError(f"pair is not controllable (cond={cond:.3g})")
    if cond > ACKER_COND_WARN:
        log.warning("Ackermann: controllability matrix condition number %.3g", cond)
    else:
        log.debug("Ackermann: controllability matrix condition number %.3g", cond)
    en = np.zeros(n)
    en[-1] = 1.0
    # row vector e_n^T C^-1, via a partial-pivot solve on C^T
    row = np.linalg.solve(C.T, en)
    return row @ poly_of_matrix(desired, A)


def place_observer_gain(A22, A12, desired: Polynomial) -> np.ndarray:
    """Gain ``L`` with ``char(A22 - L A12) == desired`` (Ackermann on the dual pair)."""
    A22 = np.atleast_2d(np.asarray(A22, dtype=float))
    A12 = np.atleast_1d(np.asarray(A12, dtype=float)).ravel()
    if A12.shape != (A22.shape[0],):
        raise LTIError("A12 must be a row of length dim(A22)")
    return acker(A22.T, A12, desired)


# ---------------------------------------------------------------------------
# Filter realizations
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class FilterBank:
    """``a(s)/Lambda(s)`` filter: state ``i`` equals ``s**i/Lambda(s)[input]``."""

    poly: Polynomial
    A: np.ndarray = field(init=False)
    b: np.ndarray = field(init=False)

    def __post_init__(self):
        A, b = companion(self.poly)
        object.__setattr__(self, "A", _frozen(A))
        object.__setattr__(self, "b", _frozen(b))

    @property
    def dim(self) -> int:
        return self.poly.degree

    def deriv(self, state: np.ndarray, inp: float) -> np.ndarray:
        return self.A @ state + self.b * inp


def realize_filter_bank(lam: Polynomial) -> FilterBank:
    if lam.degree < 1 or not lam.is_monic:
        raise LTIError("filter polynomial must be monic with degree >= 1")
    if not is_hurwitz(lam):
        raise LTIError(f"filter polynomial {lam!r} is not Hurwitz")
    return FilterBank(lam)


@dataclass(frozen=True, eq=False)
class VectorFilter:
    """``q`` parallel copies of ``W_m(s) = 1/P_m(s)``; state shape ``(q, deg P_m)``."""

    pm: Polynomial
    q: int
    A: np.ndarray = field(init=False)
    b: np.ndarray = field(init=False)

    def __post_init__(self):
        A, b = companion(self.pm)
        object.__setattr__(self, "A", _frozen(A))
        object.__setattr__(self, "b", _frozen(b))

    @property
    def order(self) -> int:
        return self.pm.degree

    @property
    def dim(self) -> int:
        return self.q * self.order

    def deriv(self, state: np.ndarray, inp: np.ndarray) -> np.ndarray:
        # state is (q, order); channel output is column 0
        return state @ self.A.T + np.outer(inp, self.b)

    @staticmethod
    def output(state: np.ndarray) -> np.ndarray:
        return state[..., 0]


def realize_wm(pm: Polynomial, q: int) -> VectorFilter:
    if q < 1:
        raise LTIError("need at least one channel")
    if pm.degree < 1 or not pm.is_monic:
        raise LTIError("P_m must be monic with degree >= 1")
    if not is_hurwitz(pm):
        raise LTIError(f"P_m {pm!r} is not Hurwitz")
    return VectorFilter(pm, q)
