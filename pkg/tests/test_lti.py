import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mracref.lti import (
    LTIError,
    Polynomial,
    RationalTF,
    StateSpace,
    UnobservableError,
    acker,
    char_poly,
    companion,
    derivative,
    is_hurwitz,
    leverrier,
    near_cancellations,
    place_observer_gain,
    realize_filter_bank,
    realize_wm,
    relative_degree,
    ss_from_tf,
    tf_from_ss,
)

from .conftest import DEN_AIR_5SF, NUM_AIR_5SF, aircraft, random_hurwitz


# ---------------------------------------------------------------------------
# Polynomials
# ---------------------------------------------------------------------------


def test_polynomial_trims_and_orders():
    p = Polynomial([1.0, 2.0, 0.0, 0.0])
    assert p.degree == 1
    assert np.array_equal(p.descending(), [2.0, 1.0])
    assert Polynomial.from_descending([1, 3, 2]) == Polynomial([2, 3, 1])
    assert Polynomial([0.0]).is_zero


def test_polynomial_arithmetic():
    p = Polynomial([1.0, 1.0])          # s + 1
    q = Polynomial([2.0, 1.0])          # s + 2
    assert p * q == Polynomial([2.0, 3.0, 1.0])
    assert (q - p) == Polynomial([1.0])
    assert 2 * p == Polynomial([2.0, 2.0])
    assert derivative(p * q) == Polynomial([3.0, 2.0])
    assert p(1j) == 1 + 1j


def test_from_roots_real():
    p = Polynomial.from_roots([-1, -2, -2])
    assert np.allclose(p.coeffs, [4, 8, 5, 1])


@pytest.mark.parametrize("coeffs, expected", [
    ([1, 1], True),                # s + 1
    ([2, 3, 1], True),             # (s+1)(s+2)
    ([1, 0, 1], False),            # s^2 + 1, marginal
    ([0, 1, 1], False),            # root at 0
    ([-1, 1], False),              # s - 1
    ([1, 1, 1, 1], False),         # roots on the imaginary axis
    ([8, 12, 6, 1], True),         # (s+2)^3
    ([1, -1, 1], False),
])
def test_is_hurwitz_examples(coeffs, expected):
    assert is_hurwitz(Polynomial(coeffs)) is expected


def test_is_hurwitz_needs_degree():
    with pytest.raises(LTIError):
        is_hurwitz(Polynomial([3.0]))


def test_routh_agrees_with_eigenvalues(rng):
    # random real polynomials, well away from the imaginary axis
    checked = 0
    while checked < 200:
        deg = int(rng.integers(1, 8))
        roots = []
        while len(roots) < deg:
            re = rng.uniform(-3, 3)
            if abs(re) < 0.05:
                continue
            if deg - len(roots) >= 2 and rng.random() < 0.5:
                im = rng.uniform(0.1, 3)
                roots += [complex(re, im), complex(re, -im)]
            else:
                roots.append(re)
        p = Polynomial.from_roots(roots) * float(rng.uniform(0.5, 4))
        expected = bool(np.all(np.real(p.roots()) < 0))
        assert is_hurwitz(p) is expected, p
        checked += 1


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(0.1, 5.0), min_size=1, max_size=6))
def test_products_of_stable_factors_are_hurwitz(rates):
    p = Polynomial([1.0])
    for r in rates:
        p = p * Polynomial([r, 1.0])
    assert is_hurwitz(p)
    assert not is_hurwitz(p * Polynomial([-0.5, 1.0]))


# ---------------------------------------------------------------------------
# State space and transfer functions
# ---------------------------------------------------------------------------


def test_leverrier_matches_numpy(rng):
    for n in range(1, 7):
        A = rng.normal(size=(n, n))
        char, M = leverrier(A)
        assert np.allclose(char[::-1], np.poly(A), rtol=1e-10, atol=1e-10)
        # adj(sI - A) = sum_k M[k] s^k
        s = 0.7 + 0.3j
        adj = sum(Mk * s ** k for k, Mk in enumerate(M))
        expected = np.linalg.det(s * np.eye(n) - A) * np.linalg.inv(s * np.eye(n) - A)
        assert np.allclose(adj, expected, rtol=1e-9, atol=1e-9)


def test_tf_from_ss_aircraft_against_printed_coefficients():
    tf = tf_from_ss(aircraft())
    assert tf.gain == pytest.approx(-0.022966, abs=1e-12)
    assert relative_degree(tf) == 2
    num = tf.gain * tf.num.coeffs
    # numerator: within half a unit of the last printed digit
    half_unit = np.array([5e-5, 5e-5, 5e-4])
    assert np.all(np.abs(num - NUM_AIR_5SF) <= half_unit)
    # denominator: the printed s^2 coefficient is not a correct rounding
    # (2.1744 vs 2.174655), so the bound is the 1e-3 relative input precision
    rel_den = np.abs(tf.den.coeffs - DEN_AIR_5SF) / np.abs(DEN_AIR_5SF)
    assert np.all(rel_den < 1e-3)


def test_tf_from_ss_frequency_response(rng):
    for _ in range(10):
        n = int(rng.integers(2, 6))
        sys = StateSpace(rng.normal(size=(n, n)), rng.normal(size=n), rng.normal(size=n))
        tf = tf_from_ss(sys)
        for s in (0.3j, 1 + 2j, 5j):
            assert tf(s) == pytest.approx(sys.freq_response(s), rel=1e-8)


def test_relative_degree_from_markov():
    A = np.array([[0.0, 1.0], [-2.0, -3.0]])
    assert StateSpace(A, [0.0, 1.0], [1.0, 0.0]).relative_degree() == 2
    assert StateSpace(A, [0.0, 1.0], [1.0, 1.0]).relative_degree() == 1
    with pytest.raises(LTIError):
        StateSpace(A, [0.0, 0.0], [1.0, 0.0]).relative_degree()


def test_ss_from_tf_round_trip():
    tf = RationalTF.from_coeffs(NUM_AIR_5SF, DEN_AIR_5SF)
    back = tf_from_ss(ss_from_tf(tf))
    assert back.gain == pytest.approx(tf.gain, rel=1e-14)
    assert np.allclose(back.num.coeffs, tf.num.coeffs, rtol=1e-12)
    assert np.allclose(back.den.coeffs, tf.den.coeffs, rtol=1e-12)


def test_near_cancellations_reported_not_cancelled():
    tf = RationalTF(1.0, Polynomial([1.0, 1.0]), Polynomial([1.0 + 1e-9, 1.0]) * Polynomial([2, 1]))
    assert len(near_cancellations(tf)) == 1
    assert tf.den.degree == 2


# ---------------------------------------------------------------------------
# Pole placement
# ---------------------------------------------------------------------------


def test_acker_places_poles(rng):
    for n in range(1, 6):
        A = rng.normal(size=(n, n))
        b = rng.normal(size=n)
        want = random_hurwitz(rng, n)
        k = acker(A, b, want)
        got = char_poly(A - np.outer(b, k))
        assert np.allclose(got.coeffs, want.coeffs, rtol=1e-8, atol=1e-8)


def test_acker_rejects_uncontrollable():
    A = np.diag([1.0, 2.0])
    with pytest.raises(UnobservableError):
        acker(A, np.array([1.0, 0.0]), Polynomial([2.0, 3.0, 1.0]))


def test_observer_gain_similarity_invariant(rng):
    # char(A22 - L A12) only depends on the pair up to similarity
    n = 3
    A22 = rng.normal(size=(n, n))
    A12 = rng.normal(size=n)
    want = Polynomial([8.0, 12.0, 6.0, 1.0])
    L = place_observer_gain(A22, A12, want)
    S = rng.normal(size=(n, n)) + 3 * np.eye(n)
    Si = np.linalg.inv(S)
    L2 = place_observer_gain(S @ A22 @ Si, A12 @ Si, want)
    assert np.allclose(L2, S @ L, rtol=1e-8, atol=1e-8)
    assert np.allclose(char_poly(A22 - np.outer(L, A12)).coeffs, want.coeffs, atol=1e-9)


# ---------------------------------------------------------------------------
# Filters
# ---------------------------------------------------------------------------


def test_companion_state_i_is_s_power_over_lambda():
    lam = Polynomial([8.0, 12.0, 6.0, 1.0])
    A, b = companion(lam)
    s = 0.4 + 1.1j
    x = np.linalg.solve(s * np.eye(3) - A, b)
    assert np.allclose(x, s ** np.arange(3) / lam(s))


def test_filter_bank_dc_gain():
    lam = Polynomial([8.0, 12.0, 6.0, 1.0])
    bank = realize_filter_bank(lam)
    dc = -np.linalg.solve(bank.A, bank.b)
    assert np.allclose(dc, [1 / 8, 0, 0], atol=1e-15)


def test_filter_bank_rejects_unstable():
    with pytest.raises(LTIError):
        realize_filter_bank(Polynomial([-1.0, 1.0]))
    with pytest.raises(LTIError):
        realize_wm(Polynomial([0.0, 1.0]), 2)


def test_wm_step_response_matches_convolution():
    # 1/(s+1)^2 has impulse response t e^{-t}; its step response is
    # 1 - (1 + t) e^{-t}
    wm = realize_wm(Polynomial([1.0, 2.0, 1.0]), 2)
    dt, T = 1e-3, 6.0
    state = np.zeros((2, 2))
    inp = np.array([1.0, 3.0])
    f = lambda x: wm.deriv(x, inp)  # noqa: E731
    for _ in range(int(T / dt)):
        k1 = f(state)
        k2 = f(state + 0.5 * dt * k1)
        k3 = f(state + 0.5 * dt * k2)
        k4 = f(state + dt * k3)
        state = state + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    expected = inp * (1 - (1 + T) * np.exp(-T))
    assert np.allclose(wm.output(state), expected, atol=1e-12)
