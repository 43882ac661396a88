from pathlib import Path

import numpy as np
import pytest

from mracref import Init, Polynomial, RefInput, Scenario, Scheme, StateSpace

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"

# Longitudinal aircraft model shared by leader and follower.
A_AIR = np.array([
    [-0.026373, 0.12687, -12.926, -32.169],
    [-0.25009, -0.80174, 220.55, -0.16307],
    [0.000171, -0.00754, -0.5510, -0.000334],
    [0.0, 0.0, 1.0, 0.0],
])
B_AIR = np.array([0.010887, -0.18577, -0.022966, 0.0])
C_AIR = np.array([0.0, 0.0, 0.0, 1.0])
K1M_AIR = np.array([0.003614, -0.306976, 262.056954, 999.941914])

# Transfer function at five significant figures (ascending coefficients).
NUM_AIR_5SF = [-0.0012, -0.0176, -0.023]
DEN_AIR_5SF = [0.0651, 0.0989, 2.1744, 1.3791, 1.0]

PM_AIR = Polynomial([1.0, 2.0, 1.0])            # (s+1)^2
LAMBDA_AIR = Polynomial([8.0, 12.0, 6.0, 1.0])  # (s+2)^3


def aircraft() -> StateSpace:
    return StateSpace(A_AIR, B_AIR, C_AIR)


def aircraft_scenario(scheme=Scheme.OFB_YM, **kw) -> Scenario:
    base = dict(plant=aircraft(), ref=aircraft(), ref_input=RefInput(300.0), scheme=scheme,
                pm=PM_AIR, sign_kp=-1, k1m=K1M_AIR, lam=LAMBDA_AIR, lambda_e=LAMBDA_AIR,
                Gamma=5.0, gamma=5.0, theta0=Init(1.1), rho0=Init(1.1),
                horizon=200.0, dt=1e-3)
    base.update(kw)
    return Scenario(**base)


@pytest.fixture
def air():
    return aircraft()


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)


def random_hurwitz(rng, degree, low=0.5, high=3.0) -> Polynomial:
    """Monic Hurwitz polynomial with real or complex-pair roots in the left half plane."""
    roots = []
    while len(roots) < degree:
        if degree - len(roots) >= 2 and rng.random() < 0.4:
            re, im = -rng.uniform(low, high), rng.uniform(0.2, 2.0)
            roots += [complex(re, im), complex(re, -im)]
        else:
            roots.append(-rng.uniform(low, high))
    return Polynomial.from_roots(roots)
