"""Adaptive controller pieces shared by all four schemes.

Every scheme has the same skeleton: ``u = theta^T omega``, an estimation
error ``eps = e + rho * xi`` built from ``W_m``-filtered signals, and the
normalized gradient laws for ``theta`` and ``rho``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .design import NominalDesign, Scheme

__all__ = [
    "Scheme", "Gains", "ControllerState", "build_regressor", "control_output",
    "estimation_error", "adaptation_rates", "lyapunov_v",
]


@dataclass(frozen=True, eq=False)
class Gains:
    """Adaptation gains: ``Gamma`` (SPD matrix), ``gamma`` > 0, known ``sign(k_p)``."""

    Gamma: np.ndarray
    gamma: float
    sign_kp: int

    def __post_init__(self):
        G = np.atleast_2d(np.asarray(self.Gamma, dtype=float))
        if G.shape[0] != G.shape[1] or not np.allclose(G, G.T, rtol=0, atol=1e-12 * np.abs(G).max()):
            raise ValueError("Gamma must be a symmetric square matrix")
        try:
            np.linalg.cholesky(G)
        except np.linalg.LinAlgError:
            raise ValueError("Gamma must be positive definite") from None
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")
        if self.sign_kp not in (-1, 1):
            raise ValueError("sign_kp must be +1 or -1")
        G.setflags(write=False)
        object.__setattr__(self, "Gamma", G)

    @classmethod
    def scalar(cls, g: float, p: int, gamma: float, sign_kp: int) -> "Gains":
        return cls(g * np.eye(p), gamma, sign_kp)

    @property
    def p(self) -> int:
        return self.Gamma.shape[0]


@dataclass
class ControllerState:
    """Mutable controller state for one closed loop.

    Filter banks not used by the scheme are empty arrays. ``zeta`` has one
    row per regressor entry (a ``W_m`` realization each); ``xi`` is the extra
    ``W_m`` channel fed with ``theta^T omega``.
    """

    theta: np.ndarray
    rho: float
    zeta: np.ndarray
    xi: np.ndarray
    fb_u: np.ndarray = field(default_factory=lambda: np.zeros(0))
    fb_y: np.ndarray = field(default_factory=lambda: np.zeros(0))
    fb_um: np.ndarray = field(default_factory=lambda: np.zeros(0))
    fb_ym: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @classmethod
    def zeros(cls, scheme: Scheme, n: int, n_ref: int, n_star: int,
              theta: np.ndarray, rho: float) -> "ControllerState":
        p = scheme.p(n, n_ref)
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (p,):
            raise ValueError(f"{scheme.name} needs theta of length {p}, got {theta.shape}")
        plant_f = 0 if scheme.state_feedback else n - 1
        ref_f = 0 if scheme.uses_xm else n_ref - 1
        return cls(theta.copy(), float(rho), np.zeros((p, n_star)), np.zeros(n_star),
                   np.zeros(plant_f), np.zeros(plant_f), np.zeros(ref_f), np.zeros(ref_f))


def build_regressor(scheme: Scheme, x: Optional[np.ndarray], y: float,
                    x_m: Optional[np.ndarray], y_m: float, u_m: float,
                    filters: ControllerState) -> np.ndarray:
    """Stack the regressor in the same order as the scheme's ``theta*``."""
    if scheme.state_feedback:
        if x is None:
            raise ValueError(f"{scheme.name} needs the plant state x")
        plant = [np.asarray(x, dtype=float)]
    else:
        plant = [filters.fb_u, filters.fb_y, [y]]
    if scheme.uses_xm:
        if x_m is None:
            raise ValueError(f"{scheme.name} needs the reference state x_m")
        ref = [np.asarray(x_m, dtype=float), [u_m]]
    else:
        ref = [filters.fb_um, filters.fb_ym, [y_m], [u_m]]
    return np.concatenate([np.ravel(np.asarray(v, dtype=float)) for v in plant + ref])


def control_output(theta: np.ndarray, omega: np.ndarray) -> float:
    if theta.shape != omega.shape:
        raise ValueError(f"theta {theta.shape} and omega {omega.shape} disagree")
    return float(theta @ omega)


def estimation_error(e: float, rho: float, theta: np.ndarray, zeta: np.ndarray,
                     wm_theta_omega: float) -> tuple[float, float, float]:
    """Return ``(eps, xi, m)``.

    ``wm_theta_omega`` is the output of the dedicated ``W_m`` channel driven
    by ``theta^T omega``; the difference to ``theta^T zeta`` is the swap term.
    """
    xi = float(theta @ zeta) - wm_theta_omega
    eps = e + rho * xi
    m = float(np.sqrt(1.0 + zeta @ zeta + xi * xi))
    return eps, xi, m


def adaptation_rates(eps: float, zeta: np.ndarray, xi: float, m: float,
                     gains: Gains) -> tuple[np.ndarray, float]:
    m2 = m * m
    theta_dot = -(gains.sign_kp * eps / m2) * (gains.Gamma @ zeta)
    rho_dot = -gains.gamma * xi * eps / m2
    return theta_dot, rho_dot


def lyapunov_v(theta, rho, nominal: NominalDesign, gains: Gains):
    """``|rho*| tt^T Gamma^-1 tt + (rho - rho*)^2 / gamma``; vectorised over rows of ``theta``."""
    theta = np.asarray(theta, dtype=float)
    tt = theta - nominal.theta_star
    Ginv_tt = np.linalg.solve(gains.Gamma, tt.T).T
    quad = np.sum(tt * Ginv_tt, axis=-1)
    rt = np.asarray(rho, dtype=float) - nominal.rho_star
    return abs(nominal.rho_star) * quad + rt * rt / gains.gamma
