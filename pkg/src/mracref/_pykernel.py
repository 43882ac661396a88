"""Pure-Python (numpy) closed-loop RK4 kernel.

Mirrors ``_ckernel.pyx`` argument for argument; used when the compiled
extension is unavailable and as its cross-check in the tests.
"""

import numpy as np


def _dense(ptr, idx, val, rows, cols):
    out = np.zeros((rows, cols))
    for r in range(rows):
        for k in range(ptr[r], ptr[r + 1]):
            out[r, idx[k]] += val[k]
    return out


def rk4_closed_loop(z0, theta0, rho0,
                    a_ptr, a_idx, a_val, bu, bv,
                    w_ptr, w_idx, w_val, dw,
                    cy, cym, cum, zeta_idx, xi_idx,
                    Gamma, gamma, sign_kp,
                    v, dt, nsteps,
                    out_sig, out_theta, out_rho):
    """Integrate ``nsteps`` RK4 steps; return the index of the last finite sample.

    ``v`` holds the exogenous input on the half-step grid (length
    ``2*nsteps + 1``). ``out_sig`` columns are ``y, y_m, u, u_m, eps, m``.
    """
    N = len(z0)
    p = len(theta0)
    # one product gives A0 z, Cw z, the zeta outputs, xi, y, y_m and u_m - v
    sel = np.zeros((p + 1, N))
    sel[np.arange(p), np.asarray(zeta_idx)] = 1.0
    sel[p, xi_idx] = 1.0
    M = np.vstack([_dense(a_ptr, a_idx, a_val, N, N), _dense(w_ptr, w_idx, w_val, p, N),
                   sel, cy, cym, cum])
    o_w, o_z, o_xi, o_y = N, N + p, N + 2 * p, N + 2 * p + 1
    dw = np.asarray(dw, dtype=float)
    bu = np.asarray(bu, dtype=float)
    bv = np.asarray(bv, dtype=float)
    G = -float(sign_kp) * np.asarray(Gamma, dtype=float)
    S = N + p + 1

    def rhs(x, vv, sig=None):
        z, th, rho = x[:N], x[N:N + p], x[-1]
        mz = M @ z
        u = th @ (mz[o_w:o_z] + dw * vv)
        zeta = mz[o_z:o_xi]
        xi = th @ zeta - mz[o_xi]
        eps = mz[o_y] - mz[o_y + 1] + rho * xi
        m2 = 1.0 + zeta @ zeta + xi * xi
        k = eps / m2
        out = np.empty(S)
        out[:N] = mz[:N] + bu * u + bv * vv
        out[N:N + p] = (k * G) @ zeta
        out[-1] = -gamma * xi * k
        if sig is not None:
            sig[:] = (mz[o_y], mz[o_y + 1], u, mz[o_y + 2] + vv, eps, np.sqrt(m2))
        return out

    x = np.concatenate([np.asarray(z0, dtype=float), np.asarray(theta0, dtype=float),
                        [float(rho0)]])
    with np.errstate(over="ignore", invalid="ignore"):
        h, h2, h6 = dt, 0.5 * dt, dt / 6.0
        for k in range(nsteps):
            out_theta[k] = x[N:N + p]
            out_rho[k] = x[-1]
            vh = v[2 * k + 1]
            k1 = rhs(x, v[2 * k], out_sig[k])
            k2 = rhs(x + h2 * k1, vh)
            k3 = rhs(x + h2 * k2, vh)
            k4 = rhs(x + h * k3, v[2 * k + 2])
            x = x + h6 * (k1 + 2.0 * (k2 + k3) + k4)
            if not np.isfinite(x).all():
                return k
        out_theta[nsteps] = x[N:N + p]
        out_rho[nsteps] = x[-1]
        rhs(x, v[2 * nsteps], out_sig[nsteps])
    return nsteps
