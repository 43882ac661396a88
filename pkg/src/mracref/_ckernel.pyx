# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled closed-loop RK4 kernel (same contract as ``_pykernel``)."""

import numpy as np
from libc.math cimport sqrt, isfinite


cdef struct Problem:
    int N
    int p
    const long* a_ptr
    const long* a_idx
    const double* a_val
    const double* bu
    const double* bv
    const long* w_ptr
    const long* w_idx
    const double* w_val
    const double* dw
    const double* cy
    const double* cym
    const double* cum
    const long* zeta_idx
    long xi_idx
    const double* Gamma
    double gamma
    double sgn
    double* omega
    double* zeta


cdef inline double dot(const double* a, const double* b, int n) noexcept nogil:
    cdef double s = 0.0
    cdef int i
    for i in range(n):
        s += a[i] * b[i]
    return s


cdef void rhs(Problem* P, const double* z, const double* th, double rho, double vv,
              double* dz, double* dth, double* drho, double* sig) noexcept nogil:
    cdef int N = P.N, p = P.p
    cdef int i, k
    cdef double acc, u, xi, eps, m2, g, y, ym
    for i in range(p):
        acc = P.dw[i] * vv
        for k in range(P.w_ptr[i], P.w_ptr[i + 1]):
            acc += P.w_val[k] * z[P.w_idx[k]]
        P.omega[i] = acc
    u = dot(th, P.omega, p)
    for i in range(N):
        acc = P.bu[i] * u + P.bv[i] * vv
        for k in range(P.a_ptr[i], P.a_ptr[i + 1]):
            acc += P.a_val[k] * z[P.a_idx[k]]
        dz[i] = acc
    for i in range(p):
        P.zeta[i] = z[P.zeta_idx[i]]
    xi = dot(th, P.zeta, p) - z[P.xi_idx]
    y = dot(P.cy, z, N)
    ym = dot(P.cym, z, N)
    eps = y - ym + rho * xi
    m2 = 1.0 + dot(P.zeta, P.zeta, p) + xi * xi
    g = eps / m2
    for i in range(p):
        dth[i] = -P.sgn * g * dot(&P.Gamma[i * p], P.zeta, p)
    drho[0] = -P.gamma * xi * g
    if sig != NULL:
        sig[0] = y
        sig[1] = ym
        sig[2] = u
        sig[3] = dot(P.cum, z, N) + vv
        sig[4] = eps
        sig[5] = sqrt(m2)


def rk4_closed_loop(double[::1] z0, double[::1] theta0, double rho0,
                    const long[::1] a_ptr, const long[::1] a_idx, const double[::1] a_val,
                    const double[::1] bu, const double[::1] bv,
                    const long[::1] w_ptr, const long[::1] w_idx, const double[::1] w_val,
                    const double[::1] dw,
                    const double[::1] cy, const double[::1] cym, const double[::1] cum,
                    const long[::1] zeta_idx, long xi_idx,
                    const double[:, ::1] Gamma, double gamma, double sign_kp,
                    const double[::1] v, double dt, long nsteps,
                    double[:, ::1] out_sig, double[:, ::1] out_theta, double[::1] out_rho):
    cdef int N = z0.shape[0]
    cdef int p = theta0.shape[0]
    cdef int S = N + p + 1
    cdef double[::1] scratch = np.zeros(2 * p)
    # stage buffers: state, 4 slopes, trial point; layout [z | theta | rho]
    cdef double[:, ::1] buf = np.zeros((6, S))
    cdef Problem P
    P.N = N
    P.p = p
    P.a_ptr = &a_ptr[0]
    P.a_idx = &a_idx[0] if a_idx.shape[0] else NULL
    P.a_val = &a_val[0] if a_val.shape[0] else NULL
    P.bu = &bu[0]
    P.bv = &bv[0]
    P.w_ptr = &w_ptr[0]
    P.w_idx = &w_idx[0] if w_idx.shape[0] else NULL
    P.w_val = &w_val[0] if w_val.shape[0] else NULL
    P.dw = &dw[0]
    P.cy = &cy[0]
    P.cym = &cym[0]
    P.cum = &cum[0]
    P.zeta_idx = &zeta_idx[0]
    P.xi_idx = xi_idx
    P.Gamma = &Gamma[0, 0]
    P.gamma = gamma
    P.sgn = sign_kp
    P.omega = &scratch[0]
    P.zeta = &scratch[p]

    cdef double* x = &buf[0, 0]
    cdef double* k1 = &buf[1, 0]
    cdef double* k2 = &buf[2, 0]
    cdef double* k3 = &buf[3, 0]
    cdef double* k4 = &buf[4, 0]
    cdef double* xt = &buf[5, 0]
    cdef long k
    cdef int i
    cdef double h = dt, h2 = 0.5 * dt, h6 = dt / 6.0
    cdef bint ok = True
    cdef long last = nsteps

    for i in range(N):
        x[i] = z0[i]
    for i in range(p):
        x[N + i] = theta0[i]
    x[N + p] = rho0

    with nogil:
        for k in range(nsteps):
            for i in range(p):
                out_theta[k, i] = x[N + i]
            out_rho[k] = x[N + p]
            rhs(&P, x, &x[N], x[N + p], v[2 * k], k1, &k1[N], &k1[N + p], &out_sig[k, 0])
            for i in range(S):
                xt[i] = x[i] + h2 * k1[i]
            rhs(&P, xt, &xt[N], xt[N + p], v[2 * k + 1], k2, &k2[N], &k2[N + p], NULL)
            for i in range(S):
                xt[i] = x[i] + h2 * k2[i]
            rhs(&P, xt, &xt[N], xt[N + p], v[2 * k + 1], k3, &k3[N], &k3[N + p], NULL)
            for i in range(S):
                xt[i] = x[i] + h * k3[i]
            rhs(&P, xt, &xt[N], xt[N + p], v[2 * k + 2], k4, &k4[N], &k4[N + p], NULL)
            for i in range(S):
                x[i] = x[i] + h6 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
                if not isfinite(x[i]):
                    ok = False
            if not ok:
                last = k
                break
    if not ok:
        return last
    with nogil:
        for i in range(p):
            out_theta[nsteps, i] = x[N + i]
        out_rho[nsteps] = x[N + p]
        rhs(&P, x, &x[N], x[N + p], v[2 * nsteps], k1, &k1[N], &k1[N + p], &out_sig[nsteps, 0])
    return last
