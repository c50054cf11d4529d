# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled core of the theta-scheme time stepper.

Runs the per-step loop (explicit strain update, strain gradient, implicit
tridiagonal density solve with a prefactored Thomas sweep, residual and
negativity bookkeeping) without returning to Python. The pure-numpy loop
in evolve.py computes the same scheme and is the fallback when this
module is not built.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport fabs, isfinite, sqrt

cnp.import_array()


cdef inline double poly_eval(const double[:, ::1] C, double e, double m) noexcept nogil:
    cdef Py_ssize_t i, j
    cdef double acc = 0.0
    cdef double inner
    for i in range(C.shape[0] - 1, -1, -1):
        inner = 0.0
        for j in range(C.shape[1] - 1, -1, -1):
            inner = inner * m + C[i, j]
        acc = acc * e + inner
    return acc


cdef inline double reaction(const double[:, ::1] C, double e, double m,
                            double M_eps, double M_m) noexcept nogil:
    if fabs(e) <= M_eps and fabs(m) <= M_m:
        return poly_eval(C, e, m)
    return 0.0


cdef inline double psi_density(double e, double m, double a, double b,
                               double p, double alpha) noexcept nogil:
    cdef double quart = alpha / 12.0 * m * m * (3.0 * m * m - 8.0 * b * e * m
                                                + 6.0 * b * b * e * e)
    cdef double w = m - b * e
    return quart + p * e + 0.5 * e * e + 0.5 * a * w * w


def thomas_factor(double[::1] diag, double off, Py_ssize_t n):
    """Prefactor the constant tridiagonal system (diag, off symmetric)."""
    dp = np.empty(n)
    w = np.empty(n)
    cdef double[::1] dp_v = dp
    cdef double[::1] w_v = w
    cdef Py_ssize_t i
    dp_v[0] = diag[0]
    w_v[0] = 0.0
    for i in range(1, n):
        w_v[i] = off / dp_v[i - 1]
        dp_v[i] = diag[i] - w_v[i] * off
        if fabs(dp_v[i]) < 1e-300:
            raise ZeroDivisionError(f"zero pivot in tridiagonal factorization at {i}")
    return dp, w


def run_theta_chunk(double[::1] eps, double[::1] m,
                    const double[::1] eps_bc, const double[::1] m_bc,
                    double h, double tau, double theta,
                    double k1, double k2, double k3,
                    const double[:, ::1] C1, const double[:, ::1] C2,
                    double M_eps, double M_m,
                    double a, double b_par, double p, double alpha,
                    bint cross_paper, bint m_dirichlet, bint count_signs,
                    double steady_tol, Py_ssize_t monitor_stride,
                    const double[::1] inv_dp, const double[::1] w,
                    double[:, ::1] monitor_out, long long[::1] counters,
                    double[::1] b_old, double[::1] scratch):
    """Advance `steps = len(eps_bc) - 1` levels in place.

    eps has N+1 nodes, m has N cells; eps_bc/m_bc hold Dirichlet values at
    the current level (index 0) through the last level of the chunk.
    b_old holds b at indices 0..N+1 for the entry state and is updated.
    scratch needs at least 3N + 4 doubles. Returns
    (steps_done, monitor_rows_written, stopped_steady, finite).
    """
    cdef Py_ssize_t N = m.shape[0]
    cdef Py_ssize_t steps = eps_bc.shape[0] - 1
    cdef Py_ssize_t n, i, row = 0
    cdef double h2 = h * h
    cdef double inv_h = 1.0 / h
    cdef double k1_h2 = k1 / h2
    cdef double k2_h2 = k2 / h2
    cdef double k2_h = k2 / h
    cdef double k3_h = k3 / h
    cdef double lam = tau / h2
    cdef double lam_t_k3 = lam * theta * k3
    cdef double one_m_theta = 1.0 - theta
    cdef double m0_old, m0_new, lap, X, r1, val, dsum, resid
    cdef double dF, g
    cdef double mn, mx, en, bg, eb, gmid
    cdef bint stopped = 0, bad = 0
    cdef long long c_pos_e = 0, c_pos_m = 0, c_zero_e = 0, c_zero_m = 0
    cdef long long step_viol = 0

    cdef double[::1] eps_new = scratch[0:N + 1]
    cdef double[::1] rhs = scratch[N + 1:2 * N + 1]
    cdef double[::1] F_old = scratch[2 * N + 1:3 * N + 2]
    cdef double[::1] b_new = scratch[3 * N + 2:4 * N + 4]

    with nogil:
        for n in range(1, steps + 1):
            m0_old = m_bc[n - 1]
            m0_new = m_bc[n]

            # ---- explicit strain update -------------------------------
            eps_new[0] = eps_bc[n]
            for i in range(1, N + 1):
                if i < N:
                    lap = eps[i - 1] - 2.0 * eps[i] + eps[i + 1]
                else:
                    lap = 2.0 * (eps[N - 1] - eps[N])
                if cross_paper:
                    if i == 1:
                        X = m[0] - m0_old
                    elif i == 2:
                        X = m0_old - 2.0 * m[0] + m[1]
                    else:
                        X = m[i - 3] - 2.0 * m[i - 2] + m[i - 1]
                else:
                    if i == 1:
                        X = m0_old - 2.0 * m[0] + m[1]
                    elif i < N:
                        X = m[i - 2] - 2.0 * m[i - 1] + m[i]
                    else:
                        X = m[N - 2] - m[N - 1]
                r1 = reaction(C1, eps[i], m[i - 1], M_eps, M_m)
                eps_new[i] = eps[i] + tau * (k1_h2 * lap + k2_h2 * X + r1)

            # ---- strain gradient at the new level ---------------------
            b_new[0] = (eps_new[0] - eps_new[1]) * inv_h
            for i in range(1, N + 1):
                b_new[i] = (eps_new[i] - eps_new[i - 1]) * inv_h
            b_new[N + 1] = -b_new[N]

            # ---- old-level flux (mode-dependent at the left wall) -----
            if m_dirichlet:
                F_old[0] = k3_h * (m[0] - m0_old) + k2 * b_old[0]
            else:
                F_old[0] = 0.0
            for i in range(1, N):
                F_old[i] = k3_h * (m[i] - m[i - 1]) + k2 * b_old[i]
            F_old[N] = 0.0

            # ---- right-hand side of the density solve -----------------
            for i in range(N):
                dF = (F_old[i + 1] - F_old[i]) * inv_h
                if i == 0:
                    if m_dirichlet:
                        g = k2_h * (b_new[1] - b_new[0])
                    else:
                        g = k2_h * b_new[1]
                elif i < N - 1:
                    g = k2_h * (b_new[i + 1] - b_new[i])
                else:
                    g = -k2_h * b_new[N - 1]
                rhs[i] = m[i] + tau * (one_m_theta * dF + theta * g
                                       + reaction(C2, eps[i + 1], m[i], M_eps, M_m))
            if m_dirichlet:
                rhs[0] += lam_t_k3 * m0_new

            # ---- Thomas solve (prefactored); theta=0 keeps rhs --------
            if theta > 0.0:
                for i in range(1, N):
                    rhs[i] = rhs[i] - w[i] * rhs[i - 1]
                rhs[N - 1] = rhs[N - 1] * inv_dp[N - 1]
                for i in range(N - 2, -1, -1):
                    rhs[i] = (rhs[i] + lam_t_k3 * rhs[i + 1]) * inv_dp[i]

            # ---- residual, counters, state swap -----------------------
            dsum = 0.0
            for i in range(N + 1):
                val = eps_new[i] - eps[i]
                dsum += val * val
            for i in range(N):
                val = rhs[i] - m[i]
                dsum += val * val
            resid = sqrt(h * dsum) / tau
            if not isfinite(resid):
                bad = 1

            for i in range(N + 1):
                eps[i] = eps_new[i]
            for i in range(N):
                m[i] = rhs[i]
            for i in range(N + 2):
                b_old[i] = b_new[i]

            step_viol = 0
            if count_signs:
                for i in range(N + 1):
                    if eps[i] > 0.0:
                        c_pos_e += 1
                        step_viol += 1
                    elif eps[i] == 0.0:
                        c_zero_e += 1
                for i in range(N):
                    if m[i] > 0.0:
                        c_pos_m += 1
                        step_viol += 1
                    elif m[i] == 0.0:
                        c_zero_m += 1

            if steady_tol > 0.0 and resid < steady_tol:
                stopped = 1

            if (n % monitor_stride == 0) or n == steps or stopped or bad:
                mn = eps[0]
                mx = eps[0]
                for i in range(1, N + 1):
                    if eps[i] < mn: mn = eps[i]
                    if eps[i] > mx: mx = eps[i]
                monitor_out[row, 1] = mn
                monitor_out[row, 2] = mx
                mn = m[0]
                mx = m[0]
                for i in range(1, N):
                    if m[i] < mn: mn = m[i]
                    if m[i] > mx: mx = m[i]
                monitor_out[row, 3] = mn
                monitor_out[row, 4] = mx
                en = 0.0
                for i in range(N):
                    bg = b_old[i + 1]
                    if i == 0:
                        gmid = (m[1] - m[0]) / h
                    elif i == N - 1:
                        gmid = (m[N - 1] - m[N - 2]) / h
                    else:
                        gmid = (m[i + 1] - m[i - 1]) / (2.0 * h)
                    eb = 0.5 * (eps[i] + eps[i + 1])
                    en += 0.5 * (k1 * bg * bg + 2.0 * k2 * bg * gmid + k3 * gmid * gmid) \
                        + psi_density(eb, m[i], a, b_par, p, alpha)
                monitor_out[row, 0] = <double> n
                monitor_out[row, 5] = en * h
                monitor_out[row, 6] = resid
                monitor_out[row, 7] = <double> step_viol
                row += 1
            if stopped or bad:
                break

    counters[0] += c_pos_e
    counters[1] += c_pos_m
    counters[2] += c_zero_e
    counters[3] += c_zero_m
    if bad:
        return n, row, False, False
    return (n if (stopped or steps == 0) else steps), row, bool(stopped), True
