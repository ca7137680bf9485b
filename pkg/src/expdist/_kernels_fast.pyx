# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled twin of _kernels_py: same fixed-count bisection+Newton scheme,
scalar loops in C.  Kept algorithmically identical so both backends agree
to the last few ulps; see tests/test_backend_parity.py.
"""

from libc.math cimport exp, expm1, log, fmin, fmax, fabs

import numpy as np

cdef int N_BISECT = 52
cdef int N_NEWTON = 6
cdef double ASYMPT_LOG = -60.0
cdef double LOG_U_MAX = log(1.0 - 1e-12)
cdef double HANDOFF_WIDTH = 1e-6
cdef double STEP_TOL = 1e-15


cdef inline double _ap_g(double phi, double p, double logy, double* slope) nogil:
    cdef double d = exp(phi)
    slope[0] = d + 0.5 + 0.5 * d / (d + 2.0 * p)
    return p + d + 0.5 * (log(d) + log(d + 2.0 * p)) - logy


cdef inline double _at_g(double phi, double p, double logy, double* slope) nogil:
    cdef double d = exp(phi)
    slope[0] = 2.0 * d + 1.0 + d / (d + 2.0 * p)
    return 2.0 * (p + d) + log(d) + log(d + 2.0 * p) - logy


cdef inline double _apl_g(double phi, double p, double logy, double one_m_l2,
                          double log_2pl, double* slope) nogil:
    cdef double d = exp(phi)
    cdef double fac = one_m_l2 * d + 2.0 * p
    slope[0] = d + 0.5 + 0.5 * d / (d + 2.0 * p) + one_m_l2 * d / fac
    return p + d + 0.5 * (log(d) + log(d + 2.0 * p)) + log(fac) - log_2pl - logy


cdef inline double _v_g(double theta, double p, double lam, double lam2,
                        double log_lam, double logr, double* slope) nogil:
    cdef double u = exp(theta)
    cdef double omu2 = (1.0 - u) * (1.0 + u)
    cdef double omlu2 = (1.0 - lam * u) * (1.0 + lam * u)
    cdef double v2 = lam2 * u * u
    cdef double lm_v2 = lam2 * omu2
    slope[0] = (4.0 * p * lam2 * v2 / (lm_v2 * lm_v2)
                + 4.0 * v2 * (1.0 - lam2) / (lm_v2 * omlu2) + 1.0)
    return (p * (1.0 + u * u) / omu2 + 2.0 * log(omlu2) - 2.0 * log(omu2)
            + theta - 3.0 * log_lam - logr)


cdef inline double _t_g(double tau, double p, double logk, double* slope) nogil:
    cdef double t = exp(tau)
    cdef double omt2 = (1.0 - t) * (1.0 + t)
    cdef double t2 = t * t
    slope[0] = 4.0 * p * t2 / (omt2 * omt2) + 1.0 + 4.0 * t2 / omt2
    return p * (1.0 + t2) / omt2 + tau - 2.0 * log(omt2) - logk


def ap_inverse(y, double p):
    y = np.ascontiguousarray(y, dtype=np.float64)
    out = np.empty_like(y)
    cdef double[::1] yv = y.ravel()
    cdef double[::1] ov = out.ravel()
    cdef Py_ssize_t i, n = yv.shape[0]
    cdef int j
    cdef double logy, phi_small, lo, hi, mid, g, slope, step, phi
    with nogil:
        for i in range(n):
            logy = log(yv[i])
            phi_small = 2.0 * (logy - p) - log(2.0 * p)
            if phi_small < ASYMPT_LOG:
                ov[i] = exp(fmin(phi_small + p, 700.0))
                continue
            lo = fmin(phi_small, 0.0) - 6.0
            hi = log(fmax(logy - p, 0.0) + 1.0) + 1.0
            for j in range(N_BISECT):
                if hi - lo < HANDOFF_WIDTH:
                    break
                mid = 0.5 * (lo + hi)
                g = _ap_g(mid, p, logy, &slope)
                if g < 0.0:
                    lo = mid
                else:
                    hi = mid
            phi = 0.5 * (lo + hi)
            for j in range(N_NEWTON):
                g = _ap_g(phi, p, logy, &slope)
                step = g / slope
                phi = fmin(fmax(phi - step, lo), hi)
                if fabs(step) < STEP_TOL * (1.0 + fabs(phi)):
                    break
            ov[i] = exp(p) * expm1(exp(phi))
    return out


def atilde_inverse(y, double p):
    y = np.ascontiguousarray(y, dtype=np.float64)
    out = np.empty_like(y)
    cdef double[::1] yv = y.ravel()
    cdef double[::1] ov = out.ravel()
    cdef Py_ssize_t i, n = yv.shape[0]
    cdef int j
    cdef double logy, phi_small, lo, hi, mid, g, slope, step, phi
    with nogil:
        for i in range(n):
            logy = log(yv[i])
            phi_small = logy - 2.0 * p - log(2.0 * p)
            if phi_small < ASYMPT_LOG:
                ov[i] = exp(fmin(phi_small + p, 700.0))
                continue
            lo = fmin(phi_small, 0.0) - 6.0
            hi = log(fmax(0.5 * (logy - 2.0 * p), 0.0) + 1.0) + 1.0
            for j in range(N_BISECT):
                if hi - lo < HANDOFF_WIDTH:
                    break
                mid = 0.5 * (lo + hi)
                g = _at_g(mid, p, logy, &slope)
                if g < 0.0:
                    lo = mid
                else:
                    hi = mid
            phi = 0.5 * (lo + hi)
            for j in range(N_NEWTON):
                g = _at_g(phi, p, logy, &slope)
                step = g / slope
                phi = fmin(fmax(phi - step, lo), hi)
                if fabs(step) < STEP_TOL * (1.0 + fabs(phi)):
                    break
            ov[i] = exp(p) * expm1(exp(phi))
    return out


def ap_lambda_inverse(y, double p, double lam):
    y = np.ascontiguousarray(y, dtype=np.float64)
    out = np.empty_like(y)
    cdef double[::1] yv = y.ravel()
    cdef double[::1] ov = out.ravel()
    cdef Py_ssize_t i, n = yv.shape[0]
    cdef int j
    cdef double one_m_l2 = (1.0 - lam) * (1.0 + lam)
    cdef double log_2pl = log(2.0 * p * lam)
    cdef double log_lam = log(lam)
    cdef double margin = 14.0 + 2.0 * (log_lam if log_lam > 0 else -log_lam)
    cdef double logy, phi_small, lo, hi, mid, g, slope, step, phi
    with nogil:
        for i in range(n):
            logy = log(yv[i])
            phi_small = 2.0 * (logy - p + log_lam) - log(2.0 * p)
            if phi_small < ASYMPT_LOG:
                ov[i] = exp(fmin(phi_small + p, 700.0))
                continue
            lo = fmin(phi_small, 0.0) - margin
            hi = log(fmax(logy - p, 0.0) + 1.0) + 1.0
            for j in range(N_BISECT):
                if hi - lo < HANDOFF_WIDTH:
                    break
                mid = 0.5 * (lo + hi)
                g = _apl_g(mid, p, logy, one_m_l2, log_2pl, &slope)
                if g < 0.0:
                    lo = mid
                else:
                    hi = mid
            phi = 0.5 * (lo + hi)
            for j in range(N_NEWTON):
                g = _apl_g(phi, p, logy, one_m_l2, log_2pl, &slope)
                step = g / slope
                phi = fmin(fmax(phi - step, lo), hi)
                if fabs(step) < STEP_TOL * (1.0 + fabs(phi)):
                    break
            ov[i] = exp(p) * expm1(exp(phi))
    return out


def v_solve(x, k, double p, double lam):
    x, k = np.broadcast_arrays(
        np.asarray(x, dtype=np.float64), np.asarray(k, dtype=np.float64))
    x = np.ascontiguousarray(x)
    k = np.ascontiguousarray(k)
    out = np.empty_like(x)
    cdef double[::1] xv = x.ravel()
    cdef double[::1] kv = k.ravel()
    cdef double[::1] ov = out.ravel()
    cdef Py_ssize_t i, n = xv.shape[0]
    cdef int j
    cdef double lam2 = lam * lam
    cdef double log_lam = log(lam)
    cdef double logr, theta_small, lo, hi, mid, g, slope, step, theta
    with nogil:
        for i in range(n):
            logr = log(kv[i]) - 2.0 * log(xv[i])
            theta_small = logr + 3.0 * log_lam - p
            if theta_small < ASYMPT_LOG:
                ov[i] = exp(fmin(theta_small + log_lam, 0.0))
                continue
            lo = fmax(fmin(theta_small, 0.0) - 6.0, -690.0)
            hi = LOG_U_MAX
            for j in range(N_BISECT):
                if hi - lo < HANDOFF_WIDTH:
                    break
                mid = 0.5 * (lo + hi)
                g = _v_g(mid, p, lam, lam2, log_lam, logr, &slope)
                if g < 0.0:
                    lo = mid
                else:
                    hi = mid
            theta = 0.5 * (lo + hi)
            for j in range(N_NEWTON):
                g = _v_g(theta, p, lam, lam2, log_lam, logr, &slope)
                step = g / slope
                theta = fmin(fmax(theta - step, lo), hi)
                if fabs(step) < STEP_TOL * (1.0 + fabs(theta)):
                    break
            ov[i] = lam * exp(theta)
    return out


def t_solve(bigk, double p):
    bigk = np.ascontiguousarray(bigk, dtype=np.float64)
    out = np.empty_like(bigk)
    cdef double[::1] kv = bigk.ravel()
    cdef double[::1] ov = out.ravel()
    cdef Py_ssize_t i, n = kv.shape[0]
    cdef int j
    cdef double logk, tau_small, lo, hi, mid, g, slope, step, tau
    with nogil:
        for i in range(n):
            logk = log(kv[i])
            tau_small = logk - p
            if tau_small < ASYMPT_LOG:
                ov[i] = exp(fmin(tau_small, 0.0))
                continue
            lo = fmax(fmin(tau_small, 0.0) - 6.0, -690.0)
            hi = LOG_U_MAX
            for j in range(N_BISECT):
                if hi - lo < HANDOFF_WIDTH:
                    break
                mid = 0.5 * (lo + hi)
                g = _t_g(mid, p, logk, &slope)
                if g < 0.0:
                    lo = mid
                else:
                    hi = mid
            tau = 0.5 * (lo + hi)
            for j in range(N_NEWTON):
                g = _t_g(tau, p, logk, &slope)
                step = g / slope
                tau = fmin(fmax(tau - step, lo), hi)
                if fabs(step) < STEP_TOL * (1.0 + fabs(tau)):
                    break
            ov[i] = exp(tau)
    return out
