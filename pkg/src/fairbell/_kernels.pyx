# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the kernels in ``_kernels_py``; same signatures."""
import numpy as np
cimport numpy as cnp
from libc.math cimport log, fabs, INFINITY

cnp.import_array()


def lhv_extremal_bounds(weights, eff1, eff2, pair_eff):
    cdef const double[::1] w = np.ascontiguousarray(weights, dtype=np.float64)
    cdef const double[:, ::1] e1 = np.ascontiguousarray(eff1, dtype=np.float64)
    cdef const double[:, ::1] e2 = np.ascontiguousarray(eff2, dtype=np.float64)
    cdef const double[:, ::1] pe = np.ascontiguousarray(pair_eff, dtype=np.float64)
    cdef Py_ssize_t n = w.shape[0]
    cdef Py_ssize_t x, p
    cdef long long code, total = 1
    cdef double best = -INFINITY, worst = INFINITY, b
    cdef double dA, da, dB, db
    cdef double[:, ::1] contrib = np.empty((n, 16))
    for x in range(n):
        for p in range(16):
            dA = e1[0, x] * (1 - 2 * (p & 1))
            da = e1[1, x] * (1 - 2 * ((p >> 1) & 1))
            dB = e2[0, x] * (1 - 2 * ((p >> 2) & 1))
            db = e2[1, x] * (1 - 2 * ((p >> 3) & 1))
            contrib[x, p] = w[x] * (dA * dB / pe[0, 0] + dA * db / pe[0, 1]
                                    + da * dB / pe[1, 0] - da * db / pe[1, 1])
        total *= 16
    # odometer over the digits; prefix[x + 1] holds the sum of the first x + 1 terms
    cdef Py_ssize_t[::1] digit = np.zeros(n, dtype=np.intp)
    cdef double[::1] prefix = np.zeros(n + 1)
    for x in range(n):
        prefix[x + 1] = prefix[x] + contrib[x, 0]
    for code in range(total):
        b = prefix[n]
        if b > best:
            best = b
        if b < worst:
            worst = b
        x = n - 1
        while x >= 0 and digit[x] == 15:
            digit[x] = 0
            x -= 1
        if x < 0:
            break
        digit[x] += 1
        for p in range(x, n):
            prefix[p + 1] = prefix[p] + contrib[p, digit[p]]
    return best, worst


cdef inline double _xlogy(double x, double y):
    if x > 0:
        return x * log(y)
    return 0.0


cdef double _coordinate_update(double s0, double s1, double n0, double n1,
                               double o0, double o1, double current, double hi):
    cdef double f0 = n0 - s0, f1 = n1 - s1
    cdef double f, grad, hess, new, step
    cdef int it
    if s0 + s1 == 0:
        return 1e-300
    if f0 == 0 and f1 == 0:
        return hi
    f = current
    if f > hi * (1 - 1e-12):
        f = hi * (1 - 1e-12)
    for it in range(100):
        grad = s0 / f - f0 * o0 / (1.0 - f * o0) + s1 / f - f1 * o1 / (1.0 - f * o1)
        hess = (-s0 / (f * f) - f0 * o0 * o0 / ((1.0 - f * o0) * (1.0 - f * o0))
                - s1 / (f * f) - f1 * o1 * o1 / ((1.0 - f * o1) * (1.0 - f * o1)))
        if grad >= 0 and f >= hi * (1 - 1e-12):
            return hi
        step = -grad / hess
        new = f + step
        if new <= 0:
            new = f / 2
        elif new >= hi:
            new = 0.5 * (f + hi)
        if fabs(new - f) <= 1e-15 * (f if f > 1.0 else 1.0):
            return new
        f = new
    return f


def fit_product_binomial(succ, trials, int max_iter=500, double tol=1e-13):
    cdef const double[:, ::1] s = np.ascontiguousarray(succ, dtype=np.float64)
    cdef const double[:, ::1] n = np.ascontiguousarray(trials, dtype=np.float64)
    cdef double f[2]
    cdef double g[2]
    cdef double p, ll, prev = -INFINITY, scale, r0, r1, hi
    cdef int i, j, it = 0
    for i in range(2):
        r0 = s[i, 0] / n[i, 0]
        r1 = s[i, 1] / n[i, 1]
        f[i] = r0 if r0 > r1 else r1
        if f[i] < 1e-6:
            f[i] = 1e-6
        g[i] = 1.0
    for it in range(1, max_iter + 1):
        hi = 1.0 / (g[0] if g[0] > g[1] else g[1])
        for i in range(2):
            f[i] = _coordinate_update(s[i, 0], s[i, 1], n[i, 0], n[i, 1], g[0], g[1], f[i], hi)
        hi = 1.0 / (f[0] if f[0] > f[1] else f[1])
        for j in range(2):
            g[j] = _coordinate_update(s[0, j], s[1, j], n[0, j], n[1, j], f[0], f[1], g[j], hi)
        scale = g[0] if g[0] > g[1] else g[1]
        for j in range(2):
            g[j] /= scale
            f[j] *= scale
        ll = 0.0
        for i in range(2):
            for j in range(2):
                p = f[i] * g[j]
                if p > 1.0:
                    p = 1.0
                ll += _xlogy(s[i, j], p) + _xlogy(n[i, j] - s[i, j], 1.0 - p)
        if fabs(ll - prev) <= tol * (fabs(ll) if fabs(ll) > 1.0 else 1.0):
            prev = ll
            break
        prev = ll
    return np.array([f[0], f[1]]), np.array([g[0], g[1]]), prev, it


def pure_ratio_value_grad(psi, D, M, signs):
    cdef const double complex[::1] v = np.ascontiguousarray(psi, dtype=np.complex128)
    cdef const double complex[:, :, ::1] Dm = np.ascontiguousarray(D, dtype=np.complex128)
    cdef const double complex[:, :, ::1] Mm = np.ascontiguousarray(M, dtype=np.complex128)
    cdef const double[::1] sg = np.ascontiguousarray(signs, dtype=np.float64)
    cdef Py_ssize_t K = Dm.shape[0], d = v.shape[0]
    cdef Py_ssize_t k, i, j
    out = np.zeros(d, dtype=np.complex128)
    cdef double complex[::1] grad = out
    cdef double complex[::1] Dv = np.empty(d, dtype=np.complex128)
    cdef double complex[::1] Mv = np.empty(d, dtype=np.complex128)
    cdef double complex accD, accM
    cdef double num, den, value = 0.0, a, b
    for k in range(K):
        num = 0.0
        den = 0.0
        for i in range(d):
            accD = 0
            accM = 0
            for j in range(d):
                accD = accD + Dm[k, i, j] * v[j]
                accM = accM + Mm[k, i, j] * v[j]
            Dv[i] = accD
            Mv[i] = accM
            num += v[i].real * accD.real + v[i].imag * accD.imag
            den += v[i].real * accM.real + v[i].imag * accM.imag
        value += sg[k] * num / den
        a = 2.0 * sg[k] / den
        b = 2.0 * sg[k] * num / (den * den)
        for i in range(d):
            grad[i] = grad[i] + a * Dv[i] - b * Mv[i]
    return value, out
