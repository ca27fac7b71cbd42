"""Pure-Python (numpy) implementations of the hot kernels.

These define the reference behaviour; ``_kernels.pyx`` mirrors them loop
for loop and must agree to rounding.
"""
from __future__ import annotations

import math

import numpy as np

# Delta sign order inside one hidden value: bit 0 Alice upper, bit 1 Alice
# lower, bit 2 Bob upper, bit 3 Bob lower (bit set -> negative).


def _pattern_signs() -> np.ndarray:
    p = np.arange(16)
    return np.stack([1 - 2 * ((p >> b) & 1) for b in range(4)]).astype(float)


def lhv_extremal_bounds(weights, eff1, eff2, pair_eff) -> tuple[float, float]:
    """Max and min of the postselected CHSH value over all extremal Deltas."""
    w = np.asarray(weights, float)
    e1, e2 = np.asarray(eff1, float), np.asarray(eff2, float)
    pe = np.asarray(pair_eff, float)
    sg = _pattern_signs()  # (4, 16)
    total = np.zeros(1)
    for x in range(w.size):
        dA, da = sg[0] * e1[0, x], sg[1] * e1[1, x]
        dB, db = sg[2] * e2[0, x], sg[3] * e2[1, x]
        contrib = w[x] * (
            dA * dB / pe[0, 0] + dA * db / pe[0, 1] + da * dB / pe[1, 0] - da * db / pe[1, 1]
        )
        total = np.add.outer(total, contrib).ravel()
    return float(total.max()), float(total.min())


def _xlogy(x, y):
    return x * math.log(y) if x > 0 else 0.0


def _binomial_loglik(succ, trials, p) -> float:
    ll = 0.0
    for i in range(2):
        for j in range(2):
            s, n, q = succ[i][j], trials[i][j], p[i][j]
            ll += _xlogy(s, q) + _xlogy(n - s, 1.0 - q)
    return ll


def _coordinate_update(s, n, other, current, hi):
    """Maximise sum_j s_j log(f o_j) + (n_j - s_j) log(1 - f o_j) over f in (0, hi]."""
    if sum(s) == 0:
        return 1e-300
    fails = [n[j] - s[j] for j in range(2)]
    if fails[0] == 0 and fails[1] == 0:
        return hi
    f = min(current, hi * (1 - 1e-12))
    for _ in range(100):
        grad, hess = 0.0, 0.0
        for j in range(2):
            o = other[j]
            grad += s[j] / f - fails[j] * o / (1.0 - f * o)
            hess += -s[j] / (f * f) - fails[j] * o * o / (1.0 - f * o) ** 2
        if grad >= 0 and f >= hi * (1 - 1e-12):
            return hi
        step = -grad / hess
        new = f + step
        if new <= 0:
            new = f / 2
        elif new >= hi:
            new = 0.5 * (f + hi)
        if abs(new - f) <= 1e-15 * max(1.0, f):
            return new
        f = new
    return f


def fit_product_binomial(succ, trials, max_iter: int = 500, tol: float = 1e-13):
    """MLE of ``eff(alpha, beta) = f(alpha) g(beta)`` for binomial success counts.

    Returns ``(f, g, loglik, iterations)``. Block coordinate ascent: each
    half-step is an exact concave 1-D maximisation per coordinate.
    """
    s = [[float(v) for v in row] for row in np.asarray(succ)]
    n = [[float(v) for v in row] for row in np.asarray(trials)]
    rates = [[s[i][j] / n[i][j] for j in range(2)] for i in range(2)]
    f = [max(max(rates[i]), 1e-6) for i in range(2)]
    g = [1.0, 1.0]
    prev = -math.inf
    it = 0
    for it in range(1, max_iter + 1):
        for i in range(2):
            f[i] = _coordinate_update(s[i], n[i], g, f[i], 1.0 / max(g))
        col_s = [[s[0][j], s[1][j]] for j in range(2)]
        col_n = [[n[0][j], n[1][j]] for j in range(2)]
        for j in range(2):
            g[j] = _coordinate_update(col_s[j], col_n[j], f, g[j], 1.0 / max(f))
        # fix the scale: max g = 1
        scale = max(g)
        g = [v / scale for v in g]
        f = [v * scale for v in f]
        p = [[min(f[i] * g[j], 1.0) for j in range(2)] for i in range(2)]
        ll = _binomial_loglik(s, n, p)
        if abs(ll - prev) <= tol * max(1.0, abs(ll)):
            prev = ll
            break
        prev = ll
    return np.array(f), np.array(g), float(prev), it


def pure_ratio_value_grad(psi, D, M, signs):
    """Value and gradient of ``sum_k sign_k <psi|D_k|psi> / <psi|M_k|psi>``.

    The gradient is with respect to the real and imaginary parts of psi,
    packed as a complex vector.
    """
    psi = np.asarray(psi, complex)
    Dpsi = np.einsum("kij,j->ki", D, psi)
    Mpsi = np.einsum("kij,j->ki", M, psi)
    num = np.einsum("i,ki->k", psi.conj(), Dpsi).real
    den = np.einsum("i,ki->k", psi.conj(), Mpsi).real
    signs = np.asarray(signs, float)
    value = float(np.sum(signs * num / den))
    grad = np.einsum("k,ki->i", 2 * signs / den, Dpsi) - np.einsum(
        "k,ki->i", 2 * signs * num / den**2, Mpsi
    )
    return value, grad
