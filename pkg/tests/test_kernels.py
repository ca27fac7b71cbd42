import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import minimize
from scipy.stats import binom

from fairbell import kernels
from fairbell.kernels import python_backend
from fairbell.sampling import random_efficiency_table, random_psd, random_pure

seeds = st.integers(min_value=0, max_value=2**32 - 1)
backends = [python_backend] + ([kernels.compiled_backend] if kernels.compiled_backend else [])


def _pair(t):
    return np.array([[t.pair_efficiency(a, b) for b in range(2)] for a in range(2)])


def test_backend_reported():
    assert kernels.BACKEND in ("cython", "python")


@pytest.mark.parametrize("impl", backends, ids=lambda m: m.__name__)
def test_extremes_against_itertools(impl):
    rng = np.random.default_rng(4)
    for _ in range(20):
        t = random_efficiency_table(rng, 2)
        pe = _pair(t)
        vals = []
        for s in itertools.product((1, -1), repeat=8):
            d = np.array(s).reshape(2, 2, 2) * t.eff
            b = sum(
                sign * np.sum(t.weights * d[0, a] * d[1, bb]) / pe[a, bb]
                for a, bb, sign in ((0, 0, 1), (0, 1, 1), (1, 0, 1), (1, 1, -1))
            )
            vals.append(b)
        got = impl.lhv_extremal_bounds(t.weights, t.eff[0], t.eff[1], pe)
        assert got == pytest.approx((max(vals), min(vals)), abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(seeds, st.integers(min_value=1, max_value=5))
def test_extremes_backends_agree(seed, n):
    t = random_efficiency_table(np.random.default_rng(seed), n)
    args = (t.weights, t.eff[0], t.eff[1], _pair(t))
    ref = python_backend.lhv_extremal_bounds(*args)
    for impl in backends:
        assert impl.lhv_extremal_bounds(*args) == pytest.approx(ref, rel=1e-13, abs=1e-13)


def _scipy_fit(succ, trials):
    def nll(x):
        f, g = 1 / (1 + np.exp(-x[:2])), 1 / (1 + np.exp(-x[2:]))
        p = np.clip(np.outer(f, g), 1e-300, 1 - 1e-16)
        return -np.sum(binom.logpmf(succ, trials, p))

    best = None
    for x0 in ([2, 2, 2, 2], [0, 0, 3, 3], [3, 3, 0, 0]):
        r = minimize(nll, x0, method="Nelder-Mead", options={"xatol": 1e-10, "fatol": 1e-12, "maxiter": 20000})
        best = r if best is None or r.fun < best.fun else best
    return best


@pytest.mark.parametrize("impl", backends, ids=lambda m: m.__name__)
def test_binomial_fit_against_scipy(impl):
    rng = np.random.default_rng(9)
    const = 0
    for _ in range(5):
        trials = np.full((2, 2), 500)
        p = np.outer(rng.uniform(0.4, 0.95, 2), rng.uniform(0.4, 0.95, 2))
        p[1, 1] *= rng.uniform(0.7, 1.0)
        succ = rng.binomial(trials, p)
        f, g, ll, _ = impl.fit_product_binomial(succ, trials)
        ref = _scipy_fit(succ, trials)
        const = np.sum(binom.logpmf(succ, trials, np.outer(f, g))) - ll
        # our log-likelihood omits the binomial coefficients
        assert -ref.fun - const == pytest.approx(ll, abs=1e-6)
        assert max(g) == pytest.approx(1.0)


@settings(max_examples=30, deadline=None)
@given(seeds)
def test_binomial_backends_agree(seed):
    rng = np.random.default_rng(seed)
    trials = rng.integers(50, 2000, size=(2, 2))
    succ = rng.binomial(trials, rng.uniform(0.2, 1.0, size=(2, 2)))
    ref = python_backend.fit_product_binomial(succ, trials)
    for impl in backends:
        got = impl.fit_product_binomial(succ, trials)
        assert np.allclose(got[0], ref[0], rtol=1e-9)
        assert np.allclose(got[1], ref[1], rtol=1e-9)
        assert got[2] == pytest.approx(ref[2], rel=1e-12)


@pytest.mark.parametrize("impl", backends, ids=lambda m: m.__name__)
def test_ratio_gradient_finite_difference(impl):
    rng = np.random.default_rng(11)
    d = 4
    D = np.array([random_psd(rng, d, -1, 1) for _ in range(4)])
    M = np.array([random_psd(rng, d) for _ in range(4)])
    signs = np.array([1.0, 1.0, 1.0, -1.0])
    psi = random_pure(rng, d)
    val, grad = impl.pure_ratio_value_grad(psi, D, M, signs)
    h = 1e-6
    for i in range(d):
        for step, part in ((h, grad[i].real), (1j * h, grad[i].imag)):
            e = np.zeros(d, complex)
            e[i] = step
            up = impl.pure_ratio_value_grad(psi + e, D, M, signs)[0]
            dn = impl.pure_ratio_value_grad(psi - e, D, M, signs)[0]
            assert (up - dn) / (2 * h) == pytest.approx(part, abs=1e-6)
    ref = python_backend.pure_ratio_value_grad(psi, D, M, signs)
    assert val == pytest.approx(ref[0], abs=1e-13)
    assert np.allclose(grad, ref[1], atol=1e-12)


def test_environment_forces_fallback():
    import os
    import subprocess
    import sys

    env = dict(os.environ, FAIRBELL_PURE_PYTHON="1")
    out = subprocess.run(
        [sys.executable, "-c", "from fairbell import kernels; print(kernels.BACKEND)"],
        env=env, capture_output=True, text=True, check=True,
    )
    assert out.stdout.strip() == "python"
