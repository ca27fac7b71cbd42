import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fairbell.errors import InvalidOperatorError, SingularOperatorError
from fairbell.operators import (
    PAULI_X,
    PAULI_Y,
    PAULI_Z,
    HermitianOperator,
    PovmElement,
    density_operator,
    eig_hermitian,
    expectation,
    partial_trace,
    projector,
    psd_inv_sqrt,
    psd_sqrt,
    svd,
    tensor_product,
)
from fairbell.sampling import random_psd, random_unitary

seeds = st.integers(min_value=0, max_value=2**32 - 1)


def test_hermitian_rejects_non_hermitian():
    with pytest.raises(InvalidOperatorError):
        HermitianOperator([[0, 1], [0, 0]])


def test_hermitian_is_read_only():
    h = HermitianOperator(np.eye(2))
    with pytest.raises(ValueError):
        h.matrix[0, 0] = 2


def test_povm_spectrum_checked():
    with pytest.raises(InvalidOperatorError):
        PovmElement(np.diag([1.2, 0.0]))
    with pytest.raises(InvalidOperatorError):
        PovmElement(np.diag([-0.1, 0.5]))


def test_pauli_algebra():
    x, y, z = (np.asarray(p) for p in (PAULI_X, PAULI_Y, PAULI_Z))
    assert np.allclose(x @ y, 1j * z)
    assert np.allclose(z @ z, np.eye(2))


def test_tensor_product_matches_kron():
    t = tensor_product(PAULI_X, PAULI_Z)
    assert np.allclose(t.matrix, np.kron(np.asarray(PAULI_X), np.asarray(PAULI_Z)))


def test_eig_descending_and_deterministic():
    vals, vecs = eig_hermitian(np.diag([0.2, 0.9, 0.5]))
    assert np.allclose(vals, [0.9, 0.5, 0.2])
    assert np.allclose(np.abs(vecs), np.eye(3)[:, [1, 2, 0]])
    vals2, vecs2 = eig_hermitian(np.diag([0.2, 0.9, 0.5]))
    assert np.array_equal(vecs, vecs2)


@settings(max_examples=50, deadline=None)
@given(seeds, st.integers(min_value=2, max_value=4))
def test_eig_reconstructs(seed, d):
    a = random_psd(np.random.default_rng(seed), d, -1, 1)
    vals, vecs = eig_hermitian(a)
    assert np.allclose(vecs @ np.diag(vals) @ vecs.conj().T, a, atol=1e-10)
    assert np.all(np.diff(vals) <= 1e-12)


@settings(max_examples=50, deadline=None)
@given(seeds)
def test_svd_reconstructs(seed):
    rng = np.random.default_rng(seed)
    m = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    u, s, v = svd(m)
    assert np.allclose(u @ np.diag(s) @ v.conj().T, m)
    assert np.all(np.diff(s) <= 0)


@settings(max_examples=50, deadline=None)
@given(seeds)
def test_sqrt_and_inverse_sqrt(seed):
    a = random_psd(np.random.default_rng(seed), 3)
    r = np.asarray(psd_sqrt(a))
    x = np.asarray(psd_inv_sqrt(a))
    assert np.allclose(r @ r, a)
    assert np.allclose(x @ a @ x, np.eye(3))


def test_inverse_sqrt_singular():
    with pytest.raises(SingularOperatorError):
        psd_inv_sqrt(np.diag([1.0, 0.0]))


def test_density_operator_checks_trace():
    with pytest.raises(InvalidOperatorError):
        density_operator(np.eye(2))
    density_operator(np.eye(2) / 2)


def test_projector_and_expectation():
    p = projector([1, 1j])
    assert expectation(PAULI_Y, p) == pytest.approx(1.0)


def test_partial_trace_of_product():
    rng = np.random.default_rng(3)
    a = random_psd(rng, 2)
    b = random_psd(rng, 3)
    ab = np.kron(a, b)
    assert np.allclose(partial_trace(ab, (2, 3), 0), a * np.trace(b))
    assert np.allclose(partial_trace(ab, (2, 3), 1), b * np.trace(a))


def test_random_unitary_is_unitary():
    u = random_unitary(np.random.default_rng(0), 4)
    assert np.allclose(u @ u.conj().T, np.eye(4))
