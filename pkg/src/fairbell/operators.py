"""Small dense complex linear algebra: Hermitian operators, POVM elements,
decompositions and tensor products.

All matrices here are at most 8x8, so everything is dense numpy and no
attempt is made at clever storage. Operators are immutable once built.
"""
from __future__ import annotations

from functools import reduce

import numpy as np

from .errors import (
    DimensionMismatchError,
    InvalidOperatorError,
    NumericalError,
    SingularOperatorError,
)

HERMITIAN_TOL = 1e-9
PSD_TOL = 1e-9
SINGULAR_FLOOR = 1e-10
RESIDUAL_TOL = 1e-8
IMAG_TOL = 1e-10


def as_complex_matrix(data) -> np.ndarray:
    """Return `data` as a finite 2-D complex array (a copy)."""
    m = np.array(data, dtype=complex)
    if m.ndim != 2 or m.size == 0:
        raise InvalidOperatorError(f"expected a non-empty 2-D matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise InvalidOperatorError("matrix has non-finite entries")
    return m


class HermitianOperator:
    """A square complex matrix equal to its adjoint within `tol`.

    The stored matrix is the symmetrised input ``(A + A^dagger)/2`` and is
    read-only, so instances can be shared freely.
    """

    __slots__ = ("_m",)

    def __init__(self, matrix, tol: float = HERMITIAN_TOL):
        if isinstance(matrix, HermitianOperator):
            self._m = matrix._m
            return
        m = as_complex_matrix(matrix)
        if m.shape[0] != m.shape[1]:
            raise InvalidOperatorError(f"operator must be square, got {m.shape}")
        dev = np.max(np.abs(m - m.conj().T))
        if dev > tol:
            raise InvalidOperatorError(f"matrix is not Hermitian (max deviation {dev:.3g})")
        m = 0.5 * (m + m.conj().T)
        m.setflags(write=False)
        self._m = m

    @property
    def matrix(self) -> np.ndarray:
        return self._m

    @property
    def dim(self) -> int:
        return self._m.shape[0]

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self._m)[::-1]

    def trace(self) -> float:
        return float(np.trace(self._m).real)

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self._m, dtype=dtype)

    def __add__(self, other):
        return HermitianOperator(self._m + _mat(other))

    def __sub__(self, other):
        return HermitianOperator(self._m - _mat(other))

    def __mul__(self, scalar: float):
        if not np.isreal(scalar):
            raise InvalidOperatorError("Hermitian operators scale by real numbers only")
        return HermitianOperator(self._m * float(np.real(scalar)))

    __rmul__ = __mul__

    def __neg__(self):
        return HermitianOperator(-self._m)

    def __eq__(self, other):
        if not isinstance(other, HermitianOperator):
            return NotImplemented
        return self._m.shape == other._m.shape and bool(np.array_equal(self._m, other._m))

    def __hash__(self):
        return hash((self._m.shape, self._m.tobytes()))

    def __repr__(self):
        return f"{type(self).__name__}(dim={self.dim})"


class PovmElement(HermitianOperator):
    """Hermitian operator with spectrum inside [0, 1] (within `tol`)."""

    __slots__ = ()

    def __init__(self, matrix, tol: float = PSD_TOL):
        super().__init__(matrix)
        ev = np.linalg.eigvalsh(self._m)
        if ev[0] < -tol or ev[-1] > 1 + tol:
            raise InvalidOperatorError(
                f"POVM element spectrum [{ev[0]:.3g}, {ev[-1]:.3g}] outside [0, 1]"
            )


def _mat(x) -> np.ndarray:
    if isinstance(x, HermitianOperator):
        return x.matrix
    return np.asarray(x, dtype=complex)


def identity(dim: int) -> PovmElement:
    return PovmElement(np.eye(dim))


def projector(vec) -> PovmElement:
    """Rank-one projector onto the (normalised) vector `vec`."""
    v = np.asarray(vec, dtype=complex).ravel()
    n = np.linalg.norm(v)
    if n == 0:
        raise InvalidOperatorError("cannot project onto the zero vector")
    v = v / n
    return PovmElement(np.outer(v, v.conj()))


PAULI_X = HermitianOperator([[0, 1], [1, 0]])
PAULI_Y = HermitianOperator([[0, -1j], [1j, 0]])
PAULI_Z = HermitianOperator([[1, 0], [0, -1]])
IDENTITY_2 = identity(2)


def tensor_product(*ops) -> HermitianOperator:
    """Kronecker product of Hermitian operators, left to right."""
    if not ops:
        raise ValueError("tensor_product needs at least one operator")
    mats = [_mat(HermitianOperator(op)) for op in ops]
    return HermitianOperator(reduce(np.kron, mats))


def _sort_eigensystem(vals: np.ndarray, vecs: np.ndarray, tie_tol: float = 1e-9):
    vecs = vecs.copy()
    for k in range(vecs.shape[1]):
        col = vecs[:, k]
        lead = np.flatnonzero(np.abs(col) > 1e-12)[0]
        vecs[:, k] = col * (abs(col[lead]) / col[lead])

    def entry_key(k):
        col = np.round(vecs[:, k], 12)
        return tuple(x for z in col for x in (-z.real, -z.imag))

    order = sorted(range(len(vals)), key=lambda k: -vals[k])
    # stable lexicographic ordering inside runs of (near-)degenerate eigenvalues
    out, i = [], 0
    while i < len(order):
        j = i + 1
        while j < len(order) and abs(vals[order[j]] - vals[order[i]]) <= tie_tol:
            j += 1
        out.extend(sorted(order[i:j], key=entry_key))
        i = j
    return vals[out], vecs[:, out]


def eig_hermitian(op) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues in descending order and orthonormal eigenvector columns.

    Eigenvector phases are fixed so the first non-negligible entry is real
    and positive; degenerate eigenvalues are ordered lexicographically on
    the eigenvector entries so results are reproducible.
    """
    a = _mat(HermitianOperator(op))
    try:
        vals, vecs = np.linalg.eigh(a)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"eigendecomposition failed: {exc}") from exc
    vals, vecs = _sort_eigensystem(vals, vecs)
    resid = np.max(np.abs(a @ vecs - vecs * vals)) if a.size else 0.0
    if resid > RESIDUAL_TOL * max(1.0, np.max(np.abs(vals))):
        raise NumericalError(f"eigendecomposition residual {resid:.3g} too large")
    return vals, vecs


def svd(m) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Return ``(U, S, V)`` with ``m = U @ diag(S) @ V^dagger``, S descending."""
    a = as_complex_matrix(m)
    try:
        u, s, vh = np.linalg.svd(a)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"SVD failed: {exc}") from exc
    v = vh.conj().T
    k = len(s)
    resid = np.max(np.abs(u[:, :k] * s @ v[:, :k].conj().T - a))
    if resid > RESIDUAL_TOL * max(1.0, s[0] if k else 1.0):
        raise NumericalError(f"SVD residual {resid:.3g} too large")
    return u, s, v


def psd_sqrt(op) -> HermitianOperator:
    """Principal square root of a PSD operator (tiny negative eigenvalues clipped)."""
    vals, vecs = np.linalg.eigh(_mat(HermitianOperator(op)))
    if vals[0] < -PSD_TOL:
        raise InvalidOperatorError(f"operator is not PSD (min eigenvalue {vals[0]:.3g})")
    return HermitianOperator((vecs * np.sqrt(np.clip(vals, 0.0, None))) @ vecs.conj().T)


def psd_inv_sqrt(op, floor: float = SINGULAR_FLOOR) -> HermitianOperator:
    """``X = op^{-1/2}``, so that ``X @ op @ X`` is the identity.

    Raises SingularOperatorError if any eigenvalue is below `floor`; this is
    the complete-loss case where postselection cannot be undone.
    """
    vals, vecs = np.linalg.eigh(_mat(HermitianOperator(op)))
    if vals[0] < floor:
        raise SingularOperatorError(
            f"eigenvalue {vals[0]:.3g} below singularity floor {floor:.1g}"
        )
    return HermitianOperator((vecs / np.sqrt(vals)) @ vecs.conj().T)


def expectation(a, rho) -> float:
    """Real part of ``Tr(a rho)``; the imaginary residue must be negligible."""
    am, rm = _mat(a), _mat(rho)
    if am.shape != rm.shape:
        raise DimensionMismatchError(f"operator {am.shape} vs state {rm.shape}")
    val = np.einsum("ij,ji->", am, rm)
    if abs(val.imag) > IMAG_TOL * max(1.0, abs(val.real)):
        raise NumericalError(f"expectation has imaginary part {val.imag:.3g}")
    return float(val.real)


def density_operator(matrix, tol: float = PSD_TOL) -> HermitianOperator:
    """Validate a density operator: Hermitian, PSD and unit trace."""
    rho = HermitianOperator(matrix)
    tr = rho.trace()
    if abs(tr - 1.0) > tol:
        raise InvalidOperatorError(f"density operator trace {tr:.12g} != 1")
    ev = np.linalg.eigvalsh(rho.matrix)
    if ev[0] < -tol:
        raise InvalidOperatorError(f"density operator not PSD (min eigenvalue {ev[0]:.3g})")
    return rho


def pure_state(vec) -> HermitianOperator:
    v = np.asarray(vec, dtype=complex).ravel()
    v = v / np.linalg.norm(v)
    return HermitianOperator(np.outer(v, v.conj()))


def partial_trace(op, dims: tuple[int, int], keep: int) -> np.ndarray:
    """Trace out one factor of a bipartite operator; `keep` is 0 or 1."""
    m = _mat(op).reshape(dims[0], dims[1], dims[0], dims[1])
    if keep == 0:
        return np.einsum("ijkj->ik", m)
    return np.einsum("ijil->jl", m)
