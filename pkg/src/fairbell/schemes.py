"""Closed-form constructions.

The non-orthogonal-state scheme: two qubit states |u>, |v> with real
overlap kappa, a local filter R(theta) with R|u> = |u>, R|v> = e^{i theta}|v>,
and a final measurement in the basis |+-> ~ |u> +- |v>. Plus two small
counterexamples: a separable state with B = 4 and a three-qubit
postselection rule that credits a separable state with B = 3.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import reduce

import numpy as np

from .errors import CompleteLossError, OutOfDomainError
from .lhv import LhvModel
from .operators import (
    PAULI_X,
    PAULI_Z,
    HermitianOperator,
    PovmElement,
    svd,
)
from .scenario import LOSS_FLOOR, BellScenario, DichotomicMeasurement, PartySettings

GOLDEN_TOL = 1e-12
GRID_POINTS = 64


def _check_kappa(kappa: float) -> float:
    kappa = float(kappa)
    if not 0.0 <= kappa < 1.0:
        raise OutOfDomainError(f"kappa must lie in [0, 1), got {kappa}")
    return kappa


# --- probabilities and the Bell function ---------------------------------


def scheme_probabilities(kappa: float, theta: float, phi: float) -> tuple[float, float, float, float]:
    """(P++, P+-, P-+, P--) after both filters succeeded."""
    k = _check_kappa(kappa)
    c = math.cos(theta + phi)
    den = 4.0 * (1.0 - k * k * c)
    pmm_pp = (1.0 - c) / den
    cross = (1.0 - k * k) * (1.0 + c) / den
    return (1.0 + k) ** 2 * pmm_pp, cross, cross, (1.0 - k) ** 2 * pmm_pp


def scheme_correlator(kappa: float, theta: float, phi: float = 0.0) -> float:
    k = _check_kappa(kappa)
    c = math.cos(theta + phi)
    return (k * k - c) / (1.0 - k * k * c)


def scheme_bell(kappa: float, Theta: float) -> float:
    """B at the symmetric optimum, a function of the angle sum Theta only."""
    return 3.0 * scheme_correlator(kappa, Theta / 2) - scheme_correlator(kappa, 3 * Theta / 2)


def theta_approx(kappa: float) -> float:
    return math.pi * (17.0 + math.cos(math.pi * kappa)) / 12.0


def optimal_theta(kappa: float) -> tuple[float, float]:
    """(Theta*, B*) maximising `scheme_bell` over [pi, 2 pi].

    A 64-point grid picks the bracket, golden-section search refines it.
    """
    _check_kappa(kappa)
    lo, hi = math.pi, 2 * math.pi
    grid = np.linspace(lo, hi, GRID_POINTS)
    vals = [scheme_bell(kappa, t) for t in grid]
    i = int(np.argmax(vals))
    a, b = grid[max(i - 1, 0)], grid[min(i + 1, GRID_POINTS - 1)]
    invphi = (math.sqrt(5) - 1) / 2
    c, d = b - invphi * (b - a), a + invphi * (b - a)
    fc, fd = scheme_bell(kappa, c), scheme_bell(kappa, d)
    while b - a > GOLDEN_TOL:
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = scheme_bell(kappa, c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = scheme_bell(kappa, d)
    t = 0.5 * (a + b)
    best = max((scheme_bell(kappa, t), t), (vals[i], grid[i]))
    return best[1], best[0]


# --- the filter R(theta) ---------------------------------------------------


def embedding(kappa: float) -> tuple[np.ndarray, np.ndarray]:
    """|u>, |v> as real unit vectors with <u|v> = kappa; |+> = |0>, |-> = |1>."""
    chi = 0.5 * math.acos(_check_kappa(kappa))
    return (
        np.array([math.cos(chi), math.sin(chi)], dtype=complex),
        np.array([math.cos(chi), -math.sin(chi)], dtype=complex),
    )


def filter_matrix(kappa: float, theta: float) -> np.ndarray:
    """R(theta) in the computational frame of `embedding`."""
    u, v = embedding(kappa)
    source = np.column_stack([u, v])
    target = np.column_stack([u, np.exp(1j * theta) * v])
    return target @ np.linalg.inv(source)


@dataclass(frozen=True)
class FilterSvd:
    u_plus: np.ndarray
    u_minus: np.ndarray
    w: np.ndarray
    a: float
    b: float
    d: float
    r: float

    def reconstruct(self) -> np.ndarray:
        return self.u_plus @ self.w @ self.u_minus.conj().T


def filter_parameters(kappa: float, theta: float) -> tuple[float, float, float, float]:
    """(a, b, d, r) of the closed-form SVD."""
    k = _check_kappa(kappa)
    b = math.sin(theta) * (math.sqrt((1 + k) / (1 - k)) - math.sqrt((1 - k) / (1 + k)))
    d = 4 * k * math.sin(theta / 2) ** 2 / (1 - k * k)
    a = 2 + k * d
    # a^2 - 4 = k d (4 + k d), without the cancellation
    r = math.sqrt(max(k * d * (4 + k * d), 0.0))
    return a, b, d, r


def _closed_unitary(b: float, r: float, d: float, sign: int):
    s = r + sign * d
    norm = math.sqrt(b * b + s * s)
    if norm < 1e-12:
        return None
    return np.array([[-1j * b, s], [-s, 1j * b]]) / norm


def filter_svd(kappa: float, theta: float) -> FilterSvd:
    """Closed-form ``R(theta) = U+ W U-^dagger`` up to a global phase.

    Where a closed-form unitary degenerates (theta = pi for U-, or r = 0
    for both) the missing factor is solved from R itself.
    """
    a, b, d, r = filter_parameters(kappa, theta)
    w = np.diag([math.sqrt((a - r) / 2), math.sqrt((a + r) / 2)]).astype(complex)
    up, um = _closed_unitary(b, r, d, 1), _closed_unitary(b, r, d, -1)
    rmat = filter_matrix(kappa, theta)
    if up is None and um is None:
        # r = 0: R is unitary and W = I
        up, um = rmat, np.eye(2, dtype=complex)
    elif um is None:
        um = (np.linalg.inv(w) @ up.conj().T @ rmat).conj().T
    elif up is None:
        up = rmat @ um @ np.linalg.inv(w)
    # fix the global phase so the product equals R exactly
    x = up @ w @ um.conj().T
    phase = np.vdot(x.ravel(), rmat.ravel())
    if abs(phase) > 0:
        up = up * (phase / abs(phase))
    return FilterSvd(u_plus=up, u_minus=um, w=w, a=a, b=b, d=d, r=r)


def scheme_efficiency_eta(kappa: float, theta: float) -> float:
    """Ratio of the small to the large singular value of R(theta)."""
    a, _, _, r = filter_parameters(kappa, theta)
    return math.sqrt((a - r) / (a + r))


def lhv_max_given_eta(eta: float) -> float:
    if not 0.0 < eta <= 1.0:
        raise OutOfDomainError(f"eta must lie in (0, 1], got {eta}")
    return 4.0 / eta - 2.0


# --- the scheme as a generic scenario --------------------------------------


@dataclass(frozen=True)
class KappaScheme:
    kappa: float
    theta_A: float
    theta_a: float
    phi_B: float
    phi_b: float

    def __post_init__(self):
        _check_kappa(self.kappa)
        angles = (self.theta_A, self.theta_a, self.phi_B, self.phi_b)
        if not all(math.isfinite(x) for x in angles):
            raise OutOfDomainError("angles must be finite")

    @classmethod
    def symmetric(cls, kappa: float, Theta: float) -> "KappaScheme":
        return cls(kappa, -Theta / 4, 3 * Theta / 4, -Theta / 4, 3 * Theta / 4)

    @property
    def angles(self) -> tuple[float, float, float, float]:
        return (self.theta_A, self.theta_a, self.phi_B, self.phi_b)

    def analytic_bell(self) -> float:
        c = scheme_correlator
        k = self.kappa
        return (
            c(k, self.theta_A, self.phi_B)
            + c(k, self.theta_A, self.phi_b)
            + c(k, self.theta_a, self.phi_B)
            - c(k, self.theta_a, self.phi_b)
        )

    def setting_etas(self) -> tuple[float, float, float, float]:
        return tuple(scheme_efficiency_eta(self.kappa, t) for t in self.angles)

    def eta(self) -> float:
        """Effective detector efficiency: geometric mean over the four settings."""
        return float(np.prod(self.setting_etas()) ** 0.25)


def filter_measurement(kappa: float, theta: float) -> DichotomicMeasurement:
    """Filter by R(theta) scaled to unit norm, then measure |+>, |->."""
    rmat = filter_matrix(kappa, theta)
    k = rmat / svd(rmat)[1][0]
    plus = k.conj().T @ np.diag([1.0, 0.0]) @ k
    minus = k.conj().T @ np.diag([0.0, 1.0]) @ k
    return DichotomicMeasurement(PovmElement(plus), PovmElement(minus))


def scheme_state(kappa: float) -> HermitianOperator:
    """(|u u> - |v v>) normalised; equals (|01> + |10>)/sqrt(2) for every kappa."""
    u, v = embedding(kappa)
    psi = np.kron(u, u) - np.kron(v, v)
    psi = psi / np.linalg.norm(psi)
    return HermitianOperator(np.outer(psi, psi.conj()))


def scheme_as_scenario(s: KappaScheme) -> BellScenario:
    alice = PartySettings(filter_measurement(s.kappa, s.theta_A), filter_measurement(s.kappa, s.theta_a))
    bob = PartySettings(filter_measurement(s.kappa, s.phi_B), filter_measurement(s.kappa, s.phi_b))
    return BellScenario(scheme_state(s.kappa), alice, bob)


# --- counterexamples -------------------------------------------------------


def appendix_a_scenario() -> BellScenario:
    """Classically correlated qubits; Alice's success depends on the setting."""
    p0, p1 = np.diag([1.0, 0.0]), np.diag([0.0, 1.0])
    zero, eye = np.zeros((2, 2)), np.eye(2)
    alice = PartySettings(DichotomicMeasurement(p0, zero), DichotomicMeasurement(p1, zero))
    bob = PartySettings(DichotomicMeasurement(eye, zero), DichotomicMeasurement(p0, p1))
    rho = 0.5 * (np.kron(p0, p0) + np.kron(p1, p1))
    return BellScenario(HermitianOperator(rho), alice, bob)


def appendix_a_lhv_model() -> LhvModel:
    """The same statistics from a two-valued hidden variable and no quantum system."""
    # response[party, setting, x] = (p+, p-)
    response = np.array(
        [
            [[[1, 0], [0, 0]], [[0, 0], [1, 0]]],  # Alice: A fires on x=0, a on x=1
            [[[1, 0], [1, 0]], [[1, 0], [0, 1]]],  # Bob: B always +, b reads x
        ],
        dtype=float,
    )
    return LhvModel([0.5, 0.5], response)


def _kron(*ops) -> np.ndarray:
    return reduce(np.kron, [np.asarray(o, dtype=complex) for o in ops])


def ghz_state() -> HermitianOperator:
    """(|+++>_y + |--->_y)/sqrt(2)."""
    yp = np.array([1, 1j]) / math.sqrt(2)
    ym = np.array([1, -1j]) / math.sqrt(2)
    psi = (_kron(yp, yp, yp) + _kron(ym, ym, ym)) / math.sqrt(2)
    return HermitianOperator(np.outer(psi, psi.conj()))


def appendix_c_separable_state() -> HermitianOperator:
    """Equal mixture of |--+>, |-+->, |+-->, |+++> in the Z basis."""
    up, dn = np.array([1.0, 0.0]), np.array([0.0, 1.0])
    kets = [_kron(dn, dn, up), _kron(dn, up, dn), _kron(up, dn, dn), _kron(up, up, up)]
    return HermitianOperator(sum(np.outer(k, k.conj()) for k in kets) / 4)


def _local(op, position: int) -> list:
    ops = [np.eye(2)] * 3
    ops[position] = op
    return ops


def _forced_correlators(rho: np.ndarray, k: int) -> tuple[float, float, float]:
    """(postselection probability, C(Z,Z), C(X,X)) on the other two qubits."""
    proj = _kron(*_local((np.eye(2) + np.asarray(PAULI_Z)) / 2, k))
    prob = float(np.trace(proj @ rho).real)
    if prob < LOSS_FLOOR:
        return prob, 0.0, 0.0
    post = proj @ rho @ proj / prob
    i, j = (q for q in range(3) if q != k)

    def corr(op):
        ops = [np.eye(2)] * 3
        ops[i] = ops[j] = op
        return float(np.trace(_kron(*ops) @ post).real)

    return prob, corr(PAULI_Z), corr(PAULI_X)


def ghz_postselected_bell(state, variant: str = "force") -> float:
    """B_x under the inferred-x_k rule, ``C(Z,Z) + 2 - C(X,X)``.

    ``variant="force"`` takes qubit 3 as k (postselect Z_3 = +1);
    ``"random"`` picks k uniformly and pools the postselected statistics.
    """
    rho = np.asarray(HermitianOperator(state))
    if rho.shape != (8, 8):
        raise OutOfDomainError("expected a three-qubit operator")
    if variant == "force":
        picks = [2]
    elif variant == "random":
        picks = [0, 1, 2]
    else:
        raise ValueError(f"unknown variant {variant!r}")
    stats = np.array([_forced_correlators(rho, k) for k in picks])
    total = stats[:, 0].sum()
    if total < LOSS_FLOOR:
        raise CompleteLossError("Z = +1 postselection has vanishing probability")
    czz = float(stats[:, 0] @ stats[:, 1]) / total
    cxx = float(stats[:, 0] @ stats[:, 2]) / total
    return czz + 2.0 - cxx


__all__ = [
    "FilterSvd",
    "KappaScheme",
    "appendix_a_lhv_model",
    "appendix_a_scenario",
    "appendix_c_separable_state",
    "embedding",
    "filter_matrix",
    "filter_measurement",
    "filter_parameters",
    "filter_svd",
    "ghz_postselected_bell",
    "ghz_state",
    "lhv_max_given_eta",
    "optimal_theta",
    "scheme_as_scenario",
    "scheme_bell",
    "scheme_correlator",
    "scheme_efficiency_eta",
    "scheme_probabilities",
    "scheme_state",
    "theta_approx",
]
