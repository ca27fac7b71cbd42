"""Fair sampling on the quantum side.

The loss is fair when each party's success operators for the two settings
are proportional, ``M_lower = kappa * M_upper``. Then postselection can be
undone with a local filter (`depostselect_quantum`). When it is not fair,
`separable_violation_construction` builds a separable state and sub-POVMs
with B > 2, and `tsirelson_violation_construction` gives the two-sided
family that beats 2*sqrt(2).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import product

import numpy as np

from .errors import (
    ConditionHoldsError,
    NotFairError,
    OutOfDomainError,
    ProportionalError,
    ZeroOperatorError,
)
from .operators import (
    PAULI_Y,
    PAULI_Z,
    HermitianOperator,
    PovmElement,
    eig_hermitian,
    psd_inv_sqrt,
    psd_sqrt,
    tensor_product,
)
from .scenario import (
    LOWER,
    UPPER,
    LOSS_FLOOR,
    BellScenario,
    DichotomicMeasurement,
    PartySettings,
    bell_postselected,
)

PROPORTIONAL_TOL = 1e-9
WITNESS_GAP = 1e-10
TSIRELSON = 2 * math.sqrt(2)


@dataclass(frozen=True)
class NotProportional:
    kappa: float
    residual: float


def proportionality_check(m, n, rel_tol: float = PROPORTIONAL_TOL):
    """Return kappa with ``m = kappa * n`` or NotProportional."""
    m, n = np.asarray(HermitianOperator(m)), np.asarray(HermitianOperator(n))
    tr_n = float(np.trace(n).real)
    if tr_n < 1e-12:
        raise ZeroOperatorError("reference operator has vanishing trace")
    kappa = float(np.trace(m).real) / tr_n
    residual = float(np.max(np.abs(m - kappa * n)))
    if residual <= rel_tol * float(np.max(np.abs(m))):
        return kappa
    return NotProportional(kappa=kappa, residual=residual)


@dataclass(frozen=True)
class PartyFairness:
    fair: bool
    # setting factors (upper, lower) scaled so the larger is 1; None if unfair
    factors: tuple | None
    kappa: float | None


@dataclass(frozen=True)
class FairnessVerdict:
    alice: PartyFairness
    bob: PartyFairness

    @property
    def fair(self) -> bool:
        return self.alice.fair and self.bob.fair

    @property
    def failing_sides(self) -> tuple:
        return tuple(name for name in ("alice", "bob") if not getattr(self, name).fair)


def _party_fairness(party: PartySettings, rel_tol: float) -> PartyFairness:
    k = proportionality_check(party.lower.success, party.upper.success, rel_tol)
    if isinstance(k, NotProportional):
        return PartyFairness(fair=False, factors=None, kappa=None)
    top = max(1.0, k)
    return PartyFairness(fair=True, factors=(1.0 / top, k / top), kappa=k)


def quantum_fairness_check(
    alice: PartySettings, bob: PartySettings, rel_tol: float = PROPORTIONAL_TOL
) -> FairnessVerdict:
    return FairnessVerdict(_party_fairness(alice, rel_tol), _party_fairness(bob, rel_tol))


def depostselect_quantum(s: BellScenario) -> BellScenario:
    """Lossless scenario whose raw statistics equal `s`'s postselected ones.

    Each element is filtered as ``M_g^{-1/2} M^{+-} M_g^{-1/2}`` and the state
    is replaced by ``N^{1/2} rho N^{1/2}`` normalised, where N is the tensor
    product of the setting-independent parts of the success operators.
    """
    verdict = quantum_fairness_check(s.alice, s.bob)
    if not verdict.fair:
        raise NotFairError(f"loss is not fair on: {', '.join(verdict.failing_sides)}")

    def filtered(party: PartySettings, factors) -> tuple[PartySettings, HermitianOperator]:
        meas = []
        for setting in (UPPER, LOWER):
            m = party[setting]
            x = np.asarray(psd_inv_sqrt(m.success))
            meas.append(
                DichotomicMeasurement(
                    PovmElement(x @ m.plus.matrix @ x), PovmElement(x @ m.minus.matrix @ x)
                )
            )
        common = party.upper.success * (1.0 / factors[0])
        return PartySettings(*meas), psd_sqrt(common)

    alice, ra = filtered(s.alice, verdict.alice.factors)
    bob, rb = filtered(s.bob, verdict.bob.factors)
    root = np.kron(ra.matrix, rb.matrix)
    rho = root @ s.state.matrix @ root
    rho = rho / np.trace(rho).real
    return BellScenario(HermitianOperator(rho), alice, bob)


def _expect(vec, op) -> float:
    return float(np.vdot(vec, np.asarray(op) @ vec).real)


def _witness_gap(phi0, phi1, m, n) -> float:
    """``<0|n|0><1|m|1> - <0|m|0><1|n|1>``; positive means the pair is a witness."""
    return _expect(phi0, n) * _expect(phi1, m) - _expect(phi0, m) * _expect(phi1, n)


def find_condition_witness_states(m, n, seed: int = 0):
    """Orthonormal pair with ``<0|m|0><1|n|1> < <0|n|0><1|m|1>`` strictly.

    Tries ordered pairs of eigenvectors of ``m - kappa n`` first, then 200
    random orthonormal pairs.
    """
    k = proportionality_check(m, n)
    if not isinstance(k, NotProportional):
        raise ProportionalError(f"operators are proportional (kappa={k:.6g})")
    m, n = HermitianOperator(m), HermitianOperator(n)
    _, vecs = eig_hermitian(m - n * k.kappa)
    best = None
    for i, j in product(range(vecs.shape[1]), repeat=2):
        if i == j:
            continue
        gap = _witness_gap(vecs[:, i], vecs[:, j], m, n)
        if gap > WITNESS_GAP and (best is None or gap > best[0]):
            best = (gap, vecs[:, i], vecs[:, j])
    if best is not None:
        return best[1], best[2]
    rng = np.random.default_rng(seed)
    d = m.dim
    for _ in range(200):
        z = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
        q, _ = np.linalg.qr(z)
        for a, b in ((0, 1), (1, 0)):
            if _witness_gap(q[:, a], q[:, b], m, n) > WITNESS_GAP:
                return q[:, a], q[:, b]
    raise ProportionalError("no witness pair found; operators are numerically proportional")


# --- separable violation (necessity of fairness) -------------------------

# per-setting roles in a construction
_FULL_PLUS, _FULL_MINUS, _SPLIT, _SPLIT_FLIPPED = range(4)


def _candidate_bases(party: PartySettings, seed: int) -> list[np.ndarray]:
    ops = [party.upper.success, party.lower.success]
    bases = [eig_hermitian(op)[1] for op in ops]
    k = proportionality_check(ops[1], ops[0])
    if isinstance(k, NotProportional):
        phi0, phi1 = find_condition_witness_states(ops[1], ops[0], seed=seed)
        bases.append(np.column_stack([phi0, phi1]))
    out = []
    for v in bases:
        d = v.shape[1]
        for i, j in product(range(d), repeat=2):
            if i != j:
                out.append(np.column_stack([v[:, i], v[:, j]]))
    return out


def _local_roles(party: PartySettings, basis: np.ndarray):
    """For every setting and role: (valid, <Delta>_j, <M>_j) on the two basis states."""
    table = {}
    phi0, phi1 = basis[:, 0], basis[:, 1]
    for setting in (UPPER, LOWER):
        m = party[setting].success
        mexp = np.array([_expect(phi0, m), _expect(phi1, m)])
        lam = mexp[0]
        mvec = np.asarray(m) @ phi0
        is_eigvec = np.linalg.norm(mvec - lam * phi0) <= 1e-9 * max(1.0, np.linalg.norm(mvec))
        table[setting, _FULL_PLUS] = (True, mexp.copy(), mexp)
        table[setting, _FULL_MINUS] = (True, -mexp, mexp)
        # M+ = <0|M|0> |0><0| needs |0> to be an eigenvector so that M - M+ >= 0
        split = np.array([mexp[0], -mexp[1]])
        table[setting, _SPLIT] = (is_eigvec, split, mexp)
        table[setting, _SPLIT_FLIPPED] = (is_eigvec, -split, mexp)
    return table


def _role_measurement(party: PartySettings, setting, role, basis) -> DichotomicMeasurement:
    m = np.asarray(party[setting].success)
    if role in (_FULL_PLUS, _FULL_MINUS):
        zero = np.zeros_like(m)
        plus, minus = (m, zero) if role == _FULL_PLUS else (zero, m)
    else:
        phi0 = basis[:, 0]
        part = _expect(phi0, m) * np.outer(phi0, phi0.conj())
        plus, minus = (part, m - part) if role == _SPLIT else (m - part, part)
    return DichotomicMeasurement(PovmElement(plus), PovmElement(minus))


@dataclass(frozen=True)
class SeparableViolation:
    scenario: BellScenario
    value: float
    predicted: float
    alice_basis: np.ndarray
    bob_basis: np.ndarray


def _separable_value(ta, tb, roles) -> float:
    ra_up, ra_lo, rb_up, rb_lo = roles
    total = 0.0
    for (sa, role_a), (sb, role_b), sign in (
        ((UPPER, ra_up), (UPPER, rb_up), 1.0),
        ((UPPER, ra_up), (LOWER, rb_lo), 1.0),
        ((LOWER, ra_lo), (UPPER, rb_up), 1.0),
        ((LOWER, ra_lo), (LOWER, rb_lo), -1.0),
    ):
        _, da, ma = ta[sa, role_a]
        _, db, mb = tb[sb, role_b]
        den = float(ma @ mb)
        if den < LOSS_FLOOR:
            return -math.inf
        total += sign * float(da @ db) / den
    return total


def separable_violation_construction(
    alice: PartySettings, bob: PartySettings, seed: int = 0
) -> SeparableViolation:
    """Separable state and sub-POVMs with the given success operators and B > 2.

    The state is ``(|phi0 chi0><..| + |phi1 chi1><..|)/2``. One setting per
    party keeps its whole success operator on one outcome; the other splits
    it between the two basis states. Candidate bases are eigenbases of the
    success operators and the proportionality witness pair; every valid
    role assignment is scored in closed form and the best one is built and
    re-evaluated with the generic evaluator.
    """
    verdict = quantum_fairness_check(alice, bob)
    if verdict.fair:
        raise ConditionHoldsError("loss is fair on both sides; |B| <= 2 for separable states")
    best = None
    roles_all = list(product(range(4), repeat=4))
    for ba in _candidate_bases(alice, seed):
        ta = _local_roles(alice, ba)
        for bb in _candidate_bases(bob, seed):
            tb = _local_roles(bob, bb)
            for roles in roles_all:
                ra_up, ra_lo, rb_up, rb_lo = roles
                if not (
                    ta[UPPER, ra_up][0] and ta[LOWER, ra_lo][0]
                    and tb[UPPER, rb_up][0] and tb[LOWER, rb_lo][0]
                ):
                    continue
                val = _separable_value(ta, tb, roles)
                if best is None or val > best[0] + 1e-15:
                    best = (val, ba, bb, roles)
    val, ba, bb, roles = best
    if val <= 2.0:
        raise ConditionHoldsError(f"no construction exceeded 2 (best {val:.6g})")
    ra_up, ra_lo, rb_up, rb_lo = roles
    alice_m = PartySettings(
        _role_measurement(alice, UPPER, ra_up, ba), _role_measurement(alice, LOWER, ra_lo, ba)
    )
    bob_m = PartySettings(
        _role_measurement(bob, UPPER, rb_up, bb), _role_measurement(bob, LOWER, rb_lo, bb)
    )
    rho = 0.5 * sum(
        np.kron(np.outer(ba[:, j], ba[:, j].conj()), np.outer(bb[:, j], bb[:, j].conj()))
        for j in range(2)
    )
    scen = BellScenario(HermitianOperator(rho), alice_m, bob_m)
    return SeparableViolation(
        scenario=scen, value=bell_postselected(scen), predicted=val, alice_basis=ba, bob_basis=bb
    )


# --- two-sided construction beyond 2*sqrt(2) ------------------------------

DOMAIN_MARGIN = 1e-12


def tsirelson_closed_form(p_a: float, p_b: float) -> float:
    """Closed-form B of the first branch (valid when p_a < sqrt(p_b) < 1)."""
    sb = math.sqrt(p_b)
    return TSIRELSON + math.sqrt(2) * (1 - sb) * (sb - p_a) / ((1 + p_a) * (1 + p_b))


@dataclass(frozen=True)
class TsirelsonViolation:
    scenario: BellScenario
    value: float
    closed_form: float
    swapped: bool


def _in_branch(p_small: float, p_root: float) -> bool:
    r = math.sqrt(p_root)
    return p_small < r - DOMAIN_MARGIN and r < 1 - DOMAIN_MARGIN


def tsirelson_violation_construction(p_a: float, p_b: float) -> TsirelsonViolation:
    """Maximally entangled state and sub-POVMs with success operators
    diag(1, p_a), I for Alice and diag(1, p_b), I for Bob giving B > 2*sqrt(2).
    """
    if not (0 < p_a <= 1 and 0 < p_b <= 1):
        raise OutOfDomainError("p_a and p_b must lie in (0, 1]")
    if _in_branch(p_a, p_b):
        swapped = False
    elif _in_branch(p_b, p_a):
        swapped = True
    else:
        raise OutOfDomainError(
            f"need p_a < sqrt(p_b) < 1 or p_b < sqrt(p_a) < 1, got ({p_a}, {p_b})"
        )
    y, z = np.asarray(PAULI_Y), np.asarray(PAULI_Z)
    m_a = np.diag([1.0, p_a]).astype(complex)
    m_b = np.diag([1.0, p_b]).astype(complex)
    ra, rb = np.sqrt(m_a), np.sqrt(m_b)
    eye = np.eye(2, dtype=complex)
    diag_side = {  # the side whose upper setting is lossy in the construction
        "upper": lambda r: -r @ z @ r,
        "lower": y,
    }
    rotated_side = {
        "upper": lambda r: r @ (y - z) @ r / math.sqrt(2),
        "lower": (y + z) / math.sqrt(2),
    }
    if not swapped:
        alice_d = (diag_side["upper"](ra), diag_side["lower"])
        bob_d = (rotated_side["upper"](rb), rotated_side["lower"])
        closed = tsirelson_closed_form(p_a, p_b)
    else:
        alice_d = (rotated_side["upper"](ra), rotated_side["lower"])
        bob_d = (diag_side["upper"](rb), diag_side["lower"])
        closed = tsirelson_closed_form(p_b, p_a)
    alice = PartySettings(
        DichotomicMeasurement.from_success_and_delta(m_a, alice_d[0]),
        DichotomicMeasurement.from_success_and_delta(eye, alice_d[1]),
    )
    bob = PartySettings(
        DichotomicMeasurement.from_success_and_delta(m_b, bob_d[0]),
        DichotomicMeasurement.from_success_and_delta(eye, bob_d[1]),
    )
    # (|01> + |10>)/2 + i(|00> + |11>)/2 with the standard sigma_y
    psi = np.array([1j, 1, 1, 1j]) / 2
    scen = BellScenario(HermitianOperator(np.outer(psi, psi.conj())), alice, bob)
    return TsirelsonViolation(
        scenario=scen, value=bell_postselected(scen), closed_form=closed, swapped=swapped
    )


__all__ = [
    "NotProportional",
    "PartyFairness",
    "FairnessVerdict",
    "SeparableViolation",
    "TsirelsonViolation",
    "proportionality_check",
    "quantum_fairness_check",
    "depostselect_quantum",
    "find_condition_witness_states",
    "separable_violation_construction",
    "tsirelson_closed_form",
    "tsirelson_violation_construction",
    "tensor_product",
]
