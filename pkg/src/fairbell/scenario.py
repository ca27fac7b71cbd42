"""Bipartite CHSH scenarios in quantum mechanics.

A scenario is a shared state plus two lossy dichotomic measurements per
party. Each measurement is a pair of POVM elements (M+, M-); whatever is
left, ``I - M+ - M-``, is the failure (no detection) element.

Correlators are kept un-normalised, exactly as probabilities of successful
events. Normalisation by the pair efficiency only happens in
`bell_postselected`.
"""
from __future__ import annotations

import enum
import json
from dataclasses import dataclass
from itertools import product

import numpy as np

from .errors import CompleteLossError, DimensionMismatchError, InvalidOperatorError
from .operators import (
    PSD_TOL,
    HermitianOperator,
    PovmElement,
    density_operator,
    expectation,
    tensor_product,
)

PROB_TOL = 1e-9
LOSS_FLOOR = 1e-12


class Setting(enum.IntEnum):
    """Measurement setting of one party: A/B are UPPER, a/b are LOWER."""

    UPPER = 0
    LOWER = 1


UPPER, LOWER = Setting.UPPER, Setting.LOWER

# (alice setting, bob setting, sign) for B = C(A,B) + C(A,b) + C(a,B) - C(a,b)
CHSH_TERMS = (
    (UPPER, UPPER, 1.0),
    (UPPER, LOWER, 1.0),
    (LOWER, UPPER, 1.0),
    (LOWER, LOWER, -1.0),
)
SETTING_PAIRS = tuple((a, b) for a, b, _ in CHSH_TERMS)
OUTCOMES = (1, -1)

ALICE_LABELS = {UPPER: "A", LOWER: "a"}
BOB_LABELS = {UPPER: "B", LOWER: "b"}


@dataclass(frozen=True)
class DichotomicMeasurement:
    """Success elements M+ and M- of one lossy two-outcome measurement."""

    plus: PovmElement
    minus: PovmElement

    def __post_init__(self):
        plus, minus = PovmElement(self.plus), PovmElement(self.minus)
        if plus.dim != minus.dim:
            raise DimensionMismatchError("M+ and M- must share a dimension")
        fail = np.eye(plus.dim) - plus.matrix - minus.matrix
        if np.linalg.eigvalsh(fail)[0] < -PSD_TOL:
            raise InvalidOperatorError("M+ + M- exceeds the identity")
        object.__setattr__(self, "plus", plus)
        object.__setattr__(self, "minus", minus)

    @classmethod
    def from_success_and_delta(cls, success, delta) -> "DichotomicMeasurement":
        """Build from the success operator M = M+ + M- and Delta = M+ - M-."""
        m = np.asarray(HermitianOperator(success))
        d = np.asarray(HermitianOperator(delta))
        return cls(PovmElement(0.5 * (m + d)), PovmElement(0.5 * (m - d)))

    @classmethod
    def projective(cls, plus_projector) -> "DichotomicMeasurement":
        p = np.asarray(HermitianOperator(plus_projector))
        return cls(PovmElement(p), PovmElement(np.eye(p.shape[0]) - p))

    @property
    def dim(self) -> int:
        return self.plus.dim

    @property
    def success(self) -> HermitianOperator:
        return self.plus + self.minus

    @property
    def delta(self) -> HermitianOperator:
        return self.plus - self.minus

    @property
    def failure(self) -> HermitianOperator:
        return HermitianOperator(np.eye(self.dim)) - self.success

    def element(self, outcome: int) -> PovmElement:
        return self.plus if outcome > 0 else self.minus

    def is_lossless(self, tol: float = PSD_TOL) -> bool:
        return bool(np.max(np.abs(self.failure.matrix)) <= tol)


@dataclass(frozen=True)
class PartySettings:
    upper: DichotomicMeasurement
    lower: DichotomicMeasurement

    def __post_init__(self):
        if self.upper.dim != self.lower.dim:
            raise DimensionMismatchError("both settings of a party must share a dimension")

    def __getitem__(self, setting) -> DichotomicMeasurement:
        return self.upper if Setting(setting) is UPPER else self.lower

    @property
    def dim(self) -> int:
        return self.upper.dim


@dataclass(frozen=True)
class BellScenario:
    state: HermitianOperator
    alice: PartySettings
    bob: PartySettings

    def __post_init__(self):
        rho = density_operator(self.state)
        if rho.dim != self.alice.dim * self.bob.dim:
            raise DimensionMismatchError(
                f"state dimension {rho.dim} != {self.alice.dim} x {self.bob.dim}"
            )
        object.__setattr__(self, "state", rho)


@dataclass(frozen=True)
class CorrelatorTable:
    """Un-normalised correlators and efficiencies for the four setting pairs."""

    c: dict
    eff: dict

    def normalized(self, alpha, beta) -> float:
        return self.c[alpha, beta] / self.eff[alpha, beta]


def joint_probability(s: BellScenario, alpha, beta, s1: int, s2: int) -> float:
    op = tensor_product(s.alice[alpha].element(s1), s.bob[beta].element(s2))
    return _clamp_probability(expectation(op, s.state))


def failure_probability(s: BellScenario, alpha, beta) -> float:
    return 1.0 - efficiency(s, alpha, beta, check=False)


def _clamp_probability(p: float) -> float:
    if p < -PROB_TOL or p > 1 + PROB_TOL:
        raise InvalidOperatorError(f"probability {p:.3g} outside [0, 1]")
    return min(max(p, 0.0), 1.0)


def efficiency(s: BellScenario, alpha, beta, check: bool = True) -> float:
    """Probability that both parties register a result for this setting pair."""
    op = tensor_product(s.alice[alpha].success, s.bob[beta].success)
    eff = _clamp_probability(expectation(op, s.state))
    if check and eff < LOSS_FLOOR:
        raise CompleteLossError(
            f"efficiency {eff:.3g} for settings ({ALICE_LABELS[Setting(alpha)]},"
            f"{BOB_LABELS[Setting(beta)]})"
        )
    return eff


def correlator(s: BellScenario, alpha, beta) -> float:
    """p(++) - p(+-) - p(-+) + p(--), not divided by the efficiency."""
    op = tensor_product(s.alice[alpha].delta, s.bob[beta].delta)
    return expectation(op, s.state)


def correlator_table(s: BellScenario) -> CorrelatorTable:
    c = {pair: correlator(s, *pair) for pair in SETTING_PAIRS}
    eff = {pair: efficiency(s, *pair) for pair in SETTING_PAIRS}
    return CorrelatorTable(c=c, eff=eff)


def bell_raw(s: BellScenario) -> float:
    return sum(sign * correlator(s, a, b) for a, b, sign in CHSH_TERMS)


def bell_postselected(s: BellScenario) -> float:
    return sum(sign * correlator(s, a, b) / efficiency(s, a, b) for a, b, sign in CHSH_TERMS)


def probability_table(s: BellScenario) -> np.ndarray:
    """Array ``[alpha, beta, i, j]`` of joint success probabilities (i, j index +,-)."""
    out = np.empty((2, 2, 2, 2))
    for (a, b), (i, s1), (j, s2) in product(SETTING_PAIRS, enumerate(OUTCOMES), enumerate(OUTCOMES)):
        out[a, b, i, j] = joint_probability(s, a, b, s1, s2)
    return out


def postselected_table(s: BellScenario) -> np.ndarray:
    table = probability_table(s)
    for a, b in SETTING_PAIRS:
        table[a, b] /= efficiency(s, a, b)
    return table


# --- serialization -------------------------------------------------------

_MEAS_KEYS = tuple(
    (party, setting, sign)
    for party in ("alice", "bob")
    for setting in ("upper", "lower")
    for sign in ("plus", "minus")
)


def _encode_matrix(m) -> list:
    m = np.asarray(m, dtype=complex)
    return [[[float(z.real), float(z.imag)] for z in row] for row in m]


def _decode_matrix(rows) -> np.ndarray:
    return np.array([[complex(re, im) for re, im in row] for row in rows], dtype=complex)


def scenario_to_dict(s: BellScenario) -> dict:
    doc = {"state": _encode_matrix(s.state.matrix)}
    for party, setting, sign in _MEAS_KEYS:
        meas = getattr(getattr(s, party), setting)
        doc[f"{party}_{setting}_{sign}"] = _encode_matrix(getattr(meas, sign).matrix)
    return doc


def scenario_from_dict(doc: dict) -> BellScenario:
    mats = {key: _decode_matrix(val) for key, val in doc.items()}

    def party(name):
        return PartySettings(
            upper=DichotomicMeasurement(mats[f"{name}_upper_plus"], mats[f"{name}_upper_minus"]),
            lower=DichotomicMeasurement(mats[f"{name}_lower_plus"], mats[f"{name}_lower_minus"]),
        )

    return BellScenario(state=HermitianOperator(mats["state"]), alice=party("alice"), bob=party("bob"))


def dumps_scenario(s: BellScenario) -> str:
    return json.dumps(scenario_to_dict(s), indent=1)


def loads_scenario(text: str) -> BellScenario:
    return scenario_from_dict(json.loads(text))
