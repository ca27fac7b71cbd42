"""Lossy local hidden-variable models for the CHSH scenario.

Arrays use a fixed layout throughout:

* ``weights[x]`` is p(x),
* ``response[k, g, x, o]`` is p_k(o | g, x) for party k (0 Alice, 1 Bob),
  setting g (0 upper, 1 lower) and outcome o (0 for +, 1 for -),
* ``eff[k, g, x]`` is the single-party efficiency, the sum over outcomes.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import CompleteLossError, InvalidOperatorError, NotFactorizableError
from .kernels import lhv_extremal_bounds
from .scenario import CHSH_TERMS, LOSS_FLOOR

WEIGHT_TOL = 1e-12
RATIO_TOL = 1e-9


def _freeze(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class EfficiencyTable:
    weights: np.ndarray
    eff: np.ndarray

    def __post_init__(self):
        w, e = _freeze(self.weights), _freeze(self.eff)
        if w.ndim != 1 or e.shape != (2, 2, w.size):
            raise InvalidOperatorError(f"efficiency table shape {e.shape} vs {w.size} hidden values")
        if np.any(w < 0) or abs(w.sum() - 1.0) > WEIGHT_TOL:
            raise InvalidOperatorError("hidden-value weights must be a probability vector")
        if np.any(e < 0) or np.any(e > 1):
            raise InvalidOperatorError("single-party efficiencies must lie in [0, 1]")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "eff", e)

    @property
    def n_hidden(self) -> int:
        return self.weights.size

    def pair_efficiency(self, alpha, beta) -> float:
        val = float(np.sum(self.weights * self.eff[0, alpha] * self.eff[1, beta]))
        if val < LOSS_FLOOR:
            raise CompleteLossError(f"pair efficiency {val:.3g} for settings ({alpha},{beta})")
        return val

    def ratios(self) -> np.ndarray:
        """``r[pair, x] = eff1(alpha,x) eff2(beta,x) / E(alpha,beta)`` in CHSH term order."""
        return np.array(
            [self.eff[0, a] * self.eff[1, b] / self.pair_efficiency(a, b) for a, b, _ in CHSH_TERMS]
        )


@dataclass(frozen=True)
class LhvModel:
    weights: np.ndarray
    response: np.ndarray
    labels: tuple = field(default=None)

    def __post_init__(self):
        w, r = _freeze(self.weights), _freeze(self.response)
        if w.ndim != 1 or r.shape != (2, 2, w.size, 2):
            raise InvalidOperatorError(f"response shape {r.shape} vs {w.size} hidden values")
        if np.any(w < 0) or abs(w.sum() - 1.0) > WEIGHT_TOL:
            raise InvalidOperatorError("hidden-value weights must be a probability vector")
        if np.any(r < -WEIGHT_TOL):
            raise InvalidOperatorError("response probabilities must be non-negative")
        eff = r.sum(axis=3)
        if np.any(eff > 1 + WEIGHT_TOL):
            raise InvalidOperatorError("per-party efficiencies must not exceed 1")
        labels = tuple(range(w.size)) if self.labels is None else tuple(self.labels)
        if len(labels) != w.size:
            raise InvalidOperatorError("one label per hidden value required")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "response", r)
        object.__setattr__(self, "labels", labels)

    @classmethod
    def from_deltas(cls, weights, eff, delta, labels=None) -> "LhvModel":
        """Build responses p(+) = (eff+delta)/2, p(-) = (eff-delta)/2."""
        eff, delta = np.asarray(eff, float), np.asarray(delta, float)
        return cls(weights, np.stack([(eff + delta) / 2, (eff - delta) / 2], axis=-1), labels)

    @property
    def n_hidden(self) -> int:
        return self.weights.size

    @property
    def efficiencies(self) -> np.ndarray:
        return self.response.sum(axis=3)

    @property
    def deltas(self) -> np.ndarray:
        return self.response[..., 0] - self.response[..., 1]

    def efficiency_table(self) -> EfficiencyTable:
        return EfficiencyTable(self.weights, np.clip(self.efficiencies, None, 1.0))

    def is_lossless(self, tol: float = 1e-12) -> bool:
        return bool(np.all(np.abs(self.efficiencies - 1) <= tol))


def _outcome_index(s: int) -> int:
    return 0 if s > 0 else 1


def lhv_joint_probability(m: LhvModel, s1: int, s2: int, alpha, beta) -> float:
    p1 = m.response[0, alpha, :, _outcome_index(s1)]
    p2 = m.response[1, beta, :, _outcome_index(s2)]
    return float(np.sum(m.weights * p1 * p2))


def lhv_efficiency(m: LhvModel, alpha, beta) -> float:
    eff = m.efficiencies
    val = float(np.sum(m.weights * eff[0, alpha] * eff[1, beta]))
    if val < LOSS_FLOOR:
        raise CompleteLossError(f"pair efficiency {val:.3g}")
    return val


def lhv_probability_table(m: LhvModel, postselect: bool = False) -> np.ndarray:
    """``[alpha, beta, i, j]`` joint probabilities, optionally divided by efficiency."""
    w, r = m.weights, m.response
    table = np.einsum("x,axi,bxj->abij", w, r[0], r[1])
    if postselect:
        for a in range(2):
            for b in range(2):
                table[a, b] /= lhv_efficiency(m, a, b)
    return table


def lhv_bell_postselected(m: LhvModel) -> float:
    d, w = m.deltas, m.weights
    return float(
        sum(
            sign * np.sum(w * d[0, a] * d[1, b]) / lhv_efficiency(m, a, b)
            for a, b, sign in CHSH_TERMS
        )
    )


def bell_bound_bmax(t: EfficiencyTable) -> float:
    """Largest |B| any LHV model with these efficiencies can reach."""
    return 4.0 - 2.0 * float(np.sum(t.weights * t.ratios().min(axis=0)))


# Delta signs (Alice upper, Alice lower, Bob upper, Bob lower) that make
# exactly one CHSH term negative, indexed by that term's position.
_ONE_NEGATIVE = np.array(
    [
        [-1, 1, 1, -1],  # (A,B) negative
        [1, 1, 1, -1],  # (A,b) negative
        [1, -1, 1, 1],  # (a,B) negative
        [1, 1, 1, 1],  # (a,b) negative
    ],
    dtype=float,
)


def saturating_assignment(t: EfficiencyTable, sign: int = 1) -> LhvModel:
    """Extremal model reaching ``sign * bell_bound_bmax(t)``.

    For each hidden value every Delta is set to +-efficiency so that three
    CHSH terms are positive and the smallest one is negative (first minimum
    in term order on ties). ``sign=-1`` flips both of Alice's Deltas.
    """
    worst = np.argmin(t.ratios(), axis=0)  # argmin returns the first minimum
    signs = _ONE_NEGATIVE[worst].T  # (4, n)
    if sign < 0:
        signs[:2] *= -1
    delta = signs.reshape(2, 2, -1) * t.eff
    return LhvModel.from_deltas(t.weights, t.eff, delta)


def brute_force_extremes(t: EfficiencyTable) -> tuple[float, float]:
    """(max B, min B) over every joint assignment of Delta = +-efficiency.

    Enumerates all 16^n sign patterns for n hidden values without using the
    per-hidden-value decomposition; only meant for small n.
    """
    pair_eff = np.array([[t.pair_efficiency(a, b) for b in range(2)] for a in range(2)])
    return lhv_extremal_bounds(t.weights, t.eff[0], t.eff[1], pair_eff)


@dataclass(frozen=True)
class Factorization:
    setting_factor: np.ndarray  # [party, setting]
    hidden_factor: np.ndarray  # [party, x]
    residual: float

    def reconstruct(self) -> np.ndarray:
        return self.setting_factor[:, :, None] * self.hidden_factor[:, None, :]


@dataclass(frozen=True)
class NotFactorizable:
    party: int
    worst_minor: float
    columns: tuple


def _worst_minor(e: np.ndarray) -> tuple[float, tuple]:
    """Largest normalised 2x2 minor of a 2 x n positive matrix."""
    worst, where = 0.0, ()
    n = e.shape[1]
    for x in range(n):
        for y in range(x + 1, n):
            p, q = e[0, x] * e[1, y], e[1, x] * e[0, y]
            if p + q == 0:
                continue
            rel = abs(p - q) / (p + q)
            if rel > worst:
                worst, where = rel, (x, y)
    return worst, where


def factorization_check(t: EfficiencyTable, rel_tol: float = RATIO_TOL):
    """Factor ``eff_k(g, x) = S_k(g) H_k(x)`` if every party's table is rank one.

    Returns a Factorization normalised so ``max_g S_k(g) = 1``, or a
    NotFactorizable describing the worst minor.
    """
    e = t.eff
    for k in range(2):
        worst, where = _worst_minor(e[k])
        if worst > rel_tol:
            return NotFactorizable(party=k, worst_minor=worst, columns=where)
    # reference hidden value: the first one where each party fires most
    x0 = np.argmax(e.sum(axis=1), axis=1)
    ref = e[[0, 1], :, x0]
    setting = ref / ref.max(axis=1, keepdims=True)
    hidden = e.max(axis=1)
    recon = setting[:, :, None] * hidden[:, None, :]
    residual = float(np.max(np.abs(recon - e) / np.maximum(e, LOSS_FLOOR)))
    return Factorization(setting_factor=setting, hidden_factor=hidden, residual=residual)


@dataclass(frozen=True)
class ConditionHolds:
    """The ratio condition holds for every hidden value: |B| <= 2 for all models."""

    max_spread: float


def violation_witness(t: EfficiencyTable, rel_tol: float = RATIO_TOL):
    """A model with |B| > 2 if the efficiency ratios depend on the settings."""
    r = t.ratios()
    spread = (r.max(axis=0) - r.min(axis=0)) / r.max(axis=0)
    spread = np.where(t.weights > 0, spread, 0.0)
    if np.max(spread) <= rel_tol:
        return ConditionHolds(max_spread=float(np.max(spread)))
    return saturating_assignment(t)


def depostselect(m: LhvModel) -> LhvModel:
    """Lossless model whose raw statistics equal `m`'s postselected ones.

    Requires the efficiencies to factorise; hidden values are reweighted by
    their hidden-variable efficiency factors and responses renormalised.
    """
    fac = factorization_check(m.efficiency_table())
    if isinstance(fac, NotFactorizable):
        raise NotFactorizableError(
            f"party {fac.party} efficiencies are not rank one (minor {fac.worst_minor:.3g})"
        )
    h = fac.hidden_factor[0] * fac.hidden_factor[1]
    overall = float(np.sum(m.weights * h))
    weights = m.weights * h / overall
    eff = m.efficiencies
    # hidden values that never fire on some setting get zero weight anyway
    safe = np.where(eff > 0, eff, 1.0)[..., None]
    response = np.where(eff[..., None] > 0, m.response / safe, [1.0, 0.0])
    return LhvModel(weights, response, m.labels)


# --- serialization -------------------------------------------------------

_PARTIES = ("alice", "bob")
_SETTINGS = ("upper", "lower")


def model_to_dict(m: LhvModel) -> dict:
    return {
        "hidden_values": [str(label) if not isinstance(label, int) else label for label in m.labels],
        "weights": [float(w) for w in m.weights],
        "response": {
            party: {
                setting: [[float(p) for p in m.response[k, g, x]] for x in range(m.n_hidden)]
                for g, setting in enumerate(_SETTINGS)
            }
            for k, party in enumerate(_PARTIES)
        },
    }


def model_from_dict(doc: dict) -> LhvModel:
    n = len(doc["weights"])
    response = np.empty((2, 2, n, 2))
    for k, party in enumerate(_PARTIES):
        for g, setting in enumerate(_SETTINGS):
            response[k, g] = np.asarray(doc["response"][party][setting], dtype=float)
    return LhvModel(doc["weights"], response, tuple(doc["hidden_values"]))


def dumps_model(m: LhvModel) -> str:
    return json.dumps(model_to_dict(m), indent=1)


def loads_model(text: str) -> LhvModel:
    return model_from_dict(json.loads(text))
