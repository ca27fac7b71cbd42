"""Random instances for property checks and the verification suite."""
from __future__ import annotations

import numpy as np

from .lhv import EfficiencyTable, LhvModel
from .operators import HermitianOperator
from .scenario import BellScenario, DichotomicMeasurement, PartySettings


def random_unitary(rng: np.random.Generator, d: int) -> np.ndarray:
    z = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_psd(rng, d: int, low: float = 0.2, high: float = 1.0) -> np.ndarray:
    """Random positive operator with spectrum in [low, high]."""
    u = random_unitary(rng, d)
    return (u * rng.uniform(low, high, size=d)) @ u.conj().T


def random_pure(rng, d: int) -> np.ndarray:
    v = rng.normal(size=d) + 1j * rng.normal(size=d)
    return v / np.linalg.norm(v)


def random_density(rng, d: int, rank: int | None = None) -> HermitianOperator:
    rank = d if rank is None else rank
    x = rng.normal(size=(d, rank)) + 1j * rng.normal(size=(d, rank))
    rho = x @ x.conj().T
    return HermitianOperator(rho / np.trace(rho).real)


def random_separable(rng, da: int, db: int, terms: int = 3) -> HermitianOperator:
    w = rng.dirichlet(np.ones(terms))
    rho = 0
    for wi in w:
        v = np.kron(random_pure(rng, da), random_pure(rng, db))
        rho = rho + wi * np.outer(v, v.conj())
    return HermitianOperator(rho)


def random_measurement(rng, success: np.ndarray) -> DichotomicMeasurement:
    """Random split of `success` into M+ and M-: Delta = M^{1/2} V M^{1/2}, |V| <= 1."""
    w, u = np.linalg.eigh(success)
    root = (u * np.sqrt(np.clip(w, 0, None))) @ u.conj().T
    d = success.shape[0]
    v = random_unitary(rng, d)
    v = (v * rng.uniform(-1, 1, size=d)) @ v.conj().T
    return DichotomicMeasurement.from_success_and_delta(success, root @ v @ root)


def random_fair_party(rng, d: int) -> PartySettings:
    """Success operators c_upper N and c_lower N with a shared random N."""
    n = random_psd(rng, d)
    c = rng.uniform(0.2, 1.0, size=2)
    return PartySettings(random_measurement(rng, c[0] * n), random_measurement(rng, c[1] * n))


def random_unfair_party(rng, d: int) -> PartySettings:
    return PartySettings(
        random_measurement(rng, random_psd(rng, d)), random_measurement(rng, random_psd(rng, d))
    )


def random_fair_scenario(rng, da: int = 2, db: int = 2, separable: bool = False) -> BellScenario:
    state = random_separable(rng, da, db) if separable else random_density(rng, da * db)
    return BellScenario(state, random_fair_party(rng, da), random_fair_party(rng, db))


def random_efficiency_table(rng, n: int, factorized: bool = False) -> EfficiencyTable:
    w = rng.dirichlet(np.ones(n))
    if factorized:
        s = rng.uniform(0.1, 1.0, size=(2, 2))
        h = rng.uniform(0.1, 1.0, size=(2, n))
        eff = s[:, :, None] * h[:, None, :]
    else:
        eff = rng.uniform(0.05, 1.0, size=(2, 2, n))
    return EfficiencyTable(w, eff)


def random_lhv_model(rng, n: int, factorized: bool = True) -> LhvModel:
    t = random_efficiency_table(rng, n, factorized)
    delta = rng.uniform(-1, 1, size=t.eff.shape) * t.eff
    return LhvModel.from_deltas(t.weights, t.eff, delta)


__all__ = [
    "random_density",
    "random_efficiency_table",
    "random_fair_party",
    "random_fair_scenario",
    "random_lhv_model",
    "random_measurement",
    "random_psd",
    "random_pure",
    "random_separable",
    "random_unfair_party",
    "random_unitary",
]
