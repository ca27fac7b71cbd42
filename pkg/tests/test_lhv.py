import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fairbell.errors import InvalidOperatorError, NotFactorizableError
from fairbell.lhv import (
    ConditionHolds,
    EfficiencyTable,
    Factorization,
    LhvModel,
    NotFactorizable,
    bell_bound_bmax,
    brute_force_extremes,
    depostselect,
    dumps_model,
    factorization_check,
    lhv_bell_postselected,
    lhv_probability_table,
    loads_model,
    saturating_assignment,
    violation_witness,
)
from fairbell.sampling import random_efficiency_table, random_lhv_model

seeds = st.integers(min_value=0, max_value=2**32 - 1)
hidden = st.integers(min_value=1, max_value=4)


def enumerate_extremes(t):
    """Independent oracle: every deterministic Delta = +-eff assignment."""
    w, e = t.weights, t.eff
    n = w.size
    best, worst = -np.inf, np.inf
    for signs in itertools.product((1.0, -1.0), repeat=4 * n):
        d = np.array(signs).reshape(2, 2, n) * e
        m = LhvModel.from_deltas(w, e, d)
        b = lhv_bell_postselected(m)
        best, worst = max(best, b), min(worst, b)
    return best, worst


def test_table_validation():
    with pytest.raises(InvalidOperatorError):
        EfficiencyTable([0.5, 0.6], np.ones((2, 2, 2)))
    with pytest.raises(InvalidOperatorError):
        EfficiencyTable([1.0], np.full((2, 2, 1), 1.1))
    with pytest.raises(InvalidOperatorError):
        EfficiencyTable([1.0], np.ones((2, 2, 2)))


def test_lossless_bound_is_two():
    t = EfficiencyTable([0.3, 0.7], np.ones((2, 2, 2)))
    assert bell_bound_bmax(t) == pytest.approx(2.0)
    assert isinstance(violation_witness(t), ConditionHolds)


@settings(max_examples=40, deadline=None)
@given(seeds, st.integers(min_value=1, max_value=2))
def test_bound_matches_enumeration(seed, n):
    t = random_efficiency_table(np.random.default_rng(seed), n)
    best, worst = enumerate_extremes(t)
    assert bell_bound_bmax(t) == pytest.approx(best, abs=1e-10)
    assert brute_force_extremes(t) == pytest.approx((best, worst), abs=1e-10)


@settings(max_examples=60, deadline=None)
@given(seeds, hidden)
def test_saturation(seed, n):
    t = random_efficiency_table(np.random.default_rng(seed), n)
    bmax = bell_bound_bmax(t)
    assert lhv_bell_postselected(saturating_assignment(t)) == pytest.approx(bmax, abs=1e-10)
    assert lhv_bell_postselected(saturating_assignment(t, sign=-1)) == pytest.approx(-bmax, abs=1e-10)
    assert 2 - 1e-12 <= bmax <= 4


@settings(max_examples=60, deadline=None)
@given(seeds, hidden)
def test_random_models_within_bound(seed, n):
    m = random_lhv_model(np.random.default_rng(seed), n, factorized=False)
    assert abs(lhv_bell_postselected(m)) <= bell_bound_bmax(m.efficiency_table()) + 1e-10


@settings(max_examples=60, deadline=None)
@given(seeds, hidden)
def test_factorized_tables_obey_chsh(seed, n):
    m = random_lhv_model(np.random.default_rng(seed), n, factorized=True)
    t = m.efficiency_table()
    assert isinstance(factorization_check(t), Factorization)
    assert bell_bound_bmax(t) == pytest.approx(2.0, abs=1e-9)
    assert abs(lhv_bell_postselected(m)) <= 2 + 1e-9


@settings(max_examples=60, deadline=None)
@given(seeds, st.integers(min_value=2, max_value=4))
def test_generic_tables_have_witness(seed, n):
    t = random_efficiency_table(np.random.default_rng(seed), n)
    assert isinstance(factorization_check(t), NotFactorizable)
    w = violation_witness(t)
    assert isinstance(w, LhvModel)
    assert lhv_bell_postselected(w) > 2


@settings(max_examples=40, deadline=None)
@given(seeds, hidden)
def test_factorization_reconstructs(seed, n):
    t = random_efficiency_table(np.random.default_rng(seed), n, factorized=True)
    f = factorization_check(t)
    assert np.allclose(f.reconstruct(), t.eff)
    assert np.allclose(f.setting_factor.max(axis=1), 1.0)


@settings(max_examples=60, deadline=None)
@given(seeds, hidden)
def test_depostselect_round_trip(seed, n):
    m = random_lhv_model(np.random.default_rng(seed), n)
    d = depostselect(m)
    assert d.is_lossless()
    assert np.allclose(lhv_probability_table(d), lhv_probability_table(m, True), atol=1e-12)


def test_depostselect_lossless_is_identity():
    m = random_lhv_model(np.random.default_rng(0), 3)
    lossless = LhvModel(m.weights, m.response / m.efficiencies[..., None])
    d = depostselect(lossless)
    assert np.allclose(d.weights, lossless.weights)
    assert np.allclose(d.response, lossless.response)


def test_depostselect_refuses_unfactorizable():
    m = random_lhv_model(np.random.default_rng(1), 3, factorized=False)
    with pytest.raises(NotFactorizableError):
        depostselect(m)


def test_model_json_round_trip():
    m = random_lhv_model(np.random.default_rng(2), 3)
    back = loads_model(dumps_model(m))
    assert np.allclose(back.response, m.response)
    assert back.labels == m.labels
