import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fairbell.errors import OutOfDomainError
from fairbell.lhv import lhv_bell_postselected, lhv_probability_table
from fairbell.scenario import bell_postselected, efficiency, postselected_table, SETTING_PAIRS
from fairbell.schemes import (
    KappaScheme,
    appendix_a_lhv_model,
    appendix_a_scenario,
    appendix_c_separable_state,
    filter_matrix,
    filter_measurement,
    filter_svd,
    ghz_postselected_bell,
    ghz_state,
    lhv_max_given_eta,
    optimal_theta,
    scheme_as_scenario,
    scheme_bell,
    scheme_correlator,
    scheme_efficiency_eta,
    scheme_probabilities,
    theta_approx,
)

kappas = st.floats(0.0, 0.9)
angles = st.floats(-2 * math.pi, 2 * math.pi)
TSIRELSON = 2 * math.sqrt(2)


def state_vector_probabilities(kappa, theta, phi):
    """Oracle: apply the filters to the two-qubit vector directly."""
    c = math.sqrt((1 + kappa) / 2)
    s = math.sqrt((1 - kappa) / 2)
    u, v = np.array([c, s]), np.array([c, -s])
    # the state is |uu> - |vv>, and R1 (x) R2 multiplies |vv> by e^{i(theta+phi)}
    out = np.kron(u, u) - np.exp(1j * (theta + phi)) * np.kron(v, v)
    amp = np.abs(out) ** 2
    return amp / amp.sum()


@settings(max_examples=80, deadline=None)
@given(kappas, angles, angles)
def test_probabilities_against_state_vector(kappa, theta, phi):
    if abs(1 - kappa**2 * math.cos(theta + phi)) < 1e-6:
        return
    got = scheme_probabilities(kappa, theta, phi)
    assert np.allclose(got, state_vector_probabilities(kappa, theta, phi), atol=1e-12)
    p = got
    assert scheme_correlator(kappa, theta, phi) == pytest.approx(p[0] - p[1] - p[2] + p[3], abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(kappas, angles, angles)
def test_generic_scenario_matches_closed_form(kappa, theta, phi):
    s = KappaScheme(kappa, theta, theta + 0.3, phi, phi - 0.4)
    scen = scheme_as_scenario(s)
    assert bell_postselected(scen) == pytest.approx(s.analytic_bell(), abs=1e-9)
    table = postselected_table(scen)
    assert np.allclose(table[0, 0].ravel(), scheme_probabilities(kappa, theta, phi), atol=1e-9)


def test_kappa_zero_is_tsirelson():
    theta, b = optimal_theta(0.0)
    assert b == pytest.approx(TSIRELSON, abs=1e-9)


def test_value_near_separable_threshold():
    _, b = optimal_theta(0.357)
    assert b == pytest.approx(2.966, abs=0.005)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.0, 0.95))
def test_optimal_theta_is_optimal(kappa):
    theta, b = optimal_theta(kappa)
    assert math.pi <= theta <= 2 * math.pi
    grid = np.linspace(math.pi, 2 * math.pi, 2001)
    assert b >= max(scheme_bell(kappa, t) for t in grid) - 1e-12
    # the closed-form approximation is close to the optimum
    assert scheme_bell(kappa, theta_approx(kappa)) == pytest.approx(b, abs=0.02)


@settings(max_examples=80, deadline=None)
@given(st.floats(0.0, 0.95), angles)
def test_filter_svd_reconstructs(kappa, theta):
    f = filter_svd(kappa, theta)
    assert np.allclose(f.reconstruct(), filter_matrix(kappa, theta), atol=1e-10)
    for u in (f.u_plus, f.u_minus):
        assert np.allclose(u @ u.conj().T, np.eye(2), atol=1e-10)
    sv = np.linalg.svd(filter_matrix(kappa, theta), compute_uv=False)
    assert np.allclose(np.sort(np.diag(f.w).real), np.sort(sv), atol=1e-10)
    assert scheme_efficiency_eta(kappa, theta) == pytest.approx(sv[1] / sv[0], abs=1e-10)


@pytest.mark.parametrize("kappa,theta", [(0.3, math.pi), (0.0, 1.0), (0.5, 0.0)])
def test_filter_svd_degenerate_points(kappa, theta):
    f = filter_svd(kappa, theta)
    assert np.allclose(f.reconstruct(), filter_matrix(kappa, theta), atol=1e-12)


def test_filter_measurement_norm():
    m = filter_measurement(0.4, 2.0)
    assert np.linalg.eigvalsh(m.success.matrix).max() == pytest.approx(1.0)


def test_lhv_max_given_eta():
    assert lhv_max_given_eta(1.0) == 2.0
    assert lhv_max_given_eta(2 / 3) == pytest.approx(4.0)
    with pytest.raises(OutOfDomainError):
        lhv_max_given_eta(0.0)


def test_eta_is_geometric_mean():
    theta, _ = optimal_theta(0.2)
    s = KappaScheme.symmetric(0.2, theta)
    assert s.eta() == pytest.approx(np.prod(s.setting_etas()) ** 0.25)
    assert min(s.setting_etas()) <= s.eta() <= max(s.setting_etas())


def test_kappa_domain():
    with pytest.raises(OutOfDomainError):
        scheme_correlator(1.0, 0.0)
    with pytest.raises(OutOfDomainError):
        KappaScheme(0.2, math.nan, 0, 0, 0)


def test_appendix_a():
    s = appendix_a_scenario()
    assert bell_postselected(s) == pytest.approx(4.0, abs=1e-12)
    assert [efficiency(s, a, b) for a, b in SETTING_PAIRS] == [0.5] * 4


def test_appendix_a_lhv_model_reproduces_quantum():
    m = appendix_a_lhv_model()
    assert lhv_bell_postselected(m) == pytest.approx(4.0)
    assert np.allclose(lhv_probability_table(m, True), postselected_table(appendix_a_scenario()))


def test_appendix_c():
    assert ghz_postselected_bell(ghz_state()) == pytest.approx(4.0, abs=1e-12)
    assert ghz_postselected_bell(appendix_c_separable_state()) == pytest.approx(3.0, abs=1e-12)
    assert ghz_postselected_bell(ghz_state(), "random") == pytest.approx(4.0, abs=1e-12)
    with pytest.raises(ValueError):
        ghz_postselected_bell(ghz_state(), "other")
