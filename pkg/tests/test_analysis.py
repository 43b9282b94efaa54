import json
import math

import numpy as np
import pytest
from scipy.optimize import brentq

from qdyn import GameSpec, boltzmann_policy
from qdyn.analysis import (NONHYPERBOLIC, SADDLE, STABLE_FOCUS, STABLE_NODE, UNSTABLE_FOCUS,
                           UNSTABLE_NODE, bifurcation_scan, bql_jacobian, bql_map_jacobian,
                           bql_map_step_c, bql_residual, bql_stability, classify_fixed_point,
                           cpa_bracket, cpa_jacobian, cpa_stability, finite_difference_jacobian,
                           logit_response_c, solve_bql_fixed_point, solve_cpa_fixed_point,
                           target_values)
from qdyn.detmodels import cpa_map_step
from qdyn.errors import BranchError, ConvergenceError, InputDomainError
from qdyn.stochastic import AgentParams

T_GRID = (0.3, 1.0, 10.0)
G_GRID = (0.0, 0.4, 0.8)


def _p(gamma=0.8, temperature=1.0, alpha=0.01):
    return AgentParams(alpha=alpha, gamma=gamma, temperature=temperature)


def _qre_oracle(t):
    # symmetric PD: x = 1 / (1 + exp((E R_D - E R_C) / T)) with E R_D - E R_C = 1 + x
    return brentq(lambda x: x - 1.0 / (1.0 + math.exp((1.0 + x) / t)), 0.0, 1.0,
                  xtol=1e-16, rtol=1e-15)


def _close(a, b):
    """Relative 1e-6 with an absolute floor at finite-difference noise."""
    floor = 1e-10 * max(1.0, np.max(np.abs(b)))
    return np.all(np.abs(a - b) <= 1e-6 * np.abs(b) + floor)


@pytest.mark.parametrize("t", [0.1, 0.3, 1.0, 3.0, 10.0])
def test_qre_against_bracketing_oracle(pd, t):
    pi = solve_bql_fixed_point(pd, t)
    assert abs(pi[0] - _qre_oracle(t)) <= 1e-12
    assert pi[0] == pi[2]
    assert np.max(np.abs(bql_residual(pi, pd, t))) <= 1e-12


def test_qre_reference_values(pd):
    assert solve_bql_fixed_point(pd, 1.0)[0] == pytest.approx(0.227, abs=1e-3)
    assert abs(solve_bql_fixed_point(pd, 1000.0)[0] - 0.5) <= 1e-3
    assert solve_bql_fixed_point(pd, 0.01)[0] <= 1e-10


def test_qre_asymmetric_game():
    g = GameSpec.from_flat([2, 0, 0, 1, 1, 0, 0, 2])
    pi = solve_bql_fixed_point(g, (0.5, 2.0))
    assert np.max(np.abs(bql_residual(pi, g, (0.5, 2.0)))) <= 1e-12


def test_qre_general_game_and_failure():
    g = GameSpec((("a", "b", "c"), ("x", "y", "z")),
                 (np.array([[0, -1, 1], [1, 0, -1], [-1, 1, 0.0]]),
                  np.array([[0, -1, 1], [1, 0, -1], [-1, 1, 0.0]])))
    pi = solve_bql_fixed_point(g, 1.0)
    assert np.allclose(pi, 1 / 3, atol=1e-12)
    big = GameSpec((("a", "b", "c"), ("x", "y", "z")),
                   (np.array([[9, 0, 2], [3, 7, 1], [0, 4, 8.0]]),
                    np.array([[1, 8, 2], [6, 0, 5], [2, 3, 9.0]])))
    with pytest.raises(ConvergenceError) as info:
        solve_bql_fixed_point(big, 0.05, max_iter=3, start=np.full(6, 1 / 3))
    assert info.value.residual > 0 and "residual" in str(info.value)


def test_qre_rejects_bad_temperature(pd):
    with pytest.raises(InputDomainError):
        solve_bql_fixed_point(pd, 0.0)


def test_target_values_example(pd):
    # exact up to the representation of 0.8: 0.8 / (1 - 0.8) = 4 + 1 ulp in doubles
    assert np.allclose(target_values(pd, 0, [0.0, 1.0], _p()), [4.0, 5.0], rtol=0, atol=4e-15)
    assert np.array_equal(target_values(pd, 0, [0.0, 1.0], _p(gamma=0.75)), [3.0, 4.0])
    pi1 = boltzmann_policy([4.0, 5.0, 0.0, 0.0], 1.0)[0]
    assert pi1 == pytest.approx(1.0 / (1.0 + math.e), abs=1e-15)
    assert round(pi1, 2) == 0.27


def test_cpa_fixed_point_closed_form(pd):
    x = _qre_oracle(1.0)
    q = solve_cpa_fixed_point(pd, _p())
    assert q[1] == pytest.approx(5 * (1 + 4 * x), abs=1e-12)
    assert q[0] == pytest.approx(3 * x + 4 * (1 + 4 * x), abs=1e-12)
    assert q[1] == pytest.approx(9.54, abs=5e-3) and q[0] == pytest.approx(8.31, abs=5e-3)
    assert q[1] - q[0] == pytest.approx(1 + x, abs=1e-12)
    assert np.max(np.abs(cpa_bracket(q, pd, _p()))) <= 1e-10
    q0 = solve_cpa_fixed_point(pd, _p(gamma=0.0))
    assert np.allclose(q0, [3 * x, 1 + 4 * x, 3 * x, 1 + 4 * x], atol=1e-15)


def test_fixed_points_coincide_in_policy_space(pd):
    for t in T_GRID:
        pi = solve_bql_fixed_point(pd, t)
        for g in G_GRID:
            q = solve_cpa_fixed_point(pd, _p(gamma=g, temperature=t))
            assert np.max(np.abs(boltzmann_policy(q, t) - pi)) <= 1e-10


def test_bql_jacobian_form(pd):
    x = _qre_oracle(1.0)
    jac = bql_jacobian([x, x], pd, 1.0)
    assert jac[0, 0] == 0.0 and jac[1, 1] == 0.0
    p, q = math.exp(3 * x), math.exp(1 + 4 * x)
    expected = -1.0 * p * q / (p + q) ** 2
    assert jac[0, 1] == pytest.approx(expected, rel=1e-12)
    assert jac[0, 1] == pytest.approx(-0.175, abs=1e-3)
    lam = np.linalg.eigvals(jac)
    assert np.allclose(sorted(lam.real), [-0.1753, 0.1753], atol=1e-4)


@pytest.mark.parametrize("t", T_GRID)
def test_bql_jacobians_against_finite_differences(pd, t):
    pi = solve_bql_fixed_point(pd, t)
    pc = pi[[0, 2]]
    fd = finite_difference_jacobian(lambda z: logit_response_c(z, pd, t), pc)
    assert _close(bql_jacobian(pi, pd, t), fd)
    for alpha in (0.01, 0.5):
        p = _p(temperature=t, alpha=alpha)
        fd = finite_difference_jacobian(lambda z: bql_map_step_c(z, pd, p), pc)
        assert _close(bql_map_jacobian(pi, pd, p), fd)


@pytest.mark.parametrize("t", T_GRID)
@pytest.mark.parametrize("g", (0.2, 0.5, 0.8))
def test_cpa_jacobian_against_finite_differences(pd, t, g):
    p = _p(gamma=g, temperature=t)
    q = solve_cpa_fixed_point(pd, p)
    fd = finite_difference_jacobian(lambda z: cpa_map_step(z, pd, p), q)
    assert _close(cpa_jacobian(q, pd, p), fd)


def test_cpa_jacobian_off_fixed_point(pd):
    p = _p(gamma=0.6, alpha=0.3)
    q = np.array([1.0, 2.5, -0.5, 0.7])
    fd = finite_difference_jacobian(lambda z: cpa_map_step(z, pd, p), q)
    assert _close(cpa_jacobian(q, pd, p), fd)


def test_cpa_jacobian_identity_and_branch(pd):
    q = solve_cpa_fixed_point(pd, _p())
    assert np.array_equal(cpa_jacobian(q, pd, _p(alpha=0.0)), np.eye(4))
    with pytest.raises(BranchError):
        cpa_jacobian([2.0, 1.0, 0.0, 1.0], pd, _p())


def test_interaction_prefactor(pd):
    assert pd.interaction_prefactor(0) == pd.interaction_prefactor(1) == -1.0


def test_finite_difference_affine():
    a = np.array([[1.0, 2.0, -3.0], [0.5, -4.0, 7.0]])
    b = np.array([1.0, -0.5])
    jac = finite_difference_jacobian(lambda x: a @ x + b, np.array([0.1, -0.2, 0.3]))
    assert np.max(np.abs(jac - a)) <= 1e-9
    # larger values: rounding of f limits the default step, an explicit one fixes it
    x = np.array([1.0, -2.0, 30.0])
    jac = finite_difference_jacobian(lambda x: a @ x + 10.0, x, h=0.25)
    assert np.max(np.abs(jac - a)) <= 1e-12
    with pytest.raises(InputDomainError):
        finite_difference_jacobian(lambda x: x, np.zeros(2), h=0.0)


@pytest.mark.parametrize("eigs,label", [
    ([0.5, 0.3], STABLE_NODE),
    ([0.5 + 0.2j, 0.5 - 0.2j], STABLE_FOCUS),
    ([1.1 + 0.2j, 1.1 - 0.2j, 0.5], UNSTABLE_FOCUS),
    ([1.2, 0.5], SADDLE),
    ([1.2, 1.5], UNSTABLE_NODE),
    ([1.0 + 1e-9, 0.5], NONHYPERBOLIC),
    ([np.exp(0.3j), np.exp(-0.3j)], NONHYPERBOLIC),
])
def test_classification_rules(eigs, label):
    assert classify_fixed_point(eigs) == label


@pytest.mark.parametrize("t", [0.1, 0.3, 1.0, 3.0, 10.0, 100.0])
def test_bql_stable_node(pd, t):
    rep = bql_stability(pd, _p(temperature=t))
    assert rep.spectral_radius < 1.0
    assert rep.classification == STABLE_NODE


@pytest.mark.parametrize("g,label", [(0.0, STABLE_FOCUS), (0.7, STABLE_FOCUS),
                                     (0.8, UNSTABLE_FOCUS), (0.97, SADDLE)])
def test_cpa_regimes(pd, g, label):
    rep = cpa_stability(pd, _p(gamma=g))
    assert rep.classification == label
    lam = np.linalg.eigvals(rep.jacobian)
    assert abs(np.max(np.abs(lam)) - rep.spectral_radius) <= 1e-12


def test_stability_report_invariants(pd):
    rep = cpa_stability(pd, _p())
    assert len(rep.eigenvalues) == rep.jacobian.shape[0] == 4
    assert rep.spectral_radius == np.max(np.abs(rep.eigenvalues))
    assert abs(np.sum(rep.eigenvalues) - np.trace(rep.jacobian)) <= 1e-9
    assert abs(np.prod(rep.eigenvalues) - np.linalg.det(rep.jacobian)) <= 1e-9
    d = json.loads(json.dumps(rep.to_dict()))
    assert set(d["eigenvalues"][0]) == {"re", "im"}
    assert d["classification"] == UNSTABLE_FOCUS


def test_scan_t1(pd):
    grid = np.round(np.arange(100) * 0.01, 12)
    scan = bifurcation_scan(pd, _p(), grid)
    ns = scan.first_neimark_sacker()
    assert ns is not None and 0.74 <= ns.gamma_lo < ns.gamma_hi <= 0.76
    assert ns.gamma_hi - ns.gamma_lo <= 1e-4
    assert np.all(scan.spectral_radii[grid < 0.7] < 1.0)
    assert scan.classifications[0] == STABLE_FOCUS
    assert np.allclose(scan.pi_c_star, scan.pi_c_star[0])
    # the focus-to-saddle change near 0.95 is a collision outside the circle
    change = [c for c in scan.type_changes if c.before == UNSTABLE_FOCUS]
    assert len(change) == 1 and change[0].after == SADDLE
    assert 0.95 < change[0].gamma < 0.96
    rows = scan.csv_rows()
    assert rows[0] == ["gamma", "lambda1_abs", "lambda2_abs", "lambda3_abs", "lambda4_abs",
                       "classification"]
    assert len(rows) == 101


def _lapack_radius(game, params):
    q = solve_cpa_fixed_point(game, params)
    fd = finite_difference_jacobian(lambda z: cpa_map_step(z, game, params), q)
    return np.max(np.abs(np.linalg.eigvals(fd)))


@pytest.mark.parametrize("t", [0.3, 1.0])
def test_scan_crossing_bracket_independent_oracle(pd, t):
    scan = bifurcation_scan(pd, _p(temperature=t), np.round(np.arange(100) * 0.01, 12))
    ns = scan.first_neimark_sacker()
    assert _lapack_radius(pd, _p(gamma=ns.gamma_lo, temperature=t)) < 1.0
    assert _lapack_radius(pd, _p(gamma=ns.gamma_hi, temperature=t)) > 1.0


def test_scan_high_temperature_has_no_crossing(pd):
    scan = bifurcation_scan(pd, _p(temperature=10.0), np.round(np.arange(100) * 0.01, 12))
    assert scan.first_neimark_sacker() is None
    assert np.all(scan.spectral_radii < 1.0)


def test_scan_parallel_matches_serial(pd):
    grid = np.linspace(0.6, 0.9, 13)
    a = bifurcation_scan(pd, _p(), grid)
    b = bifurcation_scan(pd, _p(), grid, jobs=4)
    assert np.array_equal(a.spectral_radii, b.spectral_radii)
    assert a.critical_gammas == b.critical_gammas


def test_scan_flags_failures_and_continues():
    # cooperation dominates, so Q_C* > Q_D* and the analytic branch does not apply
    g = GameSpec.from_flat([5, 3, 1, 0, 5, 3, 1, 0])
    scan = bifurcation_scan(g, _p(), [0.1, 0.5])
    assert scan.classifications == ["failed", "failed"]
    assert set(scan.failures) == {0.1, 0.5}
    assert np.all(np.isnan(scan.spectral_radii))
    assert scan.csv_rows()[1][-1] == "failed"


def test_scan_grid_validation(pd):
    for bad in ([0.5, 0.4], [], [0.2, 1.0], [-0.1, 0.5]):
        with pytest.raises(InputDomainError):
            bifurcation_scan(pd, _p(), bad)
