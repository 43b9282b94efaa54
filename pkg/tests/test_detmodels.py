import math

import numpy as np
import pytest

from qdyn import boltzmann_policy, init_q_from_policy
from qdyn.analysis import solve_bql_fixed_point, solve_cpa_fixed_point
from qdyn.detect import detect_limit_cycle
from qdyn.detmodels import (ModelKind, bql_map_step, cpa_map_step, faql_vector_field,
                            integrate_faql, iterate_bql, iterate_cpa, step_function)
from qdyn.errors import InputDomainError, InteriorViolation
from qdyn.stochastic import AgentParams, iql_step, make_rng, policies_of

UNIFORM = np.full(4, 0.5)


def _p(gamma=0.8, alpha=0.01, temperature=1.0):
    return AgentParams(alpha=alpha, gamma=gamma, temperature=temperature)


def test_faql_uniform_example(pd):
    d = faql_vector_field(UNIFORM, pd, _p())
    assert d[0] == pytest.approx(0.01 * 0.5 * (1.5 - 2.25), abs=1e-16)
    assert d[0] == pytest.approx(-0.00375, abs=1e-16)
    assert d[0] + d[1] == pytest.approx(0.0, abs=1e-16)


def test_faql_rest_point_is_qre(pd):
    pi = solve_bql_fixed_point(pd, 1.0)
    assert np.max(np.abs(faql_vector_field(pi, pd, _p()))) <= 1e-10


def test_faql_unweighted_variant_differs(pd):
    pi = solve_bql_fixed_point(pd, 1.0)
    literal = faql_vector_field(pi, pd, _p(), weighted=False)
    assert np.max(np.abs(literal)) > 1e-3


@pytest.mark.parametrize("model", [faql_vector_field, bql_map_step])
def test_gamma_invariance_bits(pd, model):
    pi = np.array([0.3, 0.7, 0.62, 0.38])
    outs = [model(pi, pd, _p(gamma=g)) for g in (0.0, 0.5, 0.9)]
    assert all(np.array_equal(outs[0], o) for o in outs[1:])


def test_boundary_policy_rejected(pd):
    for f in (faql_vector_field, bql_map_step):
        with pytest.raises(InputDomainError):
            f(np.array([1.0, 0.0, 0.5, 0.5]), pd, _p())


def test_integrate_zero_steps(pd):
    pi0 = np.array([0.5, 0.5, 0.48, 0.52])
    out = integrate_faql(pi0, pd, _p(), n_steps=0)
    assert out.shape == (1, 4) and np.array_equal(out[0], pi0)


def test_rk4_order(pd):
    # fast dynamics so the truncation error rises above round-off
    p = AgentParams(alpha=0.9, gamma=0.0, temperature=0.3)
    pi0 = np.array([0.6, 0.4, 0.3, 0.7])
    ref = integrate_faql(pi0, pd, p, step=1e-4, n_steps=10_000)[-1]
    e1 = np.max(np.abs(integrate_faql(pi0, pd, p, step=1e-2, n_steps=100)[-1] - ref))
    e2 = np.max(np.abs(integrate_faql(pi0, pd, p, step=5e-3, n_steps=200)[-1] - ref))
    assert 12.0 < e1 / e2 < 20.0


def test_faql_monotone_approach(pd):
    tr = integrate_faql(np.array([0.5, 0.5, 0.48, 0.52]), pd, _p(), step=1.0, n_steps=600)
    assert np.all(np.diff(tr[:, 0]) < 0) and np.all(np.diff(tr[:, 2]) < 0)
    assert np.all(np.abs(tr[-1, [0, 2]] - 0.22675) < 1e-3)
    assert np.allclose(tr[:, :2].sum(axis=1), 1.0, atol=1e-15)


def test_faql_interior_violation(pd):
    # an absurd step throws the state out of the simplex
    with pytest.raises(InteriorViolation):
        integrate_faql(np.array([0.01, 0.99, 0.99, 0.01]), pd,
                       AgentParams(alpha=0.99, gamma=0.0, temperature=0.01), step=50.0,
                       n_steps=5)


def test_bql_uniform_example(pd):
    out = bql_map_step(UNIFORM, pd, _p())
    d_c, d_d = 1.5 + math.log(2.0), 3.0 + math.log(2.0)
    assert d_c == pytest.approx(2.1931, abs=1e-4) and d_d == pytest.approx(3.6931, abs=1e-4)
    assert out[0] == pytest.approx(1.0 / (1.0 + math.exp(0.015)), abs=1e-15)
    assert out[0] == pytest.approx(0.496250, abs=1e-6)
    assert out[0] + out[1] == pytest.approx(1.0, abs=1e-15)


def test_bql_fixed_point_is_fixed(pd):
    pi = solve_bql_fixed_point(pd, 1.0)
    assert np.max(np.abs(bql_map_step(pi, pd, _p()) - pi)) <= 1e-12
    tr = iterate_bql(np.array([0.9, 0.1, 0.2, 0.8]), pd, _p(alpha=0.5), 400)
    assert np.max(np.abs(tr[-1] - pi)) <= 1e-10


def test_cpa_examples(pd):
    out = cpa_map_step(np.zeros(4), pd, _p())
    assert np.array_equal(out, [0.0075, 0.015, 0.0075, 0.015])
    q = np.array([0.3, -2.0, 1.0, 4.0])
    assert np.array_equal(cpa_map_step(q, pd, _p(alpha=0.0)), q)


def test_cpa_fixed_point_is_fixed(pd):
    for gamma in (0.0, 0.7, 0.97):
        q = solve_cpa_fixed_point(pd, _p(gamma=gamma))
        assert np.max(np.abs(cpa_map_step(q, pd, _p(gamma=gamma)) - q)) <= 1e-10


def test_cpa_iteration_matches_python_steps(pd):
    q0 = init_q_from_policy((0.5, 0.48), 0.0, 1.0)
    tr = iterate_cpa(q0, pd, _p(), 200, stride=1)
    q = q0
    for k in range(1, 201):
        q = cpa_map_step(q, pd, _p())
        assert np.allclose(tr[k], q, rtol=0, atol=1e-13)
    assert np.array_equal(iterate_cpa(q0, pd, _p(), 200, stride=50), tr[::50])


def test_cpa_irreducible_to_policy_space(pd):
    q = init_q_from_policy((0.6, 0.3), 0.0, 1.0)
    q2 = init_q_from_policy((0.6, 0.3), 10.0, 1.0)
    assert np.allclose(boltzmann_policy(q, 1.0), boltzmann_policy(q2, 1.0), atol=1e-14)
    a = boltzmann_policy(cpa_map_step(q, pd, _p()), 1.0)
    b = boltzmann_policy(cpa_map_step(q2, pd, _p()), 1.0)
    assert np.max(np.abs(a - b)) > 1e-4


def test_cpa_is_conditional_mean_of_iql(pd):
    rng = make_rng(21)
    draws = 20_000
    p = _p()
    for q in (np.array([0.2, 0.5, -0.1, 0.3]), np.array([4.0, 5.0, 8.0, 9.5])):
        samples = np.empty((draws, 4))
        for k in range(draws):
            samples[k] = iql_step(q, pd, p, rng)[0]
        se = samples.std(axis=0, ddof=1) / np.sqrt(draws)
        assert np.all(np.abs(samples.mean(axis=0) - cpa_map_step(q, pd, p)) <= 3 * se + 1e-15)


def test_cpa_gamma_changes_long_run_behaviour(pd):
    q0 = init_q_from_policy((0.5, 0.48), 0.0, 1.0)
    found = {}
    for gamma in (0.0, 0.8):
        q = iterate_cpa(q0, pd, _p(gamma=gamma), 100_000, stride=10)
        found[gamma] = detect_limit_cycle(policies_of(q, (1.0, 1.0), (2, 2))[:, [0, 2]])
    assert found[0.0] is None
    assert found[0.8] is not None and found[0.8].amplitude > 0.1


def test_step_function_dispatch(pd):
    pi = np.array([0.3, 0.7, 0.62, 0.38])
    assert np.array_equal(step_function("bql", pd, _p())(pi), bql_map_step(pi, pd, _p()))
    assert np.array_equal(step_function(ModelKind.FAQL_ODE, pd, _p())(pi),
                          faql_vector_field(pi, pd, _p()))
    q = np.array([0.3, -2.0, 1.0, 4.0])
    assert np.array_equal(step_function("cpa", pd, _p())(q), cpa_map_step(q, pd, _p()))
