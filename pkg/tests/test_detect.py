import numpy as np
import pytest

from qdyn import init_q_from_policy
from qdyn.analysis import solve_cpa_fixed_point
from qdyn.detect import detect_limit_cycle, detect_metastability
from qdyn.detmodels import iterate_cpa
from qdyn.errors import InputDomainError
from qdyn.stochastic import AgentParams, RunConfig, policies_of, run


def _p(gamma):
    return AgentParams(alpha=0.01, gamma=gamma, temperature=1.0)


def _cpa_pi(pd, gamma, init=(0.5, 0.48), q_base=0.0, n=100_000, stride=10):
    q = iterate_cpa(init_q_from_policy(init, q_base, 1.0), pd, _p(gamma), n, stride)
    return q, policies_of(q, (1.0, 1.0), (2, 2))[:, [0, 2]]


def test_constant_trajectory_has_no_cycle():
    assert detect_limit_cycle(np.full((4000, 2), 0.3)) is None


def test_too_short_rejected():
    with pytest.raises(InputDomainError):
        detect_limit_cycle(np.zeros(1500), settle_fraction=0.5)


def test_synthetic_sine():
    t = np.arange(20_000)
    x = 0.3 + 0.05 * np.sin(2 * np.pi * t / 800.0)
    cyc = detect_limit_cycle(x, steps=t * 5)
    assert cyc.amplitude == pytest.approx(0.05, rel=1e-3)
    assert cyc.period == pytest.approx(4000.0, rel=1e-3)


def test_small_amplitude_is_not_a_cycle():
    t = np.arange(20_000)
    assert detect_limit_cycle(0.3 + 5e-4 * np.sin(t / 50.0)) is None


def test_decaying_spiral_is_not_a_cycle():
    t = np.arange(20_000)
    assert detect_limit_cycle(0.3 + 0.1 * np.exp(-t / 4000.0) * np.sin(t / 50.0)) is None


def test_drifting_period_is_not_a_cycle():
    t = np.arange(20_000)
    phase = 2 * np.pi * (t / 500.0 + (t / 6000.0) ** 2)
    assert detect_limit_cycle(0.3 + 0.1 * np.sin(phase)) is None


def test_cpa_cycle_versus_focus(pd):
    _, pi8 = _cpa_pi(pd, 0.8)
    cyc = detect_limit_cycle(pi8, steps=np.arange(len(pi8)) * 10)
    assert cyc is not None and cyc.amplitude > 0.1
    assert 9000 < cyc.period < 10_500
    _, pi7 = _cpa_pi(pd, 0.7)
    assert detect_limit_cycle(pi7) is None


def test_fixed_point_has_no_metastable_interval(pd):
    q = solve_cpa_fixed_point(pd, _p(0.8))
    assert detect_metastability(np.repeat(q[None], 2000, axis=0), pd, _p(0.8)) == []


def test_window_floor(pd):
    with pytest.raises(InputDomainError):
        detect_metastability(np.zeros((1000, 4)), pd, _p(0.8), window=50)


def test_cpa_long_cooperative_phase(pd):
    q, pi = _cpa_pi(pd, 0.8, init=(0.9, 0.7), n=3_000_000, stride=100)
    found = detect_metastability(q, pd, _p(0.8), steps=np.arange(len(q)) * 100)
    first = found[0]
    assert first.start_step <= 1e5
    assert first.end_step > 1e6
    assert np.all(first.mean_policy > 0.999)
    assert first.slow_label in ("Q1_D", "Q2_D")
    # the phase ends in a transition away from mutual cooperation
    after = pi[int(first.end_step // 100) + 100:]
    assert np.min(after) < 0.5


def test_stochastic_run_has_asymmetric_phase(pd):
    cfg = RunConfig(params=_p(0.8), initial_policy=(0.5, 0.48), q_base=0.0, horizon=200_000,
                    seed=0, stride=10)
    tr = run(cfg)
    found = detect_metastability(tr, pd, _p(0.8))
    assert any(m.asymmetry > 0.1 and m.duration > 20_000 for m in found)
    d = found[0].to_dict()
    assert set(d) == {"start_step", "end_step", "slow_coordinate", "drift", "mean_pi_c",
                      "asymmetry"}
