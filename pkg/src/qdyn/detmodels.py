"""Deterministic approximations of the learning dynamics.

* ``FAQL_ODE`` - replicator-type ODE in policy space (continuous time).
* ``BQL_MAP`` - infinite-batch policy map (discrete time).
* ``CPA_MAP`` - choice-probability-aware map on the full Q-state; the
  Kronecker delta of the incremental rule is replaced by the action
  probability, i.e. one step of the conditional expectation.

Policies and Q-states use the flat per-agent layout of :mod:`qdyn.policy`.
"""

from __future__ import annotations

import enum

import numpy as np

from qdyn import _kernels
from qdyn.errors import InputDomainError, InteriorViolation
from qdyn.policy import boltzmann_policy, split
from qdyn.stochastic import agent_pair

DEFAULT_ODE_STEP = 0.1
ROW_DRIFT_TOL = 1e-9


class ModelKind(enum.Enum):
    FAQL_ODE = "faql"
    BQL_MAP = "bql"
    CPA_MAP = "cpa"


def _interior(pi, game):
    pi = np.asarray(pi, dtype=np.float64)
    if pi.shape != (sum(game.n_actions),):
        raise InputDomainError(f"policy shape {pi.shape} does not match game {game.n_actions}")
    if not np.all((pi > 0.0) & (pi < 1.0)):
        raise InputDomainError(f"policy must be strictly interior: {pi}")
    return split(pi, game.n_actions)


def faql_vector_field(pi, game, params, weighted=True):
    """Time derivative of the joint policy under the FAQL ODE.

    The selection term compares each action's expected reward with the
    policy-weighted average. ``weighted=False`` uses the unweighted sum
    over actions instead; that variant does not conserve row sums and has
    different rest points, and is kept only for comparison.
    """
    p = agent_pair(params)
    pis = _interior(pi, game)
    out = []
    for i in range(2):
        own, opp = pis[i], pis[1 - i]
        er = game.rewards[i] @ opp
        baseline = own @ er if weighted else er.sum()
        log_own = np.log(own)
        entropy_term = own @ log_own - log_own
        out.append(p[i].alpha * own * ((er - baseline) / p[i].temperature + entropy_term))
    return np.concatenate(out)


def _rk4(f, x, h):
    k1 = f(x)
    k2 = f(x + 0.5 * h * k1)
    k3 = f(x + 0.5 * h * k2)
    k4 = f(x + h * k3)
    return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def integrate_faql(pi0, game, params, step=DEFAULT_ODE_STEP, n_steps=1000, stride=1,
                   weighted=True):
    """Fixed-step RK4 integration of the FAQL ODE.

    Returns an ``(m, d)`` array of policies at model times ``0, stride*step,
    ...``; row 0 is ``pi0``. Rows are renormalised after every step.
    """
    if not step > 0.0:
        raise InputDomainError("step must be positive")
    if n_steps < 0 or stride < 1:
        raise InputDomainError("n_steps must be >= 0 and stride >= 1")
    x = np.array(pi0, dtype=np.float64)
    _interior(x, game)
    n0 = game.n_actions[0]
    out = [x.copy()]

    def field(y):
        return faql_vector_field(y, game, params, weighted)

    for k in range(1, n_steps + 1):
        try:
            y = _rk4(field, x, step)
        except InputDomainError as exc:
            raise InteriorViolation(f"RK4 stage left the simplex at step {k}: {exc}") from exc
        sums = np.array([y[:n0].sum(), y[n0:].sum()])
        if weighted and np.max(np.abs(sums - 1.0)) > ROW_DRIFT_TOL:
            raise InteriorViolation(f"row sums drifted to {sums} at step {k}")
        y[:n0] /= sums[0]
        y[n0:] /= sums[1]
        if not np.all((y > 0.0) & (y < 1.0)):
            raise InteriorViolation(f"policy left the interior at step {k}: {y}")
        x = y
        if k % stride == 0:
            out.append(x.copy())
    return np.array(out)


def bql_advantage(pi, game, params):
    """``E R_a - T ln pi_a`` per agent and action (the deterministic TD error)."""
    p = agent_pair(params)
    pis = _interior(pi, game)
    return np.concatenate([
        game.rewards[i] @ pis[1 - i] - p[i].temperature * np.log(pis[i]) for i in range(2)
    ])


def bql_map_step(pi, game, params):
    """One step of the infinite-batch policy map.

    ``pi'_a`` is proportional to ``pi_a exp(alpha D_a / T)``; computed in
    log space so the output stays interior and normalised.
    """
    p = agent_pair(params)
    pis = _interior(pi, game)
    d = split(bql_advantage(pi, game, params), game.n_actions)
    out = []
    for i in range(2):
        z = np.log(pis[i]) + p[i].alpha * d[i] / p[i].temperature
        z -= z.max()
        e = np.exp(z)
        out.append(e / e.sum())
    return np.concatenate(out)


def iterate_bql(pi0, game, params, n_steps, stride=1):
    x = np.array(pi0, dtype=np.float64)
    out = [x.copy()]
    for k in range(1, n_steps + 1):
        x = bql_map_step(x, game, params)
        if k % stride == 0:
            out.append(x.copy())
    return np.array(out)


def cpa_map_step(q, game, params):
    """One step of the choice-probability-aware map on the Q-state.

    Every Q-value moves toward its one-step target, weighted by the
    probability that its action is played:
    ``Q'_a = Q_a + alpha pi_a (E R_a + gamma max_b Q_b - Q_a)``.
    """
    p = agent_pair(params)
    q = np.asarray(q, dtype=np.float64)
    if not np.all(np.isfinite(q)):
        raise InputDomainError("Q-state must be finite")
    pi = boltzmann_policy(q, (p[0].temperature, p[1].temperature), game.n_actions)
    qs = split(q, game.n_actions)
    pis = split(pi, game.n_actions)
    out = []
    for i in range(2):
        er = game.rewards[i] @ pis[1 - i]
        out.append(qs[i] + p[i].alpha * pis[i] * (er + p[i].gamma * qs[i].max() - qs[i]))
    return np.concatenate(out)


def iterate_cpa(q0, game, params, n_steps, stride=1):
    """Iterate the CPA map; returns ``(m, d)`` Q-states with row 0 = ``q0``.

    Runs in a compiled loop. Row ``k`` is the state after ``k * stride``
    steps.
    """
    p = agent_pair(params)
    q = np.array(q0, dtype=np.float64)
    if q.shape != (sum(game.n_actions),) or not np.all(np.isfinite(q)):
        raise InputDomainError("initial Q-state must be finite and match the game")
    if n_steps < 0 or stride < 1:
        raise InputDomainError("n_steps must be >= 0 and stride >= 1")
    alpha = np.array([p[0].alpha, p[1].alpha])
    gamma = np.array([p[0].gamma, p[1].gamma])
    temp = np.array([p[0].temperature, p[1].temperature])
    rec = np.empty((n_steps // stride, q.size))
    _kernels.iterate_cpa(q, game.rewards[0], game.rewards[1], alpha, gamma, temp,
                         game.n_actions[0], int(n_steps), int(stride), rec)
    return np.concatenate([np.array(q0, dtype=np.float64)[None, :], rec])


def step_function(kind, game, params, weighted=True):
    """The one-step map of a model as a plain ``x -> x'`` callable.

    For the ODE this is the vector field, not a map.
    """
    kind = ModelKind(kind)
    if kind is ModelKind.CPA_MAP:
        return lambda x: cpa_map_step(x, game, params)
    if kind is ModelKind.BQL_MAP:
        return lambda x: bql_map_step(x, game, params)
    return lambda x: faql_vector_field(x, game, params, weighted)
