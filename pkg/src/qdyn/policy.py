"""Q-space <-> policy-space correspondence.

A Q-state is a flat float64 vector holding agent 0's Q-values followed by
agent 1's, i.e. ``(Q1_C, Q1_D, Q2_C, Q2_D)`` for a 2x2 game. Policies use
the same layout. ``n_actions`` gives the split point; it defaults to two
equal halves.
"""

from __future__ import annotations

import numpy as np

from qdyn.errors import InputDomainError


def per_agent(value, name="value"):
    """Broadcast a scalar or a length-2 sequence to a pair of floats."""
    if np.ndim(value) == 0:
        v = float(value)
        return (v, v)
    vals = tuple(float(v) for v in value)
    if len(vals) != 2:
        raise InputDomainError(f"{name} needs one entry per agent, got {len(vals)}")
    return vals


def split(x, n_actions=None):
    """Split a flat per-agent vector into two views."""
    x = np.asarray(x, dtype=np.float64)
    if n_actions is None:
        if x.size % 2:
            raise InputDomainError("odd-length state needs explicit n_actions")
        n0 = x.size // 2
    else:
        n0 = n_actions[0]
        if n0 + n_actions[1] != x.size:
            raise InputDomainError(f"state of size {x.size} does not match {n_actions}")
    return x[:n0], x[n0:]


def softmax(q, temperature):
    z = np.asarray(q, dtype=np.float64) / temperature
    z = z - z.max()
    e = np.exp(z)
    return e / e.sum()


def boltzmann_policy(q, temperatures, n_actions=None):
    """Boltzmann (softmax) policy of each agent.

    Computed with a per-agent max shift, so ``|Q|/T`` up to ~1e300 is safe.

    Examples
    --------
    >>> boltzmann_policy([0.0, 0.0, 0.0, 0.0], 1.0)
    array([0.5, 0.5, 0.5, 0.5])
    """
    temps = per_agent(temperatures, "temperatures")
    if min(temps) <= 0.0 or not all(np.isfinite(temps)):
        raise InputDomainError(f"temperatures must be positive, got {temps}")
    q0, q1 = split(q, n_actions)
    return np.concatenate([softmax(q0, temps[0]), softmax(q1, temps[1])])


def cooperation(pi, n_actions=None):
    """``(pi1_C, pi2_C)``: probability of each agent's first action."""
    p0, p1 = split(pi, n_actions)
    return np.array([p0[0], p1[0]])


def policy_from_cooperation(pi_c):
    """Expand ``(pi1_C, pi2_C)`` to the full 2x2 policy vector."""
    a, b = (float(v) for v in pi_c)
    return np.array([a, 1.0 - a, b, 1.0 - b])


def init_q_from_policy(initial_policy, q_base, temperatures):
    """Q-values centred on ``q_base`` that realise a 2x2 initial policy.

    ``initial_policy`` is either ``(pi1_C, pi2_C)`` or the full 4-vector.
    Each agent gets ``Q_C = q_base - dQ/2`` and ``Q_D = q_base + dQ/2`` with
    ``dQ = T ln((1 - pi_C) / pi_C)``.
    """
    p = np.asarray(initial_policy, dtype=np.float64)
    if p.size == 4:
        p = p[[0, 2]]
    if p.size != 2:
        raise InputDomainError("initial policy must be (pi1_C, pi2_C) or a 4-vector")
    if not np.all((p > 0.0) & (p < 1.0)):
        raise InputDomainError(
            f"initial policy must lie strictly inside (0, 1); pure policies are "
            f"unreachable at finite temperature: {p}"
        )
    temps = per_agent(temperatures, "temperatures")
    if min(temps) <= 0.0:
        raise InputDomainError(f"temperatures must be positive, got {temps}")
    q_base = float(q_base)
    out = np.empty(4)
    for i in range(2):
        dq = temps[i] * (np.log1p(-p[i]) - np.log(p[i]))
        out[2 * i] = q_base - dq / 2.0
        out[2 * i + 1] = q_base + dq / 2.0
    return out
