"""Single-state two-player normal-form games.

Rewards are stored per agent in the agent's own frame: ``rewards[i][a, b]``
is what agent ``i`` receives for playing ``a`` while the opponent plays
``b``. For the prisoner's dilemma both blocks are the same matrix.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from qdyn.errors import InputDomainError

PROB_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class GameSpec:
    """Two-player finite game.

    Parameters
    ----------
    action_labels : tuple of two tuples of str
        Action names for agent 0 and agent 1.
    rewards : tuple of two arrays
        ``rewards[0]`` has shape ``(n0, n1)`` and ``rewards[1]`` has shape
        ``(n1, n0)``; both indexed ``(own action, opponent action)``.
    """

    action_labels: tuple
    rewards: tuple

    def __post_init__(self):
        labels = tuple(tuple(str(a) for a in agent) for agent in self.action_labels)
        if len(labels) != 2:
            raise InputDomainError("exactly two agents are supported")
        n0, n1 = len(labels[0]), len(labels[1])
        if n0 < 2 or n1 < 2:
            raise InputDomainError("each agent needs at least two actions")
        if len(self.rewards) != 2:
            raise InputDomainError("need one reward matrix per agent")
        r0 = np.array(self.rewards[0], dtype=np.float64)
        r1 = np.array(self.rewards[1], dtype=np.float64)
        if r0.shape != (n0, n1) or r1.shape != (n1, n0):
            raise InputDomainError(
                f"reward shapes {r0.shape}, {r1.shape} do not match "
                f"action counts ({n0}, {n1})"
            )
        if not (np.all(np.isfinite(r0)) and np.all(np.isfinite(r1))):
            raise InputDomainError("rewards must be finite")
        r0.flags.writeable = False
        r1.flags.writeable = False
        object.__setattr__(self, "action_labels", labels)
        object.__setattr__(self, "rewards", (r0, r1))

    @property
    def n_actions(self):
        return (len(self.action_labels[0]), len(self.action_labels[1]))

    def reward(self, agent, action, opponent_action):
        return float(self.rewards[agent][action, opponent_action])

    def is_symmetric(self):
        return self.n_actions[0] == self.n_actions[1] and np.array_equal(
            self.rewards[0], self.rewards[1]
        )

    def reward_range(self):
        lo = min(float(r.min()) for r in self.rewards)
        hi = max(float(r.max()) for r in self.rewards)
        return lo, hi

    def interaction_prefactor(self, agent):
        """``R_CC - R_CD - R_DC + R_DD`` for a 2x2 game (``-1`` for the PD)."""
        r = self.rewards[agent]
        if r.shape != (2, 2):
            raise InputDomainError("interaction prefactor is defined for 2x2 games")
        return float(r[0, 0] - r[0, 1] - r[1, 0] + r[1, 1])

    def flat_payoffs(self):
        """Eight numbers, agent by agent, row-major in (own, opponent)."""
        return [float(x) for r in self.rewards for x in r.ravel()]

    @classmethod
    def from_flat(cls, payoffs, labels=("C", "D")):
        """Build a 2x2 game from the eight-number config layout."""
        values = [float(x) for x in payoffs]
        if len(values) != 8:
            raise InputDomainError(f"expected 8 payoffs, got {len(values)}")
        labels = tuple(labels)
        return cls(
            action_labels=(labels, labels),
            rewards=(np.reshape(values[:4], (2, 2)), np.reshape(values[4:], (2, 2))),
        )

    def __eq__(self, other):
        if not isinstance(other, GameSpec):
            return NotImplemented
        return self.action_labels == other.action_labels and all(
            np.array_equal(a, b) for a, b in zip(self.rewards, other.rewards)
        )

    def __hash__(self):
        return hash((self.action_labels, tuple(self.flat_payoffs())))


def prisoners_dilemma():
    """The prisoner's dilemma with payoffs (3,3), (0,5), (5,0), (1,1)."""
    r = np.array([[3.0, 0.0], [5.0, 1.0]])
    return GameSpec(action_labels=(("C", "D"), ("C", "D")), rewards=(r, r))


def check_distribution(p, name="policy"):
    p = np.asarray(p, dtype=np.float64)
    if p.ndim != 1 or p.size == 0:
        raise InputDomainError(f"{name} must be a non-empty vector")
    if not np.all(np.isfinite(p)) or np.any(p < 0.0) or np.any(p > 1.0):
        raise InputDomainError(f"{name} entries must lie in [0, 1]: {p}")
    if abs(p.sum() - 1.0) > PROB_TOL:
        raise InputDomainError(f"{name} must sum to 1 (sum={p.sum()!r})")
    return p


def expected_reward(game, agent, action, opponent_policy):
    """Expected reward of ``action`` for ``agent`` against a mixed opponent."""
    p = check_distribution(opponent_policy, "opponent_policy")
    row = game.rewards[agent][action]
    if p.shape != row.shape:
        raise InputDomainError(
            f"opponent policy has {p.size} entries, opponent has {row.size} actions"
        )
    return float(row @ p)


def expected_rewards(game, agent, opponent_policy):
    """Vector of expected rewards over all own actions (no validation)."""
    return game.rewards[agent] @ np.asarray(opponent_policy, dtype=np.float64)
