"""Independent Q-learning dynamics in two-player matrix games.

Stochastic simulators (IQL, FAQL, batch Q-learning), three deterministic
approximation models and the fixed-point / stability / bifurcation layer
built on top of them.
"""

from qdyn.game import GameSpec, expected_reward, expected_rewards, prisoners_dilemma
from qdyn.policy import boltzmann_policy, init_q_from_policy

__version__ = "0.1.0"

__all__ = [
    "GameSpec",
    "boltzmann_policy",
    "expected_reward",
    "expected_rewards",
    "init_q_from_policy",
    "prisoners_dilemma",
    "__version__",
]
