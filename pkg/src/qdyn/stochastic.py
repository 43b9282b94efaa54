"""Stochastic simulators: incremental IQL, frequency-adjusted QL, batch QL.

Random numbers come from numpy's Philox4x64-10 bit generator keyed with
``seed + (run_index << 64)`` and counter 0; uniforms are numpy's standard
53-bit doubles. Each step draws one uniform per agent (agent 0 first) and
picks the action by inverse CDF over the Boltzmann policy.
"""

from __future__ import annotations

import dataclasses
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from qdyn import _kernels
from qdyn.errors import InputDomainError
from qdyn.game import GameSpec, prisoners_dilemma
from qdyn.policy import boltzmann_policy, init_q_from_policy, split

ALGORITHMS = ("IQL", "FAQL", "BatchQL")
CHUNK = 1 << 16


@dataclass(frozen=True)
class AgentParams:
    """Learning hyperparameters of one agent. ``beta`` is only used by FAQL."""

    alpha: float
    gamma: float
    temperature: float
    beta: float | None = None

    def __post_init__(self):
        for name in ("alpha", "gamma"):
            v = getattr(self, name)
            if not (0.0 <= v < 1.0):
                raise InputDomainError(f"{name} must lie in [0, 1), got {v}")
        if not (self.temperature > 0.0 and np.isfinite(self.temperature)):
            raise InputDomainError(f"temperature must be positive, got {self.temperature}")
        if self.beta is not None and not (0.0 <= self.beta < 1.0):
            raise InputDomainError(f"beta must lie in [0, 1), got {self.beta}")


def agent_pair(params):
    """Accept one AgentParams (shared) or a pair."""
    if isinstance(params, AgentParams):
        return (params, params)
    params = tuple(params)
    if len(params) != 2 or not all(isinstance(p, AgentParams) for p in params):
        raise InputDomainError("params must be an AgentParams or a pair of them")
    return params


def _arrays(params):
    p = agent_pair(params)
    alpha = np.array([p[0].alpha, p[1].alpha])
    gamma = np.array([p[0].gamma, p[1].gamma])
    temp = np.array([p[0].temperature, p[1].temperature])
    beta = np.array([
        np.nan if p[0].beta is None else p[0].beta,
        np.nan if p[1].beta is None else p[1].beta,
    ])
    return alpha, gamma, temp, beta


def make_rng(seed, run_index=0):
    """Philox generator for run ``run_index`` of master seed ``seed``."""
    seed = int(seed)
    run_index = int(run_index)
    if not (0 <= seed < 2**64 and 0 <= run_index < 2**64):
        raise InputDomainError("seed and run index must be unsigned 64-bit integers")
    return np.random.Generator(np.random.Philox(key=seed + (run_index << 64)))


def _tables(state, game):
    q = np.array(state, dtype=np.float64)
    n0 = game.n_actions[0]
    if q.shape != (sum(game.n_actions),):
        raise InputDomainError(f"state shape {q.shape} does not match game {game.n_actions}")
    return q, n0


def _step(state, game, params, rng, actions, mode):
    q, n0 = _tables(state, game)
    alpha, gamma, temp, beta = _arrays(params)
    if mode == _kernels.FAQL and np.any(np.isnan(beta)):
        raise InputDomainError("FAQL needs beta for both agents")
    f0, f1 = (-1, -1) if actions is None else (int(actions[0]), int(actions[1]))
    # draw both uniforms even when actions are forced so the stream stays aligned
    u0, u1 = rng.random(2)
    pi0 = np.empty(n0)
    pi1 = np.empty(q.size - n0)
    a0, a1, r0, r1 = _kernels.td_step(
        q[:n0], q[n0:], game.rewards[0], game.rewards[1], alpha, gamma, temp, beta,
        mode, u0, u1, pi0, pi1, f0, f1,
    )
    return q, (a0, a1), (r0, r1)


def iql_step(state, game, params, rng, actions=None):
    """One step of independent Q-learning.

    Each agent samples from its Boltzmann policy and updates only the
    Q-value of the action it played. ``actions`` forces the joint action.

    Returns
    -------
    (new_state, joint_action, rewards)
    """
    return _step(state, game, params, rng, actions, _kernels.IQL)


def faql_step(state, game, params, rng, actions=None):
    """One step of frequency-adjusted Q-learning (rate ``alpha * min(beta / pi, 1)``)."""
    return _step(state, game, params, rng, actions, _kernels.FAQL)


def batch_td_errors(state, game, policy, batch_size, params, rng, return_actions=False):
    """Averaged TD errors of one batch played under a frozen joint policy.

    Returns ``(td, counts)`` as flat per-agent vectors; ``td`` is already
    divided by ``max(1, count)``.
    """
    if batch_size < 1:
        raise InputDomainError("batch size must be at least 1")
    q, n0 = _tables(state, game)
    _, gamma, _, _ = _arrays(params)
    pi = np.asarray(policy, dtype=np.float64)
    uniforms = rng.random(2 * int(batch_size))
    actions = np.zeros((int(batch_size) if return_actions else 1, 2), dtype=np.int64)
    rewards = np.zeros(actions.shape)
    s0, s1, c0, c1 = _kernels.batch_td(
        q[:n0], q[n0:], pi[:n0], pi[n0:], game.rewards[0], game.rewards[1], gamma,
        uniforms, actions, rewards, return_actions,
    )
    counts = np.concatenate([c0, c1])
    td = np.concatenate([s0, s1]) / np.maximum(1.0, counts)
    if return_actions:
        return td, counts, actions
    return td, counts


def batch_update(state, game, policy, batch_size, params, rng):
    """Batch Q-learning update: ``K`` plays under ``policy``, one averaged step."""
    if batch_size < 1:
        raise InputDomainError("batch size must be at least 1")
    q, n0 = _tables(state, game)
    alpha, gamma, _, _ = _arrays(params)
    pi = np.asarray(policy, dtype=np.float64)
    uniforms = rng.random(2 * int(batch_size))
    actions = np.zeros((1, 2), dtype=np.int64)
    rewards = np.zeros((1, 2))
    s0, s1, c0, c1 = _kernels.batch_td(
        q[:n0], q[n0:], pi[:n0], pi[n0:], game.rewards[0], game.rewards[1], gamma,
        uniforms, actions, rewards, False,
    )
    q0, q1 = q[:n0].copy(), q[n0:].copy()
    _kernels.apply_batch(q0, q1, alpha, s0, s1, c0, c1)
    return np.concatenate([q0, q1])


@dataclass(frozen=True)
class RunConfig:
    """Everything that determines a stochastic run.

    The initial state is ``initial_q`` when given, otherwise Q-values
    centred on ``q_base`` realising ``initial_policy`` (2x2 games only).
    """

    params: tuple
    game: GameSpec = field(default_factory=prisoners_dilemma)
    initial_policy: tuple = (0.5, 0.5)
    q_base: float = 0.0
    initial_q: tuple | None = None
    horizon: int = 1
    seed: int = 0
    run_index: int = 0
    stride: int = 1
    algorithm: str = "IQL"
    batch_size: int = 1
    record_actions: bool = False

    def __post_init__(self):
        object.__setattr__(self, "params", agent_pair(self.params))
        if self.algorithm not in ALGORITHMS:
            raise InputDomainError(f"algorithm must be one of {ALGORITHMS}")
        if int(self.horizon) < 1:
            raise InputDomainError("horizon must be at least 1")
        if int(self.stride) < 1:
            raise InputDomainError("stride must be at least 1")
        if self.algorithm == "BatchQL" and int(self.batch_size) < 1:
            raise InputDomainError("batch size must be at least 1")
        if self.algorithm == "FAQL" and any(p.beta is None for p in self.params):
            raise InputDomainError("FAQL needs beta for both agents")
        if self.initial_q is not None:
            object.__setattr__(self, "initial_q", tuple(float(v) for v in self.initial_q))
        object.__setattr__(self, "initial_policy", tuple(float(v) for v in self.initial_policy))
        self.initial_state()

    @property
    def temperatures(self):
        return (self.params[0].temperature, self.params[1].temperature)

    def initial_state(self):
        if self.initial_q is not None:
            q, _ = _tables(self.initial_q, self.game)
            if not np.all(np.isfinite(q)):
                raise InputDomainError("initial Q-values must be finite")
            return q
        if self.game.n_actions != (2, 2):
            raise InputDomainError("policy initialisation needs a 2x2 game; pass initial_q")
        return init_q_from_policy(self.initial_policy, self.q_base, self.temperatures)

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    def to_dict(self):
        return {
            "game": {
                "action_labels": [list(x) for x in self.game.action_labels],
                "payoffs": self.game.flat_payoffs() if self.game.n_actions == (2, 2) else None,
                "rewards": [r.tolist() for r in self.game.rewards],
            },
            "params": [dataclasses.asdict(p) for p in self.params],
            "initial_policy": list(self.initial_policy),
            "q_base": self.q_base,
            "initial_q": None if self.initial_q is None else list(self.initial_q),
            "horizon": int(self.horizon),
            "seed": int(self.seed),
            "run_index": int(self.run_index),
            "stride": int(self.stride),
            "algorithm": self.algorithm,
            "batch_size": int(self.batch_size),
            "record_actions": bool(self.record_actions),
        }

    @classmethod
    def from_dict(cls, d):
        g = d["game"]
        game = GameSpec(action_labels=tuple(tuple(x) for x in g["action_labels"]),
                        rewards=tuple(np.array(r) for r in g["rewards"]))
        return cls(
            params=tuple(AgentParams(**p) for p in d["params"]),
            game=game,
            initial_policy=tuple(d["initial_policy"]),
            q_base=d["q_base"],
            initial_q=None if d["initial_q"] is None else tuple(d["initial_q"]),
            horizon=d["horizon"],
            seed=d["seed"],
            run_index=d["run_index"],
            stride=d["stride"],
            algorithm=d["algorithm"],
            batch_size=d["batch_size"],
            record_actions=d["record_actions"],
        )


@dataclass
class Trajectory:
    """Thinned record of a run; row ``k`` of ``q``/``pi`` belongs to ``steps[k]``.

    Row 0 is the initial state at step 0.
    """

    stride: int
    steps: np.ndarray
    q: np.ndarray
    pi: np.ndarray
    n_actions: tuple = (2, 2)
    joint_actions: np.ndarray | None = None
    rewards: np.ndarray | None = None
    config: object = None

    def __len__(self):
        return len(self.steps)

    def samples(self):
        for k in range(len(self.steps)):
            yield int(self.steps[k]), self.q[k], self.pi[k]

    @property
    def pi_c(self):
        """``(pi1_C, pi2_C)`` per sample, shape ``(n, 2)``."""
        return self.pi[:, [0, self.n_actions[0]]]


def policies_of(q, temperatures, n_actions):
    """Row-wise Boltzmann policies of a ``(n, d)`` array of Q-states."""
    q = np.atleast_2d(np.asarray(q, dtype=np.float64))
    n0 = n_actions[0]
    out = np.empty_like(q)
    t = (temperatures[0], temperatures[1])
    for sl, temp in ((slice(0, n0), t[0]), (slice(n0, None), t[1])):
        z = q[:, sl] / temp
        z = z - z.max(axis=1, keepdims=True)
        e = np.exp(z)
        out[:, sl] = e / e.sum(axis=1, keepdims=True)
    return out


def iter_run(config: RunConfig, chunk: int = CHUNK):
    """Stream a run in chunks.

    Yields ``(steps, q, joint_actions, rewards)`` per chunk, where the last
    two are ``None`` unless ``record_actions`` is set. Memory stays bounded
    by ``chunk`` regardless of the horizon.
    """
    game = config.game
    q = config.initial_state()
    n0 = game.n_actions[0]
    q0, q1 = q[:n0], q[n0:]
    alpha, gamma, temp, beta = _arrays(config.params)
    rng = make_rng(config.seed, config.run_index)
    horizon = int(config.horizon)
    stride = int(config.stride)
    mode = _kernels.FAQL if config.algorithm == "FAQL" else _kernels.IQL
    batch = int(config.batch_size) if config.algorithm == "BatchQL" else 1
    if config.algorithm == "BatchQL":
        chunk = max(batch, (chunk // batch) * batch)
    r0, r1 = game.rewards
    done = 0
    while done < horizon:
        n = min(chunk, horizon - done)
        n_full = n - n % batch if config.algorithm == "BatchQL" else n
        n_rec = (done + n) // stride - done // stride
        rec_steps = np.empty(n_rec, dtype=np.int64)
        rec_q = np.empty((n_rec, q.size))
        rows = n if config.record_actions else 1
        acts = np.full((rows, 2), -1, dtype=np.int64)
        rews = np.full((rows, 2), np.nan)
        uniforms = rng.random(2 * n_full)
        if config.algorithm == "BatchQL":
            k = _kernels.run_batch(q0, q1, r0, r1, alpha, gamma, temp, batch, uniforms,
                                   done, stride, rec_steps, rec_q, acts, rews,
                                   config.record_actions)
            # an unfinished final batch is never committed
            for step in range(done + n_full + 1, done + n + 1):
                if step % stride == 0:
                    rec_steps[k] = step
                    rec_q[k] = q
                    k += 1
        else:
            k = _kernels.run_incremental(q0, q1, r0, r1, alpha, gamma, temp, beta, mode,
                                         uniforms, done, stride, rec_steps, rec_q, acts,
                                         rews, config.record_actions)
        assert k == n_rec
        done += n
        yield (rec_steps, rec_q,
               acts[:n_full] if config.record_actions else None,
               rews[:n_full] if config.record_actions else None)


def run(config: RunConfig, chunk: int = CHUNK) -> Trajectory:
    """Run a configuration to its horizon and collect the thinned trajectory."""
    q_init = config.initial_state()
    steps = [np.zeros(1, dtype=np.int64)]
    qs = [q_init[None, :]]
    acts, rews = [], []
    for rec_steps, rec_q, a, r in iter_run(config, chunk):
        steps.append(rec_steps)
        qs.append(rec_q)
        if a is not None:
            acts.append(a)
            rews.append(r)
    q = np.concatenate(qs)
    return Trajectory(
        stride=int(config.stride),
        steps=np.concatenate(steps),
        q=q,
        pi=policies_of(q, config.temperatures, config.game.n_actions),
        n_actions=config.game.n_actions,
        joint_actions=np.concatenate(acts) if config.record_actions else None,
        rewards=np.concatenate(rews) if config.record_actions else None,
        config=config,
    )


@dataclass
class GroupedMean:
    """Mean policy trajectory of the runs ending on one side of the anti-diagonal."""

    side: str
    weight: float
    run_indices: list
    steps: np.ndarray
    mean_pi: np.ndarray


def final_side(trajectory):
    """``"below"`` if the final ``pi1_C + pi2_C < 1`` else ``"above"``."""
    pc = trajectory.pi_c[-1]
    return "below" if pc[0] + pc[1] < 1.0 else "above"


def ensemble_grouped_mean(config: RunConfig, n_runs: int, jobs: int = 1):
    """Run ``n_runs`` independent runs and average them per final side.

    Runs use run indices ``0 .. n_runs-1`` under ``config.seed``. Groups are
    returned in the order ``below``, ``above``, omitting empty ones.
    """
    if n_runs < 1:
        raise InputDomainError("n_runs must be at least 1")
    configs = [config.replace(run_index=k) for k in range(n_runs)]
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            trajectories = list(pool.map(run, configs))
    else:
        trajectories = [run(c) for c in configs]
    groups = []
    for side in ("below", "above"):
        idx = [k for k, t in enumerate(trajectories) if final_side(t) == side]
        if not idx:
            continue
        mean_pi = np.mean([trajectories[k].pi for k in idx], axis=0)
        groups.append(GroupedMean(side, len(idx) / n_runs, idx,
                                  trajectories[0].steps.copy(), mean_pi))
    return groups, trajectories


__all__ = [
    "AgentParams", "RunConfig", "Trajectory", "GroupedMean", "ALGORITHMS",
    "batch_td_errors", "batch_update", "ensemble_grouped_mean", "faql_step",
    "iql_step", "iter_run", "make_rng", "policies_of", "run",
]
