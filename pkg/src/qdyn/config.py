"""Experiment configuration files.

INI layout (stdlib ``configparser``)::

    [game]      preset = prisoners_dilemma | payoffs = 8 numbers, labels = C D
    [agents]    alpha, gamma, temperature, beta   (shared by both agents)
    [agent1]    per-agent overrides of the same keys
    [agent2]
    [init]      policy = pi1_C pi2_C, q_base = x   | q = 4 numbers
    [run]       algorithm, model, horizon, stride, seed, runs, batch_size,
                ode_step, weighted
    [scan]      gamma_start, gamma_stop, gamma_step | gammas = list, interval_tol
    [output]    dir, format

``alpha``, ``gamma`` and ``temperature`` have no defaults. Unknown
sections and keys are errors.
"""

from __future__ import annotations

import configparser
import dataclasses
from dataclasses import dataclass

import numpy as np

from qdyn.game import GameSpec, prisoners_dilemma
from qdyn.stochastic import ALGORITHMS, AgentParams

MODELS = ("faql", "bql", "cpa")
FORMATS = ("csv", "json")
AGENT_KEYS = ("alpha", "gamma", "temperature", "beta")
REQUIRED_AGENT_KEYS = ("alpha", "gamma", "temperature")
SCHEMA = {
    "game": ("preset", "payoffs", "labels"),
    "agents": AGENT_KEYS,
    "agent1": AGENT_KEYS,
    "agent2": AGENT_KEYS,
    "init": ("policy", "q_base", "q"),
    "run": ("algorithm", "model", "horizon", "stride", "seed", "runs", "batch_size",
            "ode_step", "weighted"),
    "scan": ("gamma_start", "gamma_stop", "gamma_step", "gammas", "interval_tol"),
    "output": ("dir", "format"),
}
PRESETS = {"prisoners_dilemma": prisoners_dilemma}


class ConfigError(ValueError):
    """A configuration value is missing, unknown or out of its domain."""


@dataclass(frozen=True)
class ExperimentConfig:
    params: tuple
    game: GameSpec = dataclasses.field(default_factory=prisoners_dilemma)
    algorithm: str = "IQL"
    model: str = "cpa"
    initial_policy: tuple = (0.5, 0.5)
    q_base: float = 0.0
    initial_q: tuple | None = None
    horizon: int = 10000
    stride: int = 1
    seed: int = 0
    runs: int = 5
    batch_size: int = 1
    ode_step: float = 0.1
    weighted: bool = True
    gamma_grid: tuple | None = None
    interval_tol: float = 1e-4
    out_dir: str = "out"
    format: str = "csv"

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    def to_dict(self):
        d = dataclasses.asdict(self)
        d["params"] = [dataclasses.asdict(p) for p in self.params]
        d["game"] = {"labels": [list(x) for x in self.game.action_labels],
                     "payoffs": list(self.game.flat_payoffs())}
        for key in ("initial_policy", "initial_q", "gamma_grid"):
            if d[key] is not None:
                d[key] = list(d[key])
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        labels = tuple(d["game"]["labels"][0])
        d["game"] = GameSpec.from_flat(d["game"]["payoffs"], labels)
        d["params"] = tuple(AgentParams(**p) for p in d["params"])
        for key in ("initial_policy", "initial_q", "gamma_grid"):
            if d[key] is not None:
                d[key] = tuple(d[key])
        return cls(**d)


def _floats(text, field, n=None):
    try:
        vals = tuple(float(v) for v in text.replace(",", " ").split())
    except ValueError:
        raise ConfigError(f"{field}: expected numbers, got {text!r}") from None
    if n is not None and len(vals) != n:
        raise ConfigError(f"{field}: expected {n} numbers, got {len(vals)}")
    if not all(np.isfinite(vals)):
        raise ConfigError(f"{field}: values must be finite")
    return vals


def _num(section, key, kind):
    field = f"[{section.name}] {key}"
    text = section[key]
    try:
        if kind is bool:
            return section.getboolean(key)
        return kind(text)
    except ValueError:
        raise ConfigError(f"{field}: expected {kind.__name__}, got {text!r}") from None


def _agent(cp, k, require_gamma):
    merged = {}
    for name in ("agents", f"agent{k + 1}"):
        if cp.has_section(name):
            for key in cp[name]:
                merged[key] = (cp[name], key)
    required = REQUIRED_AGENT_KEYS if require_gamma else ("alpha", "temperature")
    missing = [key for key in required if key not in merged]
    if missing:
        raise ConfigError(f"agent {k + 1}: missing required field(s) {', '.join(missing)}")
    vals = {key: _num(sec, key, float) for key, (sec, key) in merged.items()}
    vals.setdefault("gamma", 0.0)
    try:
        return AgentParams(**vals)
    except ValueError as exc:
        raise ConfigError(f"agent {k + 1}: {exc}") from None


def _game(cp):
    if not cp.has_section("game"):
        return prisoners_dilemma()
    sec = cp["game"]
    if "preset" in sec and "payoffs" in sec:
        raise ConfigError("[game]: give either preset or payoffs, not both")
    if "payoffs" in sec:
        labels = tuple(sec.get("labels", "C D").split())
        try:
            return GameSpec.from_flat(_floats(sec["payoffs"], "[game] payoffs", 8), labels)
        except ValueError as exc:
            raise ConfigError(f"[game]: {exc}") from None
    preset = sec.get("preset", "prisoners_dilemma")
    if preset not in PRESETS:
        raise ConfigError(f"[game] preset: unknown preset {preset!r}")
    return PRESETS[preset]()


def _grid(cp):
    if not cp.has_section("scan"):
        return None, 1e-4
    sec = cp["scan"]
    tol = _num(sec, "interval_tol", float) if "interval_tol" in sec else 1e-4
    if "gammas" in sec:
        return _floats(sec["gammas"], "[scan] gammas"), tol
    keys = ("gamma_start", "gamma_stop", "gamma_step")
    if not any(key in sec for key in keys):
        return None, tol
    if not all(key in sec for key in keys):
        raise ConfigError("[scan]: gamma_start, gamma_stop and gamma_step go together")
    start, stop, step = (_num(sec, key, float) for key in keys)
    if not step > 0 or stop < start:
        raise ConfigError("[scan]: need gamma_step > 0 and gamma_stop >= gamma_start")
    n = int(np.floor((stop - start) / step + 1e-9)) + 1
    # round away the accumulation error of start + k*step
    return tuple(float(round(start + k * step, 12)) for k in range(n)), tol


def parse_config(text, require_gamma=True):
    """Parse INI text into an :class:`ExperimentConfig`.

    ``require_gamma=False`` is for scans, where the grid supplies gamma.
    """
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from None
    for name in cp.sections():
        if name not in SCHEMA:
            raise ConfigError(f"unknown section [{name}]")
        for key in cp[name]:
            if key not in SCHEMA[name]:
                raise ConfigError(f"[{name}]: unknown key {key!r}")

    kw = {"game": _game(cp)}
    kw["params"] = tuple(_agent(cp, k, require_gamma) for k in range(2))
    if cp.has_section("init"):
        sec = cp["init"]
        if "q" in sec:
            if "policy" in sec or "q_base" in sec:
                raise ConfigError("[init]: q excludes policy and q_base")
            kw["initial_q"] = _floats(sec["q"], "[init] q", sum(kw["game"].n_actions))
        if "policy" in sec:
            pol = _floats(sec["policy"], "[init] policy", 2)
            if not all(0.0 < v < 1.0 for v in pol):
                raise ConfigError("[init] policy: probabilities must lie strictly in (0, 1)")
            kw["initial_policy"] = pol
        if "q_base" in sec:
            kw["q_base"] = _num(sec, "q_base", float)
    if cp.has_section("run"):
        sec = cp["run"]
        ints = {"horizon": 0, "stride": 1, "seed": 0, "runs": 1, "batch_size": 1}
        for key, low in ints.items():
            if key in sec:
                v = _num(sec, key, int)
                if v < low:
                    raise ConfigError(f"[run] {key}: must be >= {low}")
                kw[key] = v
        if "algorithm" in sec:
            if sec["algorithm"] not in ALGORITHMS:
                raise ConfigError(f"[run] algorithm: must be one of {', '.join(ALGORITHMS)}")
            kw["algorithm"] = sec["algorithm"]
        if "model" in sec:
            if sec["model"] not in MODELS:
                raise ConfigError(f"[run] model: must be one of {', '.join(MODELS)}")
            kw["model"] = sec["model"]
        if "ode_step" in sec:
            kw["ode_step"] = _num(sec, "ode_step", float)
            if not kw["ode_step"] > 0:
                raise ConfigError("[run] ode_step: must be positive")
        if "weighted" in sec:
            kw["weighted"] = _num(sec, "weighted", bool)
    kw["gamma_grid"], kw["interval_tol"] = _grid(cp)
    if cp.has_section("output"):
        sec = cp["output"]
        if "dir" in sec:
            kw["out_dir"] = sec["dir"]
        if "format" in sec:
            if sec["format"] not in FORMATS:
                raise ConfigError("[output] format: must be csv or json")
            kw["format"] = sec["format"]
    cfg = ExperimentConfig(**kw)
    if cfg.algorithm == "FAQL" and any(p.beta is None for p in cfg.params):
        raise ConfigError("[agents] beta: required for FAQL")
    return cfg


def load_config(path, require_gamma=True):
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text, require_gamma)
