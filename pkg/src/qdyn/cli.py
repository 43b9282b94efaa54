"""Command-line front end.

Every command reads an INI config (see :mod:`qdyn.config`), applies the
``--seed/--out/--format`` overrides and writes plot-ready data. Each output
file carries the resolved config and seed in its metadata block.

Exit codes: 0 success, 2 config error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from qdyn import analysis, detmodels
from qdyn.config import ConfigError, ExperimentConfig, load_config, parse_config
from qdyn.errors import BranchError, ConvergenceError, InputDomainError, InteriorViolation
from qdyn.io import TRAJECTORY_COLUMNS, metadata, trajectory_table, write_json, write_table
from qdyn.policy import boltzmann_policy, init_q_from_policy, policy_from_cooperation
from qdyn.stochastic import AgentParams, RunConfig, ensemble_grouped_mean, policies_of, run

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3
COMMANDS = ("simulate", "ensemble", "model", "fixed-point", "stability", "bifurcate")


def _temps(cfg):
    return (cfg.params[0].temperature, cfg.params[1].temperature)


def _meta(command, cfg, **extra):
    return metadata(command, cfg.to_dict(), seed=cfg.seed, **extra)


def run_config(cfg: ExperimentConfig, run_index=0):
    if cfg.game.n_actions != (2, 2):
        raise ConfigError("trajectory output needs a 2x2 game")
    return RunConfig(params=cfg.params, game=cfg.game, initial_policy=cfg.initial_policy,
                     q_base=cfg.q_base, initial_q=cfg.initial_q, horizon=cfg.horizon,
                     seed=cfg.seed, run_index=run_index, stride=cfg.stride,
                     algorithm=cfg.algorithm, batch_size=cfg.batch_size)


def initial_q(cfg):
    if cfg.initial_q is not None:
        return np.array(cfg.initial_q)
    return init_q_from_policy(cfg.initial_policy, cfg.q_base, _temps(cfg))


def initial_policy(cfg):
    if cfg.initial_q is not None:
        return boltzmann_policy(np.array(cfg.initial_q), _temps(cfg), cfg.game.n_actions)
    return policy_from_cooperation(cfg.initial_policy)


# --------------------------------------------------------------------------
# commands; each returns the list of written paths


def cmd_simulate(cfg, out, jobs=1, name="trajectory"):
    tr = run(run_config(cfg))
    rows = trajectory_table(tr.steps, tr.q, tr.pi_c)
    return [write_table(out / name, TRAJECTORY_COLUMNS, rows, _meta("simulate", cfg), cfg.format)]


def cmd_ensemble(cfg, out, jobs=1, name="ensemble"):
    groups, trajectories = ensemble_grouped_mean(run_config(cfg), cfg.runs, jobs=jobs)
    n0 = cfg.game.n_actions[0]
    rows = []
    for g in groups:
        for k, step in enumerate(g.steps):
            rows.append([step, g.side, g.weight, g.mean_pi[k, 0], g.mean_pi[k, n0]])
    finals = [[float(t.pi_c[-1, 0]), float(t.pi_c[-1, 1])] for t in trajectories]
    meta = _meta("ensemble", cfg, runs=cfg.runs, final_pi_c=finals,
                 groups=[{"side": g.side, "weight": g.weight, "runs": g.run_indices}
                         for g in groups])
    return [write_table(out / name, ("step", "side", "weight", "pi1_c", "pi2_c"), rows, meta,
                        cfg.format)]


def model_trajectory(cfg):
    """``(steps, q or None, pi_c)`` of the configured deterministic model."""
    kind = detmodels.ModelKind(cfg.model)
    n0 = cfg.game.n_actions[0]
    if kind is detmodels.ModelKind.CPA_MAP:
        q = detmodels.iterate_cpa(initial_q(cfg), cfg.game, cfg.params, cfg.horizon, cfg.stride)
        pi = policies_of(q, _temps(cfg), cfg.game.n_actions)
        steps = np.arange(q.shape[0]) * cfg.stride
        return steps, q, pi[:, [0, n0]]
    pi0 = initial_policy(cfg)
    if kind is detmodels.ModelKind.BQL_MAP:
        pi = detmodels.iterate_bql(pi0, cfg.game, cfg.params, cfg.horizon, cfg.stride)
        steps = np.arange(pi.shape[0]) * cfg.stride
    else:
        pi = detmodels.integrate_faql(pi0, cfg.game, cfg.params, step=cfg.ode_step,
                                      n_steps=cfg.horizon, stride=cfg.stride,
                                      weighted=cfg.weighted)
        steps = np.arange(pi.shape[0]) * cfg.stride * cfg.ode_step
    return steps, None, pi[:, [0, n0]]


def cmd_model(cfg, out, jobs=1, name=None):
    steps, q, pi_c = model_trajectory(cfg)
    rows = trajectory_table(steps, q, pi_c)
    name = name or f"model_{cfg.model}"
    meta = _meta("model", cfg, model=cfg.model,
                 step_unit="model time" if cfg.model == "faql" else "map iterations")
    return [write_table(out / name, TRAJECTORY_COLUMNS, rows, meta, cfg.format)]


def cmd_fixed_point(cfg, out, jobs=1, name="fixed_point"):
    pi = analysis.solve_bql_fixed_point(cfg.game, _temps(cfg))
    n0 = cfg.game.n_actions[0]
    q = analysis.solve_cpa_fixed_point(cfg.game, cfg.params, pi_star=pi)
    payload = {
        "metadata": _meta("fixed-point", cfg),
        "pi_star": pi.tolist(),
        "pi_c_star": [float(pi[0]), float(pi[n0])],
        "residual": float(np.max(np.abs(analysis.bql_residual(pi, cfg.game, _temps(cfg))))),
        "q_star": q.tolist(),
    }
    path = (out / name).with_suffix(".json")
    write_json(path, payload)
    return [path]


def _stability(cfg):
    if cfg.model == "bql":
        return analysis.bql_stability(cfg.game, cfg.params)
    if cfg.model == "cpa":
        return analysis.cpa_stability(cfg.game, cfg.params)
    raise ConfigError("[run] model: stability supports bql and cpa")


def cmd_stability(cfg, out, jobs=1, name="stability"):
    rep = _stability(cfg)
    meta = _meta("stability", cfg)
    if cfg.format == "json":
        path = (out / name).with_suffix(".json")
        write_json(path, {"metadata": meta, **rep.to_dict()})
        return [path]
    n = len(rep.eigenvalues)
    cols = ["gamma"] + [f"lambda{k + 1}_abs" for k in range(n)] + ["classification"]
    row = [cfg.params[0].gamma, *np.abs(rep.eigenvalues), rep.classification]
    return [write_table(out / name, cols, [row], meta, "csv")]


def cmd_bifurcate(cfg, out, jobs=1, name="bifurcation"):
    if cfg.gamma_grid is None:
        raise ConfigError("[scan]: bifurcate needs a gamma grid")
    scan = analysis.bifurcation_scan(cfg.game, cfg.params, cfg.gamma_grid,
                                     interval_tol=cfg.interval_tol, jobs=jobs)
    meta = _meta("bifurcate", cfg, crossings=[c.to_dict() for c in scan.crossings],
                 type_changes=[c.to_dict() for c in scan.type_changes])
    if cfg.format == "json":
        path = (out / name).with_suffix(".json")
        write_json(path, {"metadata": meta, **scan.to_dict()})
        return [path]
    rows = scan.csv_rows()
    return [write_table(out / name, rows[0], rows[1:], meta, "csv")]


HANDLERS = {
    "simulate": cmd_simulate,
    "ensemble": cmd_ensemble,
    "model": cmd_model,
    "fixed-point": cmd_fixed_point,
    "stability": cmd_stability,
    "bifurcate": cmd_bifurcate,
}


# --------------------------------------------------------------------------
# figure bundles (published parameter sets)

INIT_GRID = tuple((a, b) for a in (0.1, 0.5, 0.9) for b in (0.1, 0.5, 0.9))
PROJECTION = np.array([[1.0, -1.0, 0.0, 0.0], [0.0, 0.0, 1.0, -1.0], [1.0, 1.0, -1.0, -1.0]])


def _base(gamma=0.8, temperature=1.0, **kw):
    params = (AgentParams(alpha=0.01, gamma=gamma, temperature=temperature),) * 2
    return ExperimentConfig(params=params, **kw)


def _tag(pol):
    return f"init_{pol[0]:g}_{pol[1]:g}"


def _fig1(init, horizon, stride):
    def bundle(seed, fmt):
        cfg = _base(initial_policy=init, q_base=0.0, seed=seed, format=fmt)
        return [
            ("simulate", "iql", cfg.replace(horizon=horizon, stride=stride)),
        ]
    return bundle


def _fig1_models(init, horizon, stride):
    def bundle(seed, fmt):
        cfg = _base(initial_policy=init, q_base=0.0, seed=seed, format=fmt)
        return [
            ("model", "cpa", cfg.replace(model="cpa", horizon=horizon, stride=stride)),
            ("model", "bql", cfg.replace(model="bql", horizon=200000, stride=100)),
            ("model", "faql", cfg.replace(model="faql", horizon=20000, stride=10, ode_step=10.0)),
        ]
    return bundle


def _qbase(kind, gamma):
    r = np.concatenate([np.ravel(x) for x in _base().game.rewards])
    return float((r.min() if kind == "min" else r.max()) / (1.0 - gamma))


def _fig2(kind, gamma):
    def bundle(seed, fmt):
        cfg = _base(gamma=gamma, q_base=_qbase(kind, gamma), seed=seed, format=fmt,
                    horizon=100000, stride=100, runs=5)
        return [("ensemble", _tag(p), cfg.replace(initial_policy=p)) for p in INIT_GRID]
    return bundle


def _fig3(kind, gamma):
    def bundle(seed, fmt):
        cfg = _base(gamma=gamma, q_base=_qbase(kind, gamma), seed=seed, format=fmt,
                    model="cpa", horizon=2000000, stride=1000)
        return [("model", _tag(p), cfg.replace(initial_policy=p)) for p in INIT_GRID]
    return bundle


def _fig4(temperature):
    def bundle(seed, fmt):
        grid = tuple(round(0.01 * k, 12) for k in range(100))
        return [("bifurcate", f"T_{temperature:g}",
                 _base(temperature=temperature, seed=seed, format=fmt, gamma_grid=grid))]
    return bundle


def fig5_config(gamma, seed=0, fmt="csv"):
    cfg = _base(gamma=gamma, seed=seed, format=fmt, model="cpa", horizon=30000, stride=10)
    q = analysis.solve_cpa_fixed_point(cfg.game, cfg.params)
    # centre the initial Q-values on the fixed point's midpoint
    return cfg.replace(q_base=float(0.5 * (q[0] + q[1])))


def _fig5(gamma, projected):
    def bundle(seed, fmt):
        cfg = fig5_config(gamma, seed, fmt)
        command = "projection" if projected else "model"
        return [(command, _tag(p), cfg.replace(initial_policy=p)) for p in INIT_GRID]
    return bundle


def _field(kind):
    def bundle(seed, fmt):
        return [(f"{kind}-field", kind, _base(gamma=0.0, seed=seed, format=fmt))]
    return bundle


def _bql_sweep(seed, fmt):
    return [("bql-sweep", "bql_stability", _base(gamma=0.0, seed=seed, format=fmt))]


FIGURES = {
    "fig1a": _fig1((0.5, 0.48), 200000, 10),
    "fig1b": _fig1((0.9, 0.7), 3000000, 100),
    "fig1c": _fig1_models((0.5, 0.48), 200000, 10),
    "fig1d": _fig1_models((0.9, 0.7), 3000000, 100),
    "fig2a": _fig2("min", 0.0),
    "fig2b": _fig2("min", 0.8),
    "fig2c": _fig2("max", 0.0),
    "fig2d": _fig2("max", 0.8),
    "fig2e": _field("faql"),
    "fig2f": _field("bql"),
    "fig2g": _bql_sweep,
    "fig3a": _fig3("min", 0.0),
    "fig3b": _fig3("min", 0.8),
    "fig3c": _fig3("max", 0.0),
    "fig3d": _fig3("max", 0.8),
    "fig4a": _fig4(0.3),
    "fig4b": _fig4(1.0),
    "fig4c": _fig4(10.0),
    "fig5a": _fig5(0.7, False),
    "fig5b": _fig5(0.8, False),
    "fig5c": _fig5(0.97, False),
    "fig5d": _fig5(0.7, True),
    "fig5e": _fig5(0.8, True),
    "fig5f": _fig5(0.97, True),
    # same 3D data as d-f; those panels differ only in viewing angle
    "fig5g": _fig5(0.7, True),
    "fig5h": _fig5(0.8, True),
    "fig5i": _fig5(0.97, True),
}


def cmd_projection(cfg, out, jobs=1, name="projection"):
    steps, q, _ = model_trajectory(cfg)
    x = q @ PROJECTION.T
    rows = [[steps[k], *x[k]] for k in range(len(steps))]
    meta = _meta("projection", cfg, basis=PROJECTION.tolist())
    return [write_table(out / name, ("step", "x1", "x2", "x3"), rows, meta, cfg.format)]


def _field_grid():
    return np.round(np.arange(0.05, 0.951, 0.05), 12)


def cmd_field(kind):
    def handler(cfg, out, jobs=1, name="field"):
        rows = []
        for a in _field_grid():
            for b in _field_grid():
                pi = policy_from_cooperation((a, b))
                if kind == "faql":
                    d = detmodels.faql_vector_field(pi, cfg.game, cfg.params)
                else:
                    d = detmodels.bql_map_step(pi, cfg.game, cfg.params) - pi
                rows.append([a, b, d[0], d[2]])
        meta = _meta(f"{kind}-field", cfg,
                     meaning="time derivative" if kind == "faql" else "one-step displacement")
        return [write_table(out / name, ("pi1_c", "pi2_c", "dpi1_c", "dpi2_c"), rows, meta,
                            cfg.format)]
    return handler


def cmd_bql_sweep(cfg, out, jobs=1, name="bql_stability"):
    rows = []
    for t in np.logspace(-1, 2, 31):
        p = AgentParams(alpha=cfg.params[0].alpha, gamma=0.0, temperature=float(t))
        rep = analysis.bql_stability(cfg.game, p)
        rows.append([float(t), rep.fixed_point_policy[0], *np.abs(rep.eigenvalues),
                     rep.classification])
    cols = ("temperature", "pi_c_star", "lambda1_abs", "lambda2_abs", "classification")
    return [write_table(out / name, cols, rows, _meta("bql-sweep", cfg), cfg.format)]


FIGURE_HANDLERS = dict(HANDLERS, projection=cmd_projection, **{
    "faql-field": cmd_field("faql"), "bql-field": cmd_field("bql"), "bql-sweep": cmd_bql_sweep,
})


def cmd_figure(name, seed, fmt, out, jobs=1):
    if name not in FIGURES:
        raise ConfigError(f"unknown figure {name!r}; known: {', '.join(FIGURES)}")
    target = out / name
    target.mkdir(parents=True, exist_ok=True)
    paths = []
    for command, part, cfg in FIGURES[name](seed, fmt):
        paths += FIGURE_HANDLERS[command](cfg, target, jobs=jobs, name=part)
    return paths


# --------------------------------------------------------------------------


def build_parser():
    parser = argparse.ArgumentParser(prog="qdyn", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config_required=True):
        p.add_argument("--config", required=config_required, help="INI experiment config")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--out", help="output directory (default: config [output] dir)")
        p.add_argument("--format", choices=("csv", "json"), help="output format")
        p.add_argument("--jobs", type=int, default=1, help="worker threads")

    for name in COMMANDS:
        common(sub.add_parser(name))
    fig = sub.add_parser("figure", help="reproduce the data behind a figure panel")
    fig.add_argument("name", help="bundle name, e.g. fig4b; 'list' prints all")
    common(fig, config_required=False)
    return parser


def _resolve(args):
    cfg = load_config(args.config, require_gamma=args.command != "bifurcate")
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.out is not None:
        changes["out_dir"] = args.out
    if args.format is not None:
        changes["format"] = args.format
    return cfg.replace(**changes)


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.seed is not None and not 0 <= args.seed < 2 ** 64:
            raise ConfigError("--seed must be an unsigned 64-bit integer")
        if args.jobs < 1:
            raise ConfigError("--jobs must be at least 1")
        if args.command == "figure":
            if args.name == "list":
                print("\n".join(FIGURES))
                return EXIT_OK
            out = Path(args.out or "out")
            paths = cmd_figure(args.name, args.seed or 0, args.format or "csv", out, args.jobs)
        else:
            cfg = _resolve(args)
            out = Path(cfg.out_dir)
            out.mkdir(parents=True, exist_ok=True)
            paths = HANDLERS[args.command](cfg, out, jobs=args.jobs)
    except (ConfigError, InputDomainError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ConvergenceError, InteriorViolation, BranchError) as exc:
        residual = getattr(exc, "residual", None)
        extra = f" (residual {residual:.3e})" if residual is not None else ""
        print(f"numerical failure: {exc}{extra}", file=sys.stderr)
        return EXIT_NUMERIC
    for p in paths:
        print(p)
    return EXIT_OK


__all__ = ["main", "build_parser", "parse_config", "FIGURES"]


if __name__ == "__main__":
    sys.exit(main())
