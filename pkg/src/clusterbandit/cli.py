"""Command-line entry point (``clusterbandit`` or ``python -m clusterbandit``).

Errors are reported as one JSON line on stderr, e.g.
``{"error": "config", "key": "env.d_sate", "message": "..."}``; exit status
is 2 for usage/config errors and 1 for runtime failures.
"""
import argparse
import csv
import json
import logging
from pathlib import Path
import sys

import numpy as np

from . import __version__

log = logging.getLogger("clusterbandit")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _emit_error(kind, message, key=None):
    payload = {"error": kind, "message": message}
    if key is not None:
        payload["key"] = key
    print(json.dumps(payload), file=sys.stderr)


def _load(args):
    from .config import load_config

    cfg = load_config(args.config)
    if getattr(args, "seed", None) is not None:
        cfg.master_seed = args.seed
        cfg.validate()
    return cfg


def cmd_run(args):
    from .experiment import emit_results, run_experiment

    cfg = _load(args)
    if args.workers is not None:
        cfg.workers = args.workers
    out = Path(args.out or cfg.output_dir)

    def progress(run):
        last = run.records[-1].mean_R if run.records else float("nan")
        log.info("rep %d %s/%s seed %d: final R=%.3f (%s, %.1fs)", run.repetition, run.algorithm, run.mode,
                 run.agent_seed, last, run.status, run.wall_seconds)

    result = run_experiment(cfg, progress=progress)
    files = emit_results(result, out)
    print(json.dumps({"status": "ok", "output_dir": str(out), "files": [p.name for p in files],
                      "aborted_runs": sum(r.status != "ok" for r in result.runs)}))
    return 0


def cmd_diagnose(args):
    from .diagnostics import adjacent_state_reward_table, cluster_reward_correlation
    from .env import build_environment
    from .experiment import env_config_for
    from .plotting import correlation_svg, reward_table_svg
    from .rng import derive_stream

    cfg = _load(args)
    out = Path(args.out or Path(cfg.output_dir) / "diagnostics")
    out.mkdir(parents=True, exist_ok=True)
    env = build_environment(env_config_for(cfg, args.repetition))
    table = adjacent_state_reward_table(env, derive_stream(cfg.master_seed, "diagnose/adjacent"),
                                        n_states=args.n_states, n_actions_shown=min(args.n_actions, cfg.n_actions),
                                        sigma=args.sigma)
    with open(out / "reward_table.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["state"] + [f"a{j}" for j in range(table.shape[1])])
        for i, row in enumerate(table):
            w.writerow([f"s{i + 1}"] + [repr(float(x)) for x in row])
    (out / "reward_table.svg").write_text(reward_table_svg(table))
    n_samples = args.n_samples or cfg.n_fit_samples
    k = args.k or cfg.k
    corr = cluster_reward_correlation(env, derive_stream(cfg.master_seed, "diagnose/correlation"), n_samples, k)
    with open(out / "cluster_correlation.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["cluster", "rho", "n_members", "n_pairs"])
        for c in range(k):
            rho = "" if not np.isfinite(corr.rho[c]) else repr(float(corr.rho[c]))
            w.writerow([c, rho, int(corr.n_members[c]), int(corr.n_pairs[c])])
    (out / "cluster_correlation.svg").write_text(correlation_svg(np.nan_to_num(corr.rho)))
    print(json.dumps({"status": "ok", "output_dir": str(out), "mean_rho": corr.mean_defined(),
                      "undefined_clusters": len(corr.flags)}))
    return 0


def cmd_env_export(args):
    from .clustering import clusterize_environment
    from .env import build_environment, save_environment
    from .experiment import env_config_for
    from .rng import derive_stream

    cfg = _load(args)
    env = build_environment(env_config_for(cfg, args.repetition))
    model = None
    if args.with_clusters:
        model = clusterize_environment(env, cfg.n_fit_samples, cfg.k, cfg.mode,
                                       derive_stream(cfg.master_seed, f"cluster/{args.repetition}"),
                                       max_iter=cfg.kmeans_max_iter, tol=cfg.kmeans_tol).model
    save_environment(env, args.path, model)
    print(json.dumps({"status": "ok", "path": str(args.path), "env_seed": env.config.seed,
                      "clusters": None if model is None else model.k}))
    return 0


def cmd_env_import(args):
    from .env import load_environment

    env, model = load_environment(args.path)
    probe = np.zeros(env.d_state)
    print(json.dumps({"status": "ok", "config": vars(env.config), "clusters": None if model is None else model.k,
                      "reward_at_origin": env.reward_vector(probe)[: min(5, env.n_actions)].tolist()}))
    return 0


def cmd_agent_save(args):
    from .agents import AgentConfig, make_agent, save_agent
    from .experiment import build_repetition
    from .rng import derive_seed, derive_stream
    from .training import train_agent

    cfg = _load(args)
    if args.mode == "clustered":
        cfg.clustering = True
    rep = build_repetition(cfg, args.repetition)
    target = rep.env if args.mode == "full" else rep.clustered
    steps = args.steps if args.steps is not None else cfg.budget
    seed = derive_seed(cfg.master_seed, f"agent/{args.repetition}/{args.algorithm}/0")
    agent = make_agent(AgentConfig(args.algorithm, target.observation_dim, cfg.n_actions, list(cfg.pi_architecture),
                                   seed, max(steps, 1), dict(cfg.hyperparams.get(args.algorithm, {}))))
    every = steps if steps > 0 else 1
    run = train_agent(agent, target, derive_stream(cfg.master_seed, f"states/{args.repetition}"), steps,
                      rep.eval_set, every, n_eval_draws=cfg.uniform_draws) if steps > 0 else None
    save_agent(agent, args.path)
    final = run.records[-1].mean_R if run and run.records else None
    print(json.dumps({"status": "ok", "path": str(args.path), "trained_steps": steps, "final_mean_R": final}))
    return 0


def cmd_agent_load(args):
    from .agents import load_agent
    from .evaluation import evaluate_policy
    from .experiment import build_repetition

    agent = load_agent(args.path)
    info = {"status": "ok", "algorithm": agent.config.algorithm, "obs_dim": agent.config.obs_dim,
            "n_actions": agent.config.n_actions, "timesteps": agent.num_timesteps}
    if args.config:
        cfg = _load(args)
        if args.mode == "clustered":
            cfg.clustering = True
        rep = build_repetition(cfg, args.repetition)
        target = rep.env if args.mode == "full" else rep.clustered
        rec = evaluate_policy(agent, target, rep.eval_set, rng=np.random.default_rng(0))
        info["eval"] = {"mean_R": rec.mean_R, "min_R": rec.min_R, "max_R": rec.max_R,
                        "n_excluded_states": rec.n_excluded_states}
    print(json.dumps(info))
    return 0


def cmd_replot(args):
    from .experiment import replot

    agg = replot(args.result_dir)
    print(json.dumps({"status": "ok", "output_dir": str(args.result_dir), "aggregate_rows": len(agg)}))
    return 0


def cmd_configs(args):
    from .config import bundled_configs

    for name in bundled_configs():
        print(name)
    return 0


def build_parser():
    p = _Parser(prog="clusterbandit", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS,
                        help="log progress to stderr")
    sub = p.add_subparsers(dest="command", parser_class=_Parser, required=True)
    _add = sub.add_parser

    def add_parser(name, **kw):
        return _add(name, parents=[common], **kw)

    sub.add_parser = add_parser

    def with_config(sp, seed=True):
        sp.add_argument("config", help="config file, or the name of a bundled preset")
        if seed:
            sp.add_argument("--seed", type=int, help="override the master seed")

    sp = sub.add_parser("run", help="train all agents and write results")
    with_config(sp)
    sp.add_argument("--out", help="output directory (default: run.output_dir from the config)")
    sp.add_argument("--workers", type=int, help="parallel worker processes")
    sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("diagnose", help="reward-structure diagnostics only")
    with_config(sp)
    sp.add_argument("--out")
    sp.add_argument("--repetition", type=int, default=0)
    sp.add_argument("--n-samples", type=int, help="states for the correlation analysis")
    sp.add_argument("--k", type=int, help="clusters for the correlation analysis")
    sp.add_argument("--n-states", type=int, default=5)
    sp.add_argument("--n-actions", type=int, default=10)
    sp.add_argument("--sigma", type=float, default=0.01, help="std of the nearly identical states")
    sp.set_defaults(func=cmd_diagnose)

    sp = sub.add_parser("env", help="export or import an environment")
    env_sub = sp.add_subparsers(dest="env_command", parser_class=_Parser, required=True)
    env_sub.add_parser = lambda name, _add=env_sub.add_parser, **kw: _add(name, parents=[common], **kw)
    e = env_sub.add_parser("export")
    with_config(e)
    e.add_argument("path")
    e.add_argument("--repetition", type=int, default=0)
    e.add_argument("--with-clusters", action="store_true", help="also fit and store the k-means model")
    e.set_defaults(func=cmd_env_export)
    e = env_sub.add_parser("import")
    e.add_argument("path")
    e.set_defaults(func=cmd_env_import)

    sp = sub.add_parser("agent", help="train-and-save or load an agent checkpoint")
    agent_sub = sp.add_subparsers(dest="agent_command", parser_class=_Parser, required=True)
    agent_sub.add_parser = lambda name, _add=agent_sub.add_parser, **kw: _add(name, parents=[common], **kw)
    a = agent_sub.add_parser("save")
    with_config(a)
    a.add_argument("path")
    a.add_argument("--algorithm", default="dqn", choices=["dqn", "a2c", "ppo", "uniform"])
    a.add_argument("--steps", type=int, help="training steps before saving (default: run.budget)")
    a.add_argument("--mode", default="full", choices=["full", "clustered"])
    a.add_argument("--repetition", type=int, default=0)
    a.set_defaults(func=cmd_agent_save)
    a = agent_sub.add_parser("load")
    a.add_argument("path")
    a.add_argument("--config", help="evaluate on this config's environment")
    a.add_argument("--seed", type=int)
    a.add_argument("--mode", default="full", choices=["full", "clustered"])
    a.add_argument("--repetition", type=int, default=0)
    a.set_defaults(func=cmd_agent_load)

    sp = sub.add_parser("replot", help="rebuild aggregates and charts from raw.csv")
    sp.add_argument("result_dir")
    sp.set_defaults(func=cmd_replot)

    sp = sub.add_parser("configs", help="list bundled config presets")
    sp.set_defaults(func=cmd_configs)
    return p


def main(argv=None):
    from .config import ConfigError

    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        _emit_error("usage", str(exc))
        return 2
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        parser.print_usage(sys.stderr)
        _emit_error("config", str(exc), exc.key)
        return 2
    except (OSError, ValueError) as exc:
        _emit_error(type(exc).__name__, str(exc))
        return 1


if __name__ == "__main__":
    sys.exit(main())
