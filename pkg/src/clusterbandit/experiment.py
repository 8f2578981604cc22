"""Experiment orchestration: environments x algorithms x modes x seeds, and result files.

Stream labels (all derived from the master seed):

* ``env/<rep>``      seed of the repetition's environment
* ``states/<rep>``   the training state sequence, shared by every algorithm and mode
* ``eval/<rep>``     the frozen evaluation states
* ``cluster/<rep>``  k-means fit samples and initialization
* ``agent/<rep>/<algorithm>/<seed>``  agent seed; full and clustered runs share it

Agents never draw from the state stream.
"""
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
import csv
import hashlib
import io
import json
import logging
import os
from pathlib import Path
import platform
import time

import numpy as np

from . import __version__, kernels
from .agents import AgentConfig, make_agent
from .clustering import ClusteredEnvironment, clusterize_environment
from .config import dump_config
from .env import EnvConfig, build_environment
from .evaluation import make_eval_set
from .rng import derive_seed, derive_stream
from .training import RunResult, train_agent

__all__ = [
    "ExperimentResult", "RAW_HEADER", "AGG_HEADER", "MANIFEST_SCHEMA", "run_experiment", "build_repetition",
    "raw_rows", "aggregate_rows", "emit_results", "replot", "read_raw_csv",
]

log = logging.getLogger(__name__)

RAW_HEADER = ["repetition", "algorithm", "mode", "agent_seed", "step", "mean_R", "min_R", "max_R",
              "n_excluded_states"]
AGG_HEADER = ["algorithm", "mode", "step", "mean_R", "min_R", "max_R", "sd_mean_R", "n_runs",
              "n_excluded_states"]
MANIFEST_SCHEMA = "clusterbandit-manifest/1"
MODE_ORDER = {"full": 0, "clustered": 1}


@dataclass
class ExperimentResult:
    config: object
    runs: list = field(default_factory=list)
    wall_seconds: float = 0.0
    state_digests: dict = field(default_factory=dict)

    def aggregates(self):
        return aggregate_rows(raw_rows(self))


@dataclass
class _Repetition:
    rep: int
    env: object
    clustered: object
    eval_set: object


def env_config_for(cfg, rep):
    return EnvConfig(cfg.d_state, cfg.d_action, cfg.n_actions, cfg.d_latent, list(cfg.r_architecture),
                     derive_seed(cfg.master_seed, f"env/{rep}"), cfg.gaussian_output)


def build_repetition(cfg, rep, shared_model=None):
    env = build_environment(env_config_for(cfg, rep))
    eval_set = make_eval_set(env, derive_stream(cfg.master_seed, f"eval/{rep}"), cfg.eval_size, f"eval/{rep}")
    clustered = None
    if cfg.clustering:
        if shared_model is not None:
            clustered = ClusteredEnvironment(env, shared_model, cfg.mode)
        else:
            clustered = clusterize_environment(env, cfg.n_fit_samples, cfg.k, cfg.mode,
                                               derive_stream(cfg.master_seed, f"cluster/{rep}"),
                                               max_iter=cfg.kmeans_max_iter, tol=cfg.kmeans_tol,
                                               n_restarts=cfg.kmeans_restarts)
    return _Repetition(rep, env, clustered, eval_set)


def _run_one(cfg, repetition, algorithm, mode, seed_index):
    target = repetition.env if mode == "full" else repetition.clustered
    agent_seed = derive_seed(cfg.master_seed, f"agent/{repetition.rep}/{algorithm}/{seed_index}")
    hyper = dict(cfg.hyperparams.get(algorithm, {}))
    agent = make_agent(AgentConfig(algorithm, target.observation_dim, cfg.n_actions, list(cfg.pi_architecture),
                                   agent_seed, cfg.budget, hyper))
    result = RunResult(repetition.rep, algorithm, mode, seed_index)
    state_rng = derive_stream(cfg.master_seed, f"states/{repetition.rep}")
    return train_agent(agent, target, state_rng, cfg.budget, repetition.eval_set, cfg.eval_every,
                       n_eval_draws=cfg.uniform_draws, result=result)


def _run_task(args):
    return _run_one(*args)


def run_experiment(cfg, workers=None, progress=None):
    """Run every (repetition, algorithm, mode, agent seed) combination of ``cfg``.

    Results are collected in a fixed order regardless of ``workers``.
    """
    workers = cfg.workers if workers is None else workers
    start = time.perf_counter()
    result = ExperimentResult(cfg)
    shared = None
    for rep in range(cfg.env_repetitions):
        repetition = build_repetition(cfg, rep, shared)
        if cfg.clustering and not cfg.refit_per_repetition and shared is None:
            shared = repetition.clustered.model
        tasks = [(cfg, repetition, algo, mode, seed)
                 for algo in cfg.algorithms for mode in cfg.modes for seed in range(cfg.agent_seeds)]
        if workers > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                runs = list(pool.map(_run_task, tasks))
        else:
            runs = []
            for task in tasks:
                runs.append(_run_task(task))
                if progress is not None:
                    progress(runs[-1])
        for run in runs:
            result.state_digests.setdefault(rep, set()).add(run.state_digest)
        result.runs.extend(runs)
    result.state_digests = {rep: sorted(d) for rep, d in result.state_digests.items()}
    result.wall_seconds = time.perf_counter() - start
    return result


def _fmt(x):
    return repr(float(x))


def raw_rows(result):
    order = {a: i for i, a in enumerate(result.config.algorithms)}
    runs = sorted(result.runs, key=lambda r: (r.repetition, order[r.algorithm], MODE_ORDER[r.mode], r.agent_seed))
    rows = []
    for run in runs:
        for rec in run.records:
            rows.append({"repetition": run.repetition, "algorithm": run.algorithm, "mode": run.mode,
                         "agent_seed": run.agent_seed, "step": rec.step, "mean_R": rec.mean_R, "min_R": rec.min_R,
                         "max_R": rec.max_R, "n_excluded_states": rec.n_excluded_states})
    return rows


def read_raw_csv(path):
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != RAW_HEADER:
            raise ValueError(f"{path}: header {reader.fieldnames} does not match {RAW_HEADER}")
        rows = []
        for r in reader:
            rows.append({"repetition": int(r["repetition"]), "algorithm": r["algorithm"], "mode": r["mode"],
                         "agent_seed": int(r["agent_seed"]), "step": int(r["step"]), "mean_R": float(r["mean_R"]),
                         "min_R": float(r["min_R"]), "max_R": float(r["max_R"]),
                         "n_excluded_states": int(r["n_excluded_states"])})
    return rows


def aggregate_rows(rows):
    """Mean over repetitions and seeds, grouped by (algorithm, mode, step), in first-seen algorithm order."""
    algo_order = {}
    groups = {}
    for r in rows:
        algo_order.setdefault(r["algorithm"], len(algo_order))
        groups.setdefault((r["algorithm"], r["mode"], r["step"]), []).append(r)
    out = []
    for key in sorted(groups, key=lambda k: (algo_order[k[0]], MODE_ORDER.get(k[1], 9), k[2])):
        g = groups[key]
        means = np.array([r["mean_R"] for r in g])
        out.append({"algorithm": key[0], "mode": key[1], "step": key[2],
                    "mean_R": float(np.mean(means)),
                    "min_R": float(np.mean([r["min_R"] for r in g])),
                    "max_R": float(np.mean([r["max_R"] for r in g])),
                    "sd_mean_R": float(np.std(means)),
                    "n_runs": len(g),
                    "n_excluded_states": int(sum(r["n_excluded_states"] for r in g))})
    return out


def _csv_text(header, rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for r in rows:
        writer.writerow([_fmt(r[h]) if isinstance(r[h], float) else r[h] for h in header])
    return buf.getvalue()


def _atomic_write(path, data):
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    try:
        with open(tmp, "wb") as fh:
            fh.write(data.encode() if isinstance(data, str) else data)
        os.replace(tmp, path)
    finally:
        if tmp.exists():
            tmp.unlink()


def _sha256(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def replot(out_dir):
    """Rebuild ``agg.csv`` and ``curves.svg`` from ``raw.csv`` alone."""
    from .plotting import learning_curves_svg

    out_dir = Path(out_dir)
    rows = read_raw_csv(out_dir / "raw.csv")
    agg = aggregate_rows(rows)
    _atomic_write(out_dir / "agg.csv", _csv_text(AGG_HEADER, agg))
    _atomic_write(out_dir / "curves.svg", learning_curves_svg(agg))
    return agg


def emit_results(result, out_dir):
    """Write ``raw.csv``, ``agg.csv``, ``curves.svg`` and ``manifest.json`` into ``out_dir``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    cfg = result.config
    _atomic_write(out_dir / "raw.csv", _csv_text(RAW_HEADER, raw_rows(result)))
    replot(out_dir)
    _atomic_write(out_dir / "config.ini", dump_config(cfg))
    files = ["raw.csv", "agg.csv", "curves.svg", "config.ini"]
    manifest = {
        "schema": MANIFEST_SCHEMA,
        "name": cfg.name,
        "config_sha256": cfg.digest(),
        "master_seed": cfg.master_seed,
        "version": __version__,
        "kernel_backend": kernels.BACKEND,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "platform": platform.platform(),
        "wall_seconds": round(result.wall_seconds, 3),
        "state_stream_sha256": {str(k): v for k, v in result.state_digests.items()},
        "runs": [{"repetition": r.repetition, "algorithm": r.algorithm, "mode": r.mode, "agent_seed": r.agent_seed,
                  "status": r.status, "n_evaluations": len(r.records), "n_updates": r.n_updates,
                  "wall_seconds": round(r.wall_seconds, 3)} for r in result.runs],
        "files": {name: _sha256(out_dir / name) for name in files},
    }
    _atomic_write(out_dir / "manifest.json", json.dumps(manifest, indent=2) + "\n")
    return [out_dir / name for name in files + ["manifest.json"]]
