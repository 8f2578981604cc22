"""Experiment configuration files.

Grammar: INI-style sections of ``key = value`` lines (``#`` or ``;`` starts a
comment).  Lists are comma separated, booleans are ``true``/``false``.

    [meta]        schema = clusterbandit-config/1, name
    [env]         n_actions, d_state, d_action, d_latent, r_architecture, gaussian_output
    [agents]      algorithms, pi_architecture
    [agents.dqn]  (likewise a2c, ppo) optional hyperparameter overrides
    [clustering]  enabled, k, n_fit_samples, mode, refit_per_repetition, max_iter, tol, n_restarts
    [evaluation]  every, size, uniform_draws
    [run]         budget, agent_seeds, env_repetitions, master_seed, output_dir, workers

Every key is optional except the ``[env]`` dimensions; unknown sections or
keys are rejected with a :class:`ConfigError` naming them.
"""
from dataclasses import dataclass, field, asdict
import configparser
import hashlib
import importlib.resources
import io
import json
from pathlib import Path

from .agents import ALGORITHMS, DEFAULT_HYPERPARAMS
from .clustering import REPRESENTATIONS

__all__ = ["ConfigError", "ExperimentConfig", "load_config", "parse_config", "dump_config", "bundled_configs",
           "CONFIG_SCHEMA"]

CONFIG_SCHEMA = "clusterbandit-config/1"


class ConfigError(ValueError):
    def __init__(self, message, key=None):
        super().__init__(message)
        self.key = key


@dataclass
class ExperimentConfig:
    d_state: int
    d_action: int
    n_actions: int
    d_latent: int
    r_architecture: list
    gaussian_output: bool = False
    algorithms: list = field(default_factory=lambda: ["a2c", "dqn", "ppo"])
    pi_architecture: list = field(default_factory=lambda: [64, 64, 64])
    hyperparams: dict = field(default_factory=dict)
    clustering: bool = True
    k: int = 100
    n_fit_samples: int = 100_000
    mode: str = "centroid"
    refit_per_repetition: bool = True
    kmeans_max_iter: int = 100
    kmeans_tol: float = 1e-6
    kmeans_restarts: int = 1
    eval_every: int = 1_000
    eval_size: int = 512
    uniform_draws: int = 100
    budget: int = 100_000
    agent_seeds: int = 3
    env_repetitions: int = 3
    master_seed: int = 0
    output_dir: str = "results"
    workers: int = 1
    name: str = "experiment"

    def __post_init__(self):
        self.validate()

    def validate(self):
        try:
            self._validate()
        except ConfigError as exc:
            raise ConfigError(str(exc), _KEY_NAMES.get(exc.key, exc.key)) from None

    def _validate(self):
        for key in ("d_state", "d_action", "n_actions", "d_latent", "budget", "agent_seeds", "env_repetitions",
                    "eval_every", "eval_size", "k", "n_fit_samples", "workers", "kmeans_max_iter", "kmeans_restarts",
                    "uniform_draws"):
            if getattr(self, key) <= 0:
                raise ConfigError(f"{key} must be positive, got {getattr(self, key)}", key)
        if self.master_seed < 0:
            raise ConfigError("master_seed must be non-negative", "master_seed")
        if not self.r_architecture or self.r_architecture[-1] != self.d_latent:
            raise ConfigError(f"last r_architecture width must equal d_latent ({self.d_latent})", "r_architecture")
        if any(w <= 0 for w in self.r_architecture + self.pi_architecture):
            raise ConfigError("architecture widths must be positive", "pi_architecture")
        for algo in self.algorithms:
            if algo not in ALGORITHMS:
                raise ConfigError(f"unknown algorithm {algo!r}", "algorithms")
        if len(set(self.algorithms)) != len(self.algorithms) or not self.algorithms:
            raise ConfigError("algorithms must be a non-empty list without repeats", "algorithms")
        if self.mode not in REPRESENTATIONS:
            raise ConfigError(f"mode must be one of {REPRESENTATIONS}", "mode")
        if self.clustering and self.n_fit_samples < self.k:
            raise ConfigError("n_fit_samples must be at least k", "n_fit_samples")
        if self.budget % self.eval_every:
            raise ConfigError("budget must be a multiple of the evaluation cadence", "eval_every")

    @property
    def modes(self):
        return ["full", "clustered"] if self.clustering else ["full"]

    @property
    def eval_steps(self):
        return list(range(self.eval_every, self.budget + 1, self.eval_every))

    def digest(self):
        payload = {k: v for k, v in asdict(self).items() if k not in ("output_dir", "workers")}
        return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()


_INT_LIST = "intlist"
_STR_LIST = "strlist"
# section -> key -> (attribute, type)
_SCHEMA = {
    "meta": {"schema": (None, str), "name": ("name", str)},
    "env": {
        "n_actions": ("n_actions", int), "d_state": ("d_state", int), "d_action": ("d_action", int),
        "d_latent": ("d_latent", int), "r_architecture": ("r_architecture", _INT_LIST),
        "gaussian_output": ("gaussian_output", bool),
    },
    "agents": {"algorithms": ("algorithms", _STR_LIST), "pi_architecture": ("pi_architecture", _INT_LIST)},
    "clustering": {
        "enabled": ("clustering", bool), "k": ("k", int), "n_fit_samples": ("n_fit_samples", int),
        "mode": ("mode", str), "refit_per_repetition": ("refit_per_repetition", bool),
        "max_iter": ("kmeans_max_iter", int), "tol": ("kmeans_tol", float), "n_restarts": ("kmeans_restarts", int),
    },
    "evaluation": {"every": ("eval_every", int), "size": ("eval_size", int), "uniform_draws": ("uniform_draws", int)},
    "run": {
        "budget": ("budget", int), "agent_seeds": ("agent_seeds", int), "env_repetitions": ("env_repetitions", int),
        "master_seed": ("master_seed", int), "output_dir": ("output_dir", str), "workers": ("workers", int),
    },
}
_KEY_NAMES = {attr: f"{sec}.{key}" for sec, keys in _SCHEMA.items() for key, (attr, _) in keys.items() if attr}
_REQUIRED = ("n_actions", "d_state", "d_action", "d_latent", "r_architecture")
_BOOLS = {"true": True, "yes": True, "1": True, "false": False, "no": False, "0": False}


def _convert(raw, kind, where):
    raw = raw.strip()
    try:
        if kind is bool:
            return _BOOLS[raw.lower()]
        if kind is int:
            return int(raw.replace("_", ""))
        if kind is float:
            return float(raw)
        if kind == _INT_LIST:
            return [int(x.replace("_", "")) for x in raw.replace("[", "").replace("]", "").split(",") if x.strip()]
        if kind == _STR_LIST:
            return [x.strip().lower() for x in raw.split(",") if x.strip()]
        return raw
    except (KeyError, ValueError):
        raise ConfigError(f"cannot parse {where} = {raw!r}", where) from None


def _hyper_value(algo, key, raw):
    where = f"agents.{algo}.{key}"
    if key not in DEFAULT_HYPERPARAMS[algo]:
        raise ConfigError(f"unknown key {where!r}", where)
    default = DEFAULT_HYPERPARAMS[algo][key]
    kind = bool if isinstance(default, bool) else int if isinstance(default, int) else float
    return _convert(raw, kind, where)


def parse_config(text, source="<config>"):
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: malformed config: {exc}") from None
    values, hyper = {}, {}
    for section in parser.sections():
        if section.startswith("agents."):
            algo = section.split(".", 1)[1]
            if algo not in DEFAULT_HYPERPARAMS or algo == "uniform":
                raise ConfigError(f"unknown section [{section}]", section)
            hyper[algo] = {k: _hyper_value(algo, k, v) for k, v in parser.items(section)}
            continue
        if section not in _SCHEMA:
            raise ConfigError(f"unknown section [{section}]", section)
        for key, raw in parser.items(section):
            where = f"{section}.{key}"
            if key not in _SCHEMA[section]:
                raise ConfigError(f"unknown key {where!r}", where)
            attr, kind = _SCHEMA[section][key]
            value = _convert(raw, kind, where)
            if attr is None:
                if value != CONFIG_SCHEMA:
                    raise ConfigError(f"unsupported schema {value!r} (expected {CONFIG_SCHEMA})", where)
                continue
            values[attr] = value
    missing = [k for k in _REQUIRED if k not in values]
    if missing:
        raise ConfigError(f"missing required key(s): {', '.join('env.' + m for m in missing)}",
                          "env." + missing[0])
    values["hyperparams"] = hyper
    try:
        return ExperimentConfig(**values)
    except ConfigError as exc:
        raise ConfigError(f"{source}: {exc}", exc.key) from None


def dump_config(cfg):
    """Canonical text form; ``parse_config(dump_config(cfg)) == cfg``."""
    out = io.StringIO()
    out.write(f"[meta]\nschema = {CONFIG_SCHEMA}\nname = {cfg.name}\n")
    for section, keys in _SCHEMA.items():
        if section == "meta":
            continue
        out.write(f"\n[{section}]\n")
        for key, (attr, kind) in keys.items():
            value = getattr(cfg, attr)
            if isinstance(value, bool):
                text = "true" if value else "false"
            elif isinstance(value, list):
                text = ", ".join(str(v) for v in value)
            else:
                text = repr(value) if isinstance(value, float) else str(value)
            out.write(f"{key} = {text}\n")
    for algo in sorted(cfg.hyperparams):
        out.write(f"\n[agents.{algo}]\n")
        for key, value in sorted(cfg.hyperparams[algo].items()):
            out.write(f"{key} = {str(value).lower() if isinstance(value, bool) else value}\n")
    return out.getvalue()


def bundled_configs():
    """Names of the configuration files shipped with the package."""
    root = importlib.resources.files("clusterbandit") / "configs"
    return sorted(p.name[:-4] for p in root.iterdir() if p.name.endswith(".ini"))


def load_config(path_or_name):
    """Load a config from a file path, or by name from the bundled presets (e.g. ``grid01``)."""
    path = Path(path_or_name)
    if path.is_file():
        return parse_config(path.read_text(), str(path))
    name = str(path_or_name)
    name = name[:-4] if name.endswith(".ini") else name
    if name in bundled_configs():
        res = importlib.resources.files("clusterbandit") / "configs" / f"{name}.ini"
        return parse_config(res.read_text(), f"<bundled:{name}>")
    raise ConfigError(f"config {path_or_name!r} is neither a file nor a bundled preset")
