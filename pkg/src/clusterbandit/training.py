"""Single training run: one agent, one environment (full or clustered), one state stream."""
from dataclasses import dataclass, field
import hashlib
import logging
import time

import numpy as np

from .agents import Transition
from .env import sample_states
from .evaluation import evaluate_policy
from .nn import NonFiniteError
from .rng import derive_stream

__all__ = ["RunResult", "train_agent"]

log = logging.getLogger(__name__)

STATE_CHUNK = 1024


@dataclass
class RunResult:
    repetition: int
    algorithm: str
    mode: str
    agent_seed: int
    records: list = field(default_factory=list)
    status: str = "ok"
    state_digest: str = ""
    wall_seconds: float = 0.0
    n_updates: int = 0


def train_agent(agent, target, state_rng, budget, eval_set, eval_every, eval_rng=None, act_rng=None,
                update_rng=None, n_eval_draws=100, result=None, on_step=None):
    """Train ``agent`` for ``budget`` interactions and evaluate it every ``eval_every`` steps.

    ``target`` is the environment the agent observes (possibly clustered);
    rewards always come from the true sampled state.  States are drawn from
    ``state_rng`` in fixed-size chunks, which yields the same sequence as
    drawing them one at a time.
    """
    if result is None:
        result = RunResult(0, agent.algorithm, "full", 0)
    seed = agent.config.seed
    act_rng = act_rng if act_rng is not None else derive_stream(seed, "act")
    update_rng = update_rng if update_rng is not None else derive_stream(seed, "update")
    eval_rng = eval_rng if eval_rng is not None else derive_stream(seed, "eval")
    digest = hashlib.sha256()
    start = time.perf_counter()
    t = 0
    try:
        while t < budget:
            n = min(STATE_CHUNK, budget - t)
            states = sample_states(target, state_rng, n)
            digest.update(states.tobytes())
            obs = target.observe(states)
            for i in range(n):
                a = agent.act(obs[i], act_rng, explore=True)
                r = target.reward(states[i], a)
                agent.observe(Transition(obs[i], a, r))
                if agent.ready():
                    agent.update(update_rng)
                t += 1
                if on_step is not None:
                    on_step(t, states[i], a, r)
                if t % eval_every == 0:
                    result.records.append(evaluate_policy(agent, target, eval_set, step=t, rng=eval_rng,
                                                          n_draws=n_eval_draws))
    except (NonFiniteError, FloatingPointError) as exc:
        result.status = f"aborted at step {t}: {exc}"
        log.error("%s/%s/seed %d aborted at step %d: %s", result.algorithm, result.mode, result.agent_seed, t, exc)
    result.state_digest = digest.hexdigest()
    result.wall_seconds = time.perf_counter() - start
    result.n_updates = getattr(agent, "n_updates", 0)
    return result
