import pytest

from clusterbandit.config import ConfigError, ExperimentConfig, bundled_configs, dump_config, load_config, parse_config

MINIMAL = """
[env]
n_actions = 4
d_state = 3
d_action = 3
d_latent = 2
r_architecture = 2
"""


def test_minimal_config_uses_defaults():
    cfg = parse_config(MINIMAL)
    assert cfg.algorithms == ["a2c", "dqn", "ppo"]
    assert cfg.k == 100 and cfg.n_fit_samples == 100_000 and cfg.mode == "centroid"
    assert cfg.budget == 100_000 and cfg.agent_seeds == 3 and cfg.env_repetitions == 3
    assert cfg.eval_every == 1000 and cfg.eval_size == 512
    assert cfg.modes == ["full", "clustered"]


@pytest.mark.parametrize("name", bundled_configs())
def test_bundled_presets_round_trip(name):
    cfg = load_config(name)
    again = parse_config(dump_config(cfg))
    assert again == cfg
    assert again.digest() == cfg.digest()


def test_grid_presets_cover_every_combination():
    grid = [load_config(f"grid{i:02d}") for i in range(1, 13)]
    combos = {(c.d_state, c.d_latent, tuple(c.pi_architecture)) for c in grid}
    assert len(combos) == 12
    for c in grid:
        assert c.d_state == c.d_action == c.n_actions
        assert c.r_architecture == [c.d_latent] * 3
        assert c.budget == 100_000 and c.agent_seeds == 3 and c.env_repetitions == 3
        assert c.hyperparams["ppo"]["n_steps"] == 2048


@pytest.mark.parametrize("text,key", [
    (MINIMAL.replace("d_state", "d_sate"), "env.d_sate"),
    (MINIMAL + "\n[run]\nbudget = lots\n", "run.budget"),
    (MINIMAL + "\n[run]\nbudget = 1500\n", "evaluation.every"),
    (MINIMAL + "\n[clustering]\nmode = fuzzy\n", "clustering.mode"),
    (MINIMAL + "\n[agents]\nalgorithms = dqn, sarsa\n", "agents.algorithms"),
    (MINIMAL + "\n[agents.dqn]\nclip_range = 0.1\n", "agents.dqn.clip_range"),
    (MINIMAL + "\n[extras]\nfoo = 1\n", "extras"),
    (MINIMAL.replace("r_architecture = 2", "r_architecture = 2, 3"), "env.r_architecture"),
    (MINIMAL + "\n[meta]\nschema = other/9\n", "meta.schema"),
    (MINIMAL.replace("n_actions = 4", "n_actions = 0"), "env.n_actions"),
    (MINIMAL.replace("d_latent = 2\n", ""), "env.d_latent"),
])
def test_errors_name_the_offending_key(text, key):
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    assert info.value.key == key


def test_hyperparameter_overrides_are_typed():
    cfg = parse_config(MINIMAL + "\n[agents.ppo]\nn_steps = 64\nnormalize_advantage = false\nclip_range = 0.1\n")
    hp = cfg.hyperparams["ppo"]
    assert hp == {"n_steps": 64, "normalize_advantage": False, "clip_range": 0.1}


def test_unknown_preset():
    with pytest.raises(ConfigError):
        load_config("no_such_preset")


def test_direct_construction_validates():
    with pytest.raises(ConfigError):
        ExperimentConfig(3, 3, 4, 2, [2], k=10, n_fit_samples=5)
