import pytest
from hypothesis import given, settings, strategies as st

from grimlab.config import (ConfigError, ExperimentConfig, apply_overrides, format_config, load_config,
                            parse_config_text)


def test_defaults_validate():
    cfg = ExperimentConfig().validate()
    assert (cfg.T, cfg.l, cfg.d, cfg.goals_per_epoch, cfg.episode_length) == (5.0, 50, 8, 10, 50)


@pytest.mark.parametrize("kw", [
    dict(alpha=0.5), dict(alpha=-1.5), dict(strategy="greedy"), dict(cluster_sampling="random"),
    dict(n_epochs=0), dict(goals_per_epoch=0), dict(start_exploration=11, n_epochs=10),
    dict(T=0.0), dict(candidate_ks=()), dict(candidate_ks=(0, 2)), dict(d=1000),
])
def test_invalid_configs_are_rejected(kw):
    with pytest.raises(ConfigError):
        ExperimentConfig(**kw).validate()


def test_parse_text_with_comments_and_types():
    cfg = parse_config_text("""
        # a comment
        strategy = skewfit
        alpha = -0.25   # trailing
        wrap_grimgep = true
        candidate_ks = 1, 3, 5
        n_epochs = 20
    """)
    assert cfg.strategy == "skewfit" and cfg.alpha == -0.25 and cfg.wrap_grimgep is True
    assert cfg.candidate_ks == (1, 3, 5) and cfg.n_epochs == 20


@pytest.mark.parametrize("text", ["nonsense = 3", "n_epochs = many", "wrap_grimgep = maybe", "just words"])
def test_parse_errors(text):
    with pytest.raises(ConfigError):
        parse_config_text(text)


def test_overrides_apply_and_validate():
    cfg = apply_overrides(ExperimentConfig(), ["alpha=-0.5", "n_epochs=3", "start_exploration=1"])
    assert cfg.alpha == -0.5 and cfg.n_epochs == 3
    with pytest.raises(ConfigError):
        apply_overrides(ExperimentConfig(), ["alpha=2"])
    with pytest.raises(ConfigError):
        apply_overrides(ExperimentConfig(), ["alpha"])


def test_format_round_trip(tmp_path):
    cfg = ExperimentConfig(strategy="skewfit", alpha=-0.25, wrap_grimgep=True, label="x", seed=4)
    path = tmp_path / "c.txt"
    path.write_text(format_config(cfg))
    assert load_config(path) == cfg


def test_fingerprint_ignores_seed_and_label():
    a = ExperimentConfig(seed=1, label="a")
    assert a.fingerprint() == ExperimentConfig(seed=2).fingerprint()
    assert a.fingerprint() != ExperimentConfig(alpha=-0.5).fingerprint()


@settings(max_examples=50)
@given(st.sampled_from(["uniform", "countbased", "skewfit"]), st.booleans(),
       st.sampled_from(["alp", "uniform-ablation"]), st.floats(-1, 0))
def test_names_are_distinct_per_fingerprint(strategy, wrap, mode, alpha):
    cfg = ExperimentConfig(strategy=strategy, wrap_grimgep=wrap, cluster_sampling=mode, alpha=alpha)
    name = cfg.name()
    assert name.startswith("GRIM-") == wrap
    if wrap:
        assert ("UNI" in name) == (mode == "uniform-ablation")
