"""Tests for experiment configuration."""

import json

import pytest

from rlunlearn.config import (
    ExperimentConfig,
    RewardConfig,
    TrainingMode,
    config_schema,
    load_config,
    parse_config,
)
from rlunlearn.errors import ConfigError


def test_default_hyperparameters():
    cfg = ExperimentConfig()
    assert cfg.rewards.lambda1 == 0.3
    assert cfg.rewards.lambda2 == 0.5
    assert cfg.train.beta == 0.01
    assert cfg.train.group_size == 5
    assert cfg.train.clip_eps == 0.2
    assert cfg.train.adv_eps == 1e-6
    assert cfg.evaluation.temperature == 0.2


def test_unknown_key_is_named():
    with pytest.raises(ConfigError, match="train.colour"):
        parse_config({"train": {"colour": "red"}})


def test_invalid_value_is_named():
    with pytest.raises(ConfigError, match="train.clip_eps"):
        parse_config({"train": {"clip_eps": 1.5}})


def test_template_length_must_match_policy_length():
    with pytest.raises(ConfigError, match="length"):
        parse_config({"policy": {"length": 3}})


def test_full_history_limited_to_short_sequences():
    with pytest.raises(ConfigError, match="length <= 3"):
        parse_config({"policy": {"history": "full", "length": 4}})


def test_subprocess_judge_needs_command():
    with pytest.raises(ConfigError, match="judge_command"):
        parse_config({"evaluation": {"judge": "subprocess"}})


def test_load_config_applies_overrides(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"seed": 3, "train": {"iterations": 7}}))
    cfg = load_config(path, seed=9, **{"train.mode": "penalty-only", "output_dir": None})
    assert cfg.seed == 9
    assert cfg.train.iterations == 7
    assert cfg.train.mode == TrainingMode.PENALTY_ONLY


def test_load_config_rejects_non_object(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text("[1, 2]")
    with pytest.raises(ConfigError, match="JSON object"):
        load_config(path)


def test_load_config_rejects_bad_json(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text("{not json")
    with pytest.raises(ConfigError, match="not valid JSON"):
        load_config(path)


@pytest.mark.parametrize(
    "mode, lambda1, lambda2",
    [
        (TrainingMode.COMPOSITE, 0.3, 0.5),
        (TrainingMode.PENALTY_ONLY, 0.3, 0.0),
        (TrainingMode.NO_PENALTY, 0.0, 0.5),
        (TrainingMode.NO_RETAIN, 0.3, 0.5),
    ],
)
def test_effective_rewards(mode, lambda1, lambda2):
    cfg = parse_config({"train": {"mode": mode.value}})
    rewards = cfg.effective_rewards()
    assert isinstance(rewards, RewardConfig)
    assert (rewards.lambda1, rewards.lambda2) == (lambda1, lambda2)


def test_digest_ignores_output_location():
    a = parse_config({"output_dir": "runs/a", "concurrency": 1})
    b = parse_config({"output_dir": "runs/b", "concurrency": 4})
    assert a.digest() == b.digest()
    assert a.digest() != parse_config({"seed": 1}).digest()


def test_concurrency_env_fallback(monkeypatch):
    monkeypatch.setenv("RLUNLEARN_CONCURRENCY", "3")
    assert ExperimentConfig().resolved_concurrency() == 3
    assert parse_config({"concurrency": 2}).resolved_concurrency() == 2


def test_schema_lists_sections():
    schema = config_schema()
    assert schema["additionalProperties"] is False
    for section in ("environment", "policy", "coldstart", "rewards", "train", "lemma"):
        assert section in schema["properties"]


def test_shipped_configs_validate():
    """Every config under configs/ parses."""
    from pathlib import Path

    root = Path(__file__).resolve().parent.parent / "configs"
    for path in sorted(root.glob("*.json")):
        load_config(path)


def test_missing_config_file_is_a_config_error(tmp_path):
    with pytest.raises(ConfigError, match="does not exist"):
        load_config(tmp_path / "absent.json")
