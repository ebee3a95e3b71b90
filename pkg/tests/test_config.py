import pytest

from boxte.config import RunConfig
from boxte.errors import ConfigError


def test_defaults_round_trip():
    cfg = RunConfig()
    assert RunConfig.parse(cfg.to_text()) == cfg


def test_parse_and_coerce():
    cfg = RunConfig.parse("# comment\ndim = 8\nbounded=true\nlearning_rate=0.01\nloss=self-adversarial-ns\n")
    assert (cfg.dim, cfg.bounded, cfg.learning_rate, cfg.loss) == (8, True, 0.01, "self-adversarial-ns")
    assert cfg.model_config().dim == 8 and cfg.train_config().learning_rate == 0.01


def test_unknown_and_malformed_keys():
    with pytest.raises(ConfigError):
        RunConfig.parse("dimension=8")
    with pytest.raises(ConfigError):
        RunConfig.parse("dim")
    with pytest.raises(ConfigError):
        RunConfig.parse("dim=eight")
    with pytest.raises(ConfigError):
        RunConfig.parse("dim=1\ndim=2")
    with pytest.raises(ConfigError):
        RunConfig.parse("dim=0")


def test_preset_then_overrides():
    cfg = RunConfig.parse("preset=icews14-bounded\nk=1")
    assert cfg.dim == 154 and cfg.k == 1 and cfg.sizes == (7128, 230, 365)
    with pytest.raises(ConfigError):
        RunConfig.parse("preset=nope")


def test_override_layering():
    base = RunConfig.parse("dim=8\nseed=3")
    cfg = RunConfig.from_mapping({"seed": "4"}, base)
    assert (cfg.dim, cfg.seed) == (8, 4)


def test_require():
    with pytest.raises(ConfigError):
        RunConfig().require("data_dir")
    RunConfig(data_dir="x").require("data_dir")
