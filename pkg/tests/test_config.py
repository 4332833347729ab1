import json

import pytest

from tvoed import config
from tvoed.config import ConfigError, ExperimentConfig, load_config, save_config
from tvoed.projector import ConeSpace, ParallelSpace


@pytest.mark.parametrize("name", sorted(config.PRESETS))
def test_presets_roundtrip(name, tmp_path):
    cfg = config.PRESETS[name]()
    back = load_config(save_config(cfg, tmp_path / "c.json"))
    assert back == cfg


def test_preset_values():
    t1 = config.PRESETS["test1"]()
    assert (t1.N, t1.N_coarse, t1.K, t1.sigma) == (100, 31, 16, 1e-3)
    assert t1.design == ParallelSpace(width=0.25)
    assert (t1.prior.T, t1.prior.gamma, t1.tau) == (1e-6, 1e-2, 1e-4)
    t3d = config.PRESETS["test3d"]()
    assert isinstance(t3d.design, ConeSpace) and t3d.K == 40


def test_validation_errors(tmp_path):
    with pytest.raises(ConfigError):
        ExperimentConfig(mode="bogus")
    with pytest.raises(ConfigError):
        ExperimentConfig(N=10, N_coarse=20)
    with pytest.raises(ConfigError):
        ExperimentConfig(sigma=0)
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"N": 10, "bogus": 1})
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"phantom": {"kind": "balls_cuboid_3d"},
                                    "design": {"type": "parallel"}})
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ConfigError):
        load_config(bad)


def test_from_dict_defaults_design_by_dimension():
    cfg = ExperimentConfig.from_dict({"phantom": {"kind": "balls_cuboid_3d"}, "N": 20,
                                      "N_coarse": 10})
    assert isinstance(cfg.design, ConeSpace)
    assert json.loads(json.dumps(cfg.to_dict()))["design"]["type"] == "cone"
