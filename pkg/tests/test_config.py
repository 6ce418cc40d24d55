import json

import pytest

from aquasweep.adaquant import QuantizationConfig
from aquasweep.camgeo import AugmentationSpec
from aquasweep.config import RunConfig
from aquasweep.errors import ConfigError
from aquasweep.objective import LossWeights


def test_defaults():
    cfg = RunConfig()
    assert cfg.quantization == QuantizationConfig(33, 0.01, 0.3)
    assert cfg.weights == LossWeights(0.1, 0.1, 0.01)
    assert (cfg.gamma, cfg.tau, cfg.eq8_literal, cfg.optimizer) == (0.03, 0.5, False, "adam")
    assert cfg.offsets == ((0.0, 0.0), (0.5, 0.0), (-0.5, 0.0), (0.0, -0.25))


def test_round_trip(tmp_path):
    cfg = RunConfig(quantization=QuantizationConfig(9, 0.02, 0.25), weights=LossWeights(0.2, 0.0, 0.05),
                    augmentation=AugmentationSpec(0.75, (1, 2, 40, 30), "inverse"), gamma=0.05, tau=0.3,
                    offsets=((0.0, 0.0), (0.25, 0.1)), eq8_literal=True, seed=7, steps=10, lr=0.01,
                    lr_decay=0.5, optimizer="gd")
    (tmp_path / "c.json").write_text(cfg.dumps())
    again = RunConfig.load(tmp_path / "c.json")
    assert again == cfg
    assert again.dumps() == cfg.dumps()
    assert json.loads(cfg.dumps())["offsets"] == {"u": [0.0, 0.25], "v": [0.0, 0.1]}


def test_partial_json_uses_defaults():
    assert RunConfig.from_json({"seed": 3}) == RunConfig(seed=3)


@pytest.mark.parametrize("obj", [
    {"bogus": 1},
    {"gamma": 0.0},
    {"tau": 1.5},
    {"offsets": {"u": [0.0], "v": [0.0]}},
    {"offsets": {"u": [0.0, 1.0], "v": [0.0]}},
    {"optimizer": "sgd"},
    {"lr_decay": 0.0},
    {"quantization": {"levels": 1}},
    {"weights": {"alpha_ds": -1}},
    {"steps": "many"},
])
def test_rejects_bad_values(obj):
    with pytest.raises(ConfigError):
        RunConfig.from_json(obj)


def test_invalid_json_file(tmp_path):
    (tmp_path / "c.json").write_text("{not json")
    with pytest.raises(ConfigError):
        RunConfig.load(tmp_path / "c.json")
