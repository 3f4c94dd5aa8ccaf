import json

import pytest

from reprogait.config import (
    ExperimentConfig,
    config_from_dict,
    load_config,
    validate_config,
)
from reprogait.errors import ConfigError


class TestDefaults:
    def test_defaults_encode_chosen_hyperparameters(self):
        cfg = ExperimentConfig()
        assert cfg.template.m == 0  # matched sequence length 2m+1 = 1
        assert cfg.template.n_neighbors == 5
        assert cfg.template.weighting == "linear"
        assert cfg.refurbish.alpha == 1.0
        assert cfg.refurbish.beta == 20.0

    def test_defaults_validate(self):
        validate_config(ExperimentConfig())

    def test_desk_scale_structure(self):
        cfg = ExperimentConfig()
        assert cfg.data.n_able == 10
        assert cfg.data.n_amputee == 3
        assert len(cfg.data.tasks) == 3


class TestParsing:
    def test_round_trip_through_json(self):
        cfg = ExperimentConfig()
        cfg.seed = 123
        cfg.data.n_able = 5
        doc = json.loads(json.dumps(cfg.to_dict()))
        parsed = config_from_dict(doc)
        assert parsed.seed == 123
        assert parsed.data.n_able == 5
        assert parsed.to_dict() == cfg.to_dict()

    def test_partial_document_gets_defaults(self):
        parsed = config_from_dict({"seed": 5, "template": {"m": 1}})
        assert parsed.seed == 5
        assert parsed.template.m == 1
        assert parsed.template.n_neighbors == 5

    def test_unknown_top_level_field(self):
        with pytest.raises(ConfigError, match="unknown config field bogus"):
            config_from_dict({"bogus": 1})

    def test_unknown_section_field_named(self):
        with pytest.raises(ConfigError, match="template.bogus"):
            config_from_dict({"template": {"bogus": 1}})

    def test_type_errors_name_the_field(self):
        with pytest.raises(ConfigError, match="data.n_able"):
            config_from_dict({"data": {"n_able": "ten"}})
        with pytest.raises(ConfigError, match="seed"):
            config_from_dict({"seed": 1.5})

    def test_load_config_file(self, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps({"seed": 9}))
        assert load_config(path).seed == 9

    def test_invalid_json_file(self, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text("{oops")
        with pytest.raises(ConfigError, match="invalid JSON"):
            load_config(path)


class TestValidation:
    @pytest.mark.parametrize("mutate,field", [
        (lambda c: setattr(c.data, "n_able", 0), "data.n_able"),
        (lambda c: setattr(c.data, "tasks", []), "data.tasks"),
        (lambda c: setattr(c.data, "amputee_task", 99), "data.amputee_task"),
        (lambda c: setattr(c.data, "noise_std", -1.0), "data.noise_std"),
        (lambda c: setattr(c.data, "dropout_channels", [99]), "data.dropout_channels"),
        (lambda c: setattr(c.window, "stride", 0), "window.stride"),
        (lambda c: setattr(c.foundation, "learning_rate", 0.0),
         "foundation.learning_rate"),
        (lambda c: setattr(c.template, "epsilon", 0.0), "template.epsilon"),
        (lambda c: setattr(c.template, "weighting", "cubic"), "template.weighting"),
        (lambda c: setattr(c.refurbish, "alpha", -0.5), "refurbish.alpha"),
        (lambda c: setattr(c.eval, "ratios", [0.5, 0.1]), "eval.ratios"),
        (lambda c: setattr(c.eval, "ratios", [1.5]), "eval.ratios"),
        (lambda c: setattr(c.eval, "strategies", ["magic"]), "eval.strategies"),
    ])
    def test_violations_name_the_field(self, mutate, field):
        cfg = ExperimentConfig()
        mutate(cfg)
        with pytest.raises(ConfigError, match=field.replace(".", r"\.")):
            validate_config(cfg)

    def test_alpha_beta_both_zero(self):
        cfg = ExperimentConfig()
        cfg.refurbish.alpha = 0.0
        cfg.refurbish.beta = 0.0
        with pytest.raises(ConfigError, match="alpha"):
            validate_config(cfg)
