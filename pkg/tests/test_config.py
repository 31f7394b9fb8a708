"""Pipeline configuration parsing and validation tests."""

import json

import pytest

from panorad.config import PipelineConfig, config_from_dict, load_config, save_config
from panorad.errors import ConfigError


class TestDefaults:
    def test_default_values(self):
        cfg = PipelineConfig()
        assert cfg.descriptor == "sift"
        assert cfg.input_size == 128
        assert cfg.dictionary_m == 200
        assert cfg.pyramid_levels == 2
        assert cfg.classifier == "ecoc_svm"
        assert cfg.sample_count == 20000
        assert cfg.llc_knn == 5
        assert cfg.knn_k == 5
        assert cfg.svm_c == 10.0
        assert cfg.svm_kernel == "linear"
        assert cfg.epochs == 30
        assert cfg.batch_size == 32
        assert cfg.optimizer == "adadelta"
        assert cfg.augment == "none"
        assert cfg.width_scale == 1.0
        assert cfg.threads == 1
        assert cfg.seed == 0

    def test_empty_dict_gives_defaults(self):
        assert config_from_dict({}) == PipelineConfig()

    def test_sex_task_defaults_to_larger_input(self):
        assert config_from_dict({}, task="sex").input_size == 640
        assert config_from_dict({"input_size": 96}, task="sex").input_size == 96
        assert config_from_dict({}, task="teeth").input_size == 128


class TestValidation:
    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigError, match="unknown"):
            config_from_dict({"descriptr": "sift"})

    def test_bad_descriptor(self):
        with pytest.raises(ConfigError):
            config_from_dict({"descriptor": "surf"})

    def test_bad_classifier(self):
        with pytest.raises(ConfigError):
            config_from_dict({"classifier": "forest"})

    def test_bad_kernel(self):
        with pytest.raises(ConfigError):
            config_from_dict({"svm_kernel": "poly"})

    def test_bad_optimizer(self):
        with pytest.raises(ConfigError):
            config_from_dict({"optimizer": "sgd"})

    def test_bad_augment(self):
        with pytest.raises(ConfigError):
            config_from_dict({"augment": "rotate"})

    def test_pyramid_range(self):
        assert config_from_dict({"pyramid_levels": 0}).pyramid_levels == 0
        with pytest.raises(ConfigError):
            config_from_dict({"pyramid_levels": 5})

    def test_positive_ints(self):
        for key in ("dictionary_m", "epochs", "batch_size", "llc_knn", "knn_k", "threads"):
            with pytest.raises(ConfigError):
                config_from_dict({key: 0})

    def test_input_size_minimum(self):
        with pytest.raises(ConfigError):
            config_from_dict({"input_size": 4})

    def test_bool_not_accepted_as_int(self):
        with pytest.raises(ConfigError):
            config_from_dict({"epochs": True})

    def test_negative_seed(self):
        with pytest.raises(ConfigError):
            config_from_dict({"seed": -1})

    def test_positive_floats(self):
        for key in ("kmeans_tol", "llc_beta", "svm_c", "width_scale"):
            with pytest.raises(ConfigError):
                config_from_dict({key: 0.0})

    def test_gamma_may_be_zero(self):
        assert config_from_dict({"svm_gamma": 0.0}).svm_gamma == 0.0
        with pytest.raises(ConfigError):
            config_from_dict({"svm_gamma": -1.0})

    def test_int_coerces_to_float_fields(self):
        cfg = config_from_dict({"svm_c": 3, "width_scale": 1})
        assert cfg.svm_c == 3.0
        assert isinstance(cfg.svm_c, float)
        assert cfg.width_scale == 1.0

    def test_non_dict_rejected(self):
        with pytest.raises(ConfigError):
            config_from_dict([1, 2])


class TestFiles:
    def test_save_load_round_trip(self, tmp_path):
        cfg = PipelineConfig(descriptor="hog2x2", dictionary_m=500, epochs=7)
        path = tmp_path / "cfg.json"
        save_config(cfg, path)
        assert load_config(path) == cfg

    def test_saved_form_is_json(self, tmp_path):
        path = tmp_path / "cfg.json"
        save_config(PipelineConfig(), path)
        data = json.loads(path.read_text())
        assert data["descriptor"] == "sift"

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(tmp_path / "none.json")

    def test_malformed_json(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{broken")
        with pytest.raises(ConfigError):
            load_config(path)
