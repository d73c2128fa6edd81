"""Unit tests for config.py"""
import pytest

from truewalks.config import (
    EvalConfig,
    PipelineConfig,
    Settings,
    build_pipeline_config,
    load_config_file,
    parse_config_text,
)
from truewalks.core.errors import ConfigError


class TestConfigFiles:
    """Flat key=value files."""

    def test_sections_and_top_level_keys(self):
        data = parse_config_text("# comment\nseed = 3\nwalk.max_walks=20\neval.rf_max_depths=2,none\n")
        assert data == {"seed": 3, "walk": {"max_walks": 20}, "eval": {"rf_max_depths": [2, None]}}

    def test_unknown_key_reports_line(self):
        with pytest.raises(ConfigError, match="line 2"):
            parse_config_text("walk.max_walks=3\nwalk.bogus=1\n", source="run.cfg")

    def test_unknown_section(self):
        with pytest.raises(ConfigError, match="unknown config key"):
            parse_config_text("model.dim=3\n")

    def test_section_name_is_not_a_value(self):
        with pytest.raises(ConfigError):
            parse_config_text("walk=3\n")

    @pytest.mark.parametrize("line", ["walk.seed=5", "synth.seed=1", "eval.workers=4", "embed.workers=2"])
    def test_section_seed_and_workers_are_rejected(self, line):
        """Per-section seeds and workers would be overwritten by the top-level values."""
        with pytest.raises(ConfigError, match="set top-level"):
            parse_config_text(f"seed=2\n{line}\n")

    def test_missing_equals(self):
        with pytest.raises(ConfigError, match="line 1"):
            parse_config_text("walk.max_walks 3\n")

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config_file(tmp_path / "absent.cfg")

    def test_booleans(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("embed.order_aware=true\ndeterministic=False\n")
        assert load_config_file(path) == {"embed": {"order_aware": True}, "deterministic": False}


class TestPrecedence:
    """Defaults < file < environment seed < flags."""

    def test_flags_override_file(self):
        cfg = build_pipeline_config({"seed": 3, "walk": {"max_walks": 20}}, {"seed": 5}, Settings(SEED=9))
        assert cfg.seed == 5
        assert cfg.walk.max_walks == 20

    def test_file_seed_beats_environment(self):
        assert build_pipeline_config({"seed": 3}, {}, Settings(SEED=9)).seed == 3

    def test_environment_seed_fallback(self):
        assert build_pipeline_config({}, {}, Settings(SEED=9)).seed == 9

    def test_defaults(self):
        cfg = build_pipeline_config()
        assert cfg.seed == 0
        assert cfg.walk.max_walks == 100 and cfg.walk.max_depth == 4
        assert cfg.embed.dim == 100 and cfg.embed.window == 5
        assert cfg.eval.mccv_repetitions == 30

    def test_invalid_value(self):
        with pytest.raises(ConfigError, match="walk.max_depth"):
            build_pipeline_config({"walk": {"max_depth": 1}})

    def test_nested_merge_keeps_siblings(self):
        cfg = build_pipeline_config({"embed": {"dim": 16, "window": 3}}, {"embed": {"dim": 32}})
        assert cfg.embed.dim == 32 and cfg.embed.window == 3


class TestPipelineConfig:
    """Cross-section propagation and hashing."""

    def test_seed_reaches_every_stage(self):
        cfg = PipelineConfig(seed=5)
        assert cfg.walk.seed == cfg.embed.seed == cfg.eval.seed == cfg.synth.seed == 5

    def test_workers(self):
        cfg = PipelineConfig(workers=4)
        assert cfg.eval.workers == 4 and cfg.embed.workers == 4

    def test_deterministic_training_is_single_worker(self):
        cfg = PipelineConfig(workers=4, deterministic=True)
        assert cfg.embed.workers == 1
        assert cfg.eval.workers == 4

    def test_config_hash(self):
        assert PipelineConfig(seed=1).config_hash() == PipelineConfig(seed=1).config_hash()
        assert PipelineConfig(seed=1).config_hash() != PipelineConfig(seed=2).config_hash()

    def test_check_inputs(self, tmp_path):
        cfg = PipelineConfig()
        with pytest.raises(ConfigError, match="--ontology"):
            cfg.check_inputs("ontology")
        cfg = PipelineConfig.model_validate({"paths": {"pairs": str(tmp_path / "nope.tsv")}})
        with pytest.raises(ConfigError, match="not found"):
            cfg.check_inputs("pairs")

    def test_comma_separated_baselines(self):
        assert EvalConfig(baselines="positive_only,merged_polarity").baselines == ["positive_only", "merged_polarity"]

    def test_forest_grid_validation(self):
        with pytest.raises(ValueError):
            EvalConfig(rf_estimators=[])


class TestSettings:
    """Environment settings."""

    def test_from_env(self, monkeypatch):
        monkeypatch.setenv("TRUEWALKS_SEED", "42")
        monkeypatch.setenv("TRUEWALKS_LOG_LEVEL", "debug")
        monkeypatch.setenv("TRUEWALKS_LOG_FORMAT", "TEXT")
        monkeypatch.setenv("TRUEWALKS_WORKERS", "0")
        settings = Settings.from_env()
        assert settings.SEED == 42
        assert settings.LOG_LEVEL == "DEBUG"
        assert settings.LOG_FORMAT == "text"
        assert settings.WORKERS == 1

    def test_unset_seed(self, monkeypatch):
        monkeypatch.delenv("TRUEWALKS_SEED", raising=False)
        assert Settings.from_env().SEED is None

    def test_invalid_seed(self, monkeypatch):
        monkeypatch.setenv("TRUEWALKS_SEED", "abc")
        with pytest.raises(ConfigError):
            Settings.from_env()
