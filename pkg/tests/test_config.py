"""
Tests for configuration profiles and the run-config loader.
"""

import pytest

from dabformer.config import config as profiles
from dabformer.config.loader import load_run_config, parse_config_text, parse_value, set_dotted
from dabformer.utils.exceptions import ConfigError


def write(tmp_path, text):
    path = tmp_path / "run.cfg"
    path.write_text(text)
    return path


class TestParsing:
    """Flat ``key = value`` grammar."""

    @pytest.mark.parametrize(
        "raw,expected",
        [
            ("3", 3),
            ("-2", -2),
            ("2e-4", 2e-4),
            ("True", True),
            ("0.2-0.3", (0.2, 0.3)),
            ("1,2,3", [1, 2, 3]),
            ("2,", [2]),
            ("l1,edge", ["l1", "edge"]),
            ("fixed:2", "fixed:2"),
        ],
    )
    def test_values(self, raw, expected):
        assert parse_value(raw) == expected

    def test_comments_and_line_numbers(self):
        entries = parse_config_text("# header\n\nseed = 5  # trailing\nmodel.q_path = dwt\n")
        assert entries == {"seed": (5, 3), "model.q_path": ("dwt", 4)}

    @pytest.mark.parametrize(
        "text,line,match",
        [
            ("seed = 1\nnonsense\n", 2, "key = value"),
            ("seed = 1\n9lives = 2\n", 2, "invalid key"),
            ("seed =\n", 1, "missing value"),
            ("seed = 1\n\nseed = 2\n", 3, "duplicate"),
        ],
    )
    def test_errors_carry_line(self, text, line, match):
        with pytest.raises(ConfigError, match=match) as info:
            parse_config_text(text)
        assert info.value.line == line
        assert str(info.value).startswith(f"line {line}:")

    def test_set_dotted_refuses_scalar_section(self):
        tree = {"model": 3}
        with pytest.raises(ConfigError):
            set_dotted(tree, "model.q_path", "dwt")


class TestLoader:
    """Precedence and validation of the merged configuration."""

    def test_profile_defaults(self):
        run = load_run_config(profile="testing", environ={})
        assert run.model.base_channels == 4
        assert run.schedule.iterations == 4

    def test_file_overrides_profile(self, tmp_path):
        path = write(tmp_path, "model.base_channels = 8\nbatch_size = 3\n")
        run = load_run_config(path, profile="testing", environ={})
        assert run.model.base_channels == 8
        assert run.batch_size == 3

    def test_flags_override_file(self, tmp_path):
        path = write(tmp_path, "batch_size = 3\n")
        run = load_run_config(path, {"batch_size": 5, "seed": None}, profile="testing", environ={})
        assert run.batch_size == 5

    def test_environment_seed_wins(self, tmp_path):
        path = write(tmp_path, "seed = 3\n")
        run = load_run_config(path, {"seed": 4}, profile="testing", environ={"DABFORMER_SEED": "11"})
        assert run.seed == 11

    def test_bad_environment_seed(self):
        with pytest.raises(ConfigError, match="DABFORMER_SEED"):
            load_run_config(profile="testing", environ={"DABFORMER_SEED": "eleven"})

    def test_profile_from_environment(self):
        run = load_run_config(environ={"DABFORMER_ENV": "testing"})
        assert run.model.base_channels == 4

    def test_unknown_profile(self):
        with pytest.raises(ConfigError, match="unknown profile"):
            load_run_config(profile="cloud", environ={})

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="not found"):
            load_run_config(tmp_path / "absent.cfg", environ={})

    def test_validation_error_points_at_line(self, tmp_path):
        path = write(tmp_path, "seed = 1\nmodel.q_path = spectral\n")
        with pytest.raises(ConfigError, match="q_path") as info:
            load_run_config(path, profile="testing", environ={})
        assert info.value.line == 2

    def test_model_level_error_points_at_section(self, tmp_path):
        path = write(tmp_path, "seed = 1\nmodel.heads = 1,3,4,8\n")
        with pytest.raises(ConfigError, match="divisible") as info:
            load_run_config(path, profile="testing", environ={})
        assert info.value.line == 2

    def test_loss_terms_and_bands(self, tmp_path):
        path = write(tmp_path, "loss_terms = l1,edge\neval_bands = 0.2-0.3,0.5-0.6\n")
        run = load_run_config(path, profile="testing", environ={})
        assert run.loss_terms == ["l1", "edge"]
        assert run.eval_bands == [(0.2, 0.3), (0.5, 0.6)]

    def test_unknown_loss_term(self):
        with pytest.raises(ConfigError):
            load_run_config(overrides={"loss_terms": ["l2"]}, profile="testing", environ={})


class TestProfiles:
    def test_registered_profiles(self):
        assert set(profiles) == {"desk", "full", "testing", "default"}
        assert profiles["default"] is profiles["desk"]

    def test_full_scale_defaults(self):
        run = load_run_config(profile="full", environ={})
        assert run.model.base_channels == 48
        assert run.optimizer.lr == 2e-4
        assert run.schedule.lr_min == 1e-6
        assert run.schedule.iterations == 1400000

    def test_testing_profile_is_quiet(self):
        assert profiles["testing"].LOG_LEVEL == "ERROR"
        assert profiles["testing"].PROGRESS is False
