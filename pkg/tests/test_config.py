import pytest

from influence_tomograph.config import ConfigError, PRESETS, load_config, parse_override


class TestPresets:
    def test_french_election_values(self):
        config = load_config(preset="french-election")
        assert config.window.length_days == 20
        assert config.window.shift_days == 1
        assert config.window.lag_days == 5
        assert config.discovery.min_correlation == 0.7
        assert config.window.lag_windows == 5

    def test_philippine_values(self):
        config = load_config(preset="philippine")
        assert (config.window.length_days, config.window.shift_days, config.window.lag_days) == (20, 2, 5)
        assert config.discovery.min_correlation == 0.5
        assert config.window.lag_windows == 2

    def test_russophobia_values(self):
        config = load_config(preset="russophobia")
        assert (config.window.length_days, config.window.shift_days, config.window.lag_days) == (20, 2, 5)
        assert config.discovery.min_correlation == 0.4

    def test_unknown_preset(self):
        with pytest.raises(ConfigError, match="unknown preset"):
            load_config(preset="bogus")

    def test_all_presets_validate(self):
        for name in PRESETS:
            load_config(preset=name)


class TestValidation:
    def test_shift_larger_than_window_rejected(self):
        with pytest.raises(ConfigError, match="window.length_days"):
            load_config(overrides=["window.length_days=2", "window.shift_days=5"])

    def test_lag_smaller_than_shift_rejected(self):
        with pytest.raises(ConfigError, match="window.lag_days"):
            load_config(overrides=["window.shift_days=3", "window.lag_days=2", "window.length_days=10"])

    def test_shift_below_one_rejected(self):
        with pytest.raises(ConfigError, match="window.shift_days"):
            load_config(overrides=["window.shift_days=0"])

    def test_correlation_out_of_range_rejected(self):
        with pytest.raises(ConfigError, match="discovery.min_correlation"):
            load_config(overrides=["discovery.min_correlation=1.5"])
        with pytest.raises(ConfigError, match="discovery.min_correlation"):
            load_config(overrides=["discovery.min_correlation=0"])

    def test_cleaning_thresholds_validated(self):
        with pytest.raises(ConfigError, match="cleaning.add_threshold"):
            load_config(overrides=["cleaning.add_threshold=2"])

    def test_latent_dim_bounds(self):
        with pytest.raises(ConfigError, match="embedding.latent_dim"):
            load_config(overrides=["embedding.latent_dim=1"])
        with pytest.raises(ConfigError, match="embedding.latent_dim"):
            load_config(overrides=["embedding.latent_dim=9"])

    def test_date_range_order(self):
        with pytest.raises(ConfigError, match="date_range"):
            load_config(overrides=["date_range.start=2022-05-01", "date_range.end=2022-04-01"])

    def test_bad_yaml_file(self, tmp_path):
        path = tmp_path / "conf.yaml"
        path.write_text("a: [unclosed")
        with pytest.raises(ConfigError, match="YAML"):
            load_config(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="not found"):
            load_config(tmp_path / "nope.yaml")


class TestPrecedence:
    def test_flags_beat_file_beat_preset(self, tmp_path):
        path = tmp_path / "conf.yaml"
        path.write_text("discovery:\n  min_correlation: 0.55\nseed: 3\n")
        config = load_config(
            path, preset="french-election", overrides=["discovery.min_correlation=0.6"]
        )
        assert config.discovery.min_correlation == 0.6
        assert config.seed == 3
        assert config.window.length_days == 20  # from preset, untouched by file/flags

    def test_seed_flag_wins(self, tmp_path):
        path = tmp_path / "conf.yaml"
        path.write_text("seed: 3\n")
        config = load_config(path, seed=42)
        assert config.seed == 42

    def test_override_parses_yaml_scalars(self):
        keys, value = parse_override("discovery.use_absolute=true")
        assert keys == ["discovery", "use_absolute"]
        assert value is True

    def test_override_requires_equals(self):
        with pytest.raises(ConfigError):
            parse_override("discovery.min_correlation")

    def test_canonical_json_stable_and_carries_lag_windows(self):
        c1 = load_config(preset="russophobia")
        c2 = load_config(preset="russophobia")
        assert c1.canonical_json() == c2.canonical_json()
        assert c1.canonical_dict()["derived"]["lag_windows"] == 2
