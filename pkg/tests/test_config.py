"""Tests for configuration management."""

import math

import pytest
from pydantic import ValidationError

from cellfree_sim.config import (
    DlPowerMode,
    LosMode,
    Scheme,
    SimConfig,
    UnknownLinkWeight,
    dump_config,
    field_names,
    load_config,
)


class TestSimConfig:
    """Test the scenario model."""

    def test_defaults(self):
        """Test documented default values."""
        config = SimConfig()
        assert config.area_side == 225
        assert config.coherence_block == 200
        assert config.angular_spread == pytest.approx(math.pi / 8)
        assert config.max_cluster_size == 10
        assert config.snr_threshold == 1.0
        assert config.noise_psd_dbm == -96
        assert config.carrier_freq_ghz == 3.7
        assert config.dl_power_mode is DlPowerMode.BALANCED
        assert config.los_mode is LosMode.RANDOM
        assert config.ru_power_dbm is None
        assert config.unknown_link_weight is UnknownLinkWeight.CLUSTER_SIZE

    def test_environment_override(self, monkeypatch):
        """Test that CELLFREE_* variables change the defaults."""
        monkeypatch.setenv("CELLFREE_NUM_RUS", "20")
        monkeypatch.setenv("CELLFREE_LOS_MODE", "nlos")
        monkeypatch.setenv("CELLFREE_UNKNOWN_LINK_WEIGHT", "block_norm")
        config = SimConfig()
        assert config.num_rus == 20
        assert config.los_mode is LosMode.NLOS
        assert config.unknown_link_weight is UnknownLinkWeight.BLOCK_NORM

    def test_pilot_dim_exceeds_coherence_block(self):
        """Test τ_p ≤ T."""
        with pytest.raises(ValidationError, match="pilot dim exceeds coherence block"):
            SimConfig(pilot_dim=300, coherence_block=200)

    def test_pilot_dim_equal_to_coherence_block(self):
        """Test the boundary τ_p = T is allowed."""
        assert SimConfig(pilot_dim=200, coherence_block=200).pilot_dim == 200

    @pytest.mark.parametrize("spread", [0.0, -1.0, 7.0])
    def test_invalid_angular_spread(self, spread):
        """Test Δ ∈ (0, 2π]."""
        with pytest.raises(ValidationError, match="angular_spread"):
            SimConfig(angular_spread=spread)

    def test_full_circle_spread(self):
        """Test Δ = 2π is accepted."""
        assert SimConfig(angular_spread=2 * math.pi).angular_spread == pytest.approx(2 * math.pi)

    @pytest.mark.parametrize("field", ["num_rus", "num_ues", "antennas_per_ru", "pilot_dim", "max_cluster_size"])
    def test_counts_positive(self, field):
        """Test that counts must be positive."""
        with pytest.raises(ValidationError):
            SimConfig(**{field: 0})

    def test_per_ru_mode_requires_power(self):
        """Test per-RU DL power mode needs P_ru."""
        with pytest.raises(ValidationError, match="ru_power_dbm"):
            SimConfig(dl_power_mode="per_ru")
        config = SimConfig(dl_power_mode="per_ru", ru_power_dbm=30.0)
        assert config.ru_power_mw == pytest.approx(1000.0)

    def test_frozen(self):
        """Test that configs are immutable."""
        config = SimConfig()
        with pytest.raises(ValidationError):
            config.num_rus = 3

    def test_derived_properties(self):
        """Test total antennas and noise power."""
        config = SimConfig(num_rus=10, antennas_per_ru=64, noise_psd_dbm=-90)
        assert config.total_antennas == 640
        assert config.noise_mw == pytest.approx(1e-9)

    def test_scheme_enum(self):
        """Test Scheme values and the local-precoding flag."""
        assert [s.value for s in Scheme] == [
            "clzf", "lmmse_cluster", "lsfd", "lzf_epa", "lzf_ppa", "lpzf_epa", "lpzf_ppa",
        ]
        assert Scheme.LZF_PPA.is_local_precoding
        assert not Scheme.LMMSE_CLUSTER.is_local_precoding


class TestLoadConfig:
    """Test the flat key-value config file."""

    def test_file_values(self, tmp_path):
        """Test values from a file, keys case-insensitive, comments ignored."""
        path = tmp_path / "scenario.env"
        path.write_text("# desk scale\nNUM_RUS=20\npilot_dim=10\nlos_mode=los\n")
        config = load_config(path)
        assert config.num_rus == 20
        assert config.pilot_dim == 10
        assert config.los_mode is LosMode.LOS

    def test_overrides_win(self, tmp_path):
        """Test that explicit overrides take precedence over the file."""
        path = tmp_path / "scenario.env"
        path.write_text("num_rus=20\n")
        config = load_config(path, num_rus=40, num_ues=None)
        assert config.num_rus == 40
        assert config.num_ues == 100

    def test_unknown_field(self, tmp_path):
        """Test that unknown keys are rejected."""
        path = tmp_path / "scenario.env"
        path.write_text("num_radios=3\n")
        with pytest.raises(ValueError, match="Unknown config field"):
            load_config(path)

    def test_missing_file(self, tmp_path):
        """Test missing config file."""
        with pytest.raises(FileNotFoundError, match="Config file not found"):
            load_config(tmp_path / "missing.env")

    def test_invalid_value(self):
        """Test that overrides are validated."""
        with pytest.raises(ValidationError):
            load_config(num_rus="many")

    def test_dump_reloads_identically(self, tmp_path):
        """Test that a dumped config file loads back to the same config."""
        config = SimConfig(num_rus=20, antennas_per_ru=32, shadowing_enabled=False, ru_power_dbm=23.0)
        path = tmp_path / "dumped.env"
        path.write_text(dump_config(config))
        assert load_config(path) == config

    def test_field_names(self):
        """Test that every field appears in a dump."""
        dumped = dump_config(SimConfig())
        for name in field_names():
            assert f"{name}=" in dumped
