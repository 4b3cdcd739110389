import math

import pytest
import yaml

from qsatlink.core.config import (
    RunConfig, parse_sweep, merge_dicts, load_config_file, resolve_config, default_config_text,
)
from qsatlink.core.engine import LinkSimEngine
from qsatlink.core.exceptions import ConfigurationError, InvalidParameterError
from qsatlink.core.models import LinkDirection, ProtocolVariant, ProtocolParams
from qsatlink.core.presets import PresetRegistry
from qsatlink.core.validator import ScenarioValidator
from qsatlink.utils.manifest import write_manifest, read_manifest, verify_artifacts


class TestSweep:
    def test_full_range(self):
        grid = parse_sweep("0:80:5")
        assert len(grid) == 17
        assert grid[0] == 0.0 and grid[-1] == 80.0

    def test_single_value(self):
        assert parse_sweep("35") == [35.0]

    def test_fractional_step_has_no_drift(self):
        grid = parse_sweep("0:1:0.1")
        assert len(grid) == 11
        assert grid[3] == 0.3

    @pytest.mark.parametrize("spec", ["0:90:5", "10:0:1", "0:10:0", "a:b:c", "0:10", "-5:10:5"])
    def test_invalid(self, spec):
        with pytest.raises(ConfigurationError):
            parse_sweep(spec)


class TestPresets:
    @pytest.mark.parametrize("name, kind, canonical", [
        ("Night-1", "weather", "night1"),
        ("night_1", "weather", "night1"),
        ("N3", "weather", "night3"),
        ("Day 2", "weather", "day2"),
        ("Micius", "optics", "micius-down"),
        ("CubeSat_Uplink", "optics", "cubesat-up"),
        ("full moon", "noise", "night-fullmoon"),
        ("decoy", "protocol", "wcp"),
    ])
    def test_name_normalization(self, registry, name, kind, canonical):
        assert registry.normalize_name(name, kind) == canonical

    def test_unknown_name(self, registry):
        with pytest.raises(ConfigurationError, match="night9"):
            registry.weather("night9")

    def test_scenario_with_overrides(self, registry):
        scenario = registry.scenario("cubesat-up", zenith=math.radians(30), pointing_error=2e-6)
        assert scenario.direction == LinkDirection.UPLINK
        assert scenario.receiver_radius == 0.05
        assert scenario.pointing_error == 2e-6
        assert scenario.wavelength == pytest.approx(785e-9)
        assert scenario.label == "cubesat-up"

    def test_weather_table(self, registry):
        for name in ("night1", "night2", "night3", "day1", "day2", "day3"):
            weather = registry.weather(name)
            assert weather.beta == 0.7
            assert weather.daytime == name.startswith("day")
        assert registry.weather("night3").cn2 > registry.weather("night1").cn2

    def test_protocol_defaults(self, registry):
        sp = registry.protocol("sp", "downlink")
        assert sp.variant == ProtocolVariant.SINGLE_PHOTON
        assert sp.block_n == 10 ** 6
        wcp = registry.protocol("wcp", "uplink", block_n=None, eps_sec=1e-10)
        assert wcp.block_n == 10 ** 7
        assert wcp.eps_sec == 1e-10

    def test_default_noise_follows_time_of_day(self, registry):
        assert registry.default_noise_name(registry.weather("day1")) == "day-clear"
        assert registry.default_noise_name(registry.weather("night2")) == "night-fullmoon"

    def test_listing(self, registry):
        tables = registry.list_presets()
        assert set(tables) == {"optics", "weather", "noise", "protocol"}
        assert len(tables["optics"]) == 4
        assert len(tables["noise"]) == 4

    def test_broken_file(self, tmp_path):
        path = tmp_path / "presets.yaml"
        path.write_text("optics: {}\n", encoding="utf-8")
        with pytest.raises(ConfigurationError):
            PresetRegistry(path)


class TestRunConfig:
    def test_defaults(self):
        config = RunConfig()
        assert config.zenith_grid_deg == [0.0]
        assert config.variants == ["sp", "wcp"]

    def test_names_are_normalized(self):
        config = RunConfig.from_dict({"preset": "Micius_Up", "weather": "D1", "protocol": "SP"})
        assert config.preset == "micius-up"
        assert config.weather == "day1"
        assert config.variants == ["sp"]

    @pytest.mark.parametrize("data", [
        {"preset": "hubble"},
        {"samples": 0},
        {"sweep": "0:100:5"},
        {"protocol": "e91"},
        {"eval_point": "median"},
        {"scenario": {"mirror": 1.0}},
        {"colour": "blue"},
    ])
    def test_invalid_values(self, data):
        with pytest.raises(ConfigurationError):
            RunConfig.from_dict(data)

    def test_manifest_excludes_runtime_fields(self):
        config = RunConfig.from_dict({"workers": 4, "out": "elsewhere"})
        assert "workers" not in config.manifest_dict()
        assert "out" not in config.manifest_dict()

    def test_merge_priority(self, tmp_path):
        path = tmp_path / "run.yaml"
        path.write_text("weather: night2\nsamples: 300\nscenario:\n  pointing_error: 2.0e-6\n",
                        encoding="utf-8")
        config = resolve_config(LinkSimEngine.default_config(), path,
                                {"samples": 50, "weather": None, "scenario": {"focal_length": 6.0e+5}})
        assert config.weather == "night2"
        assert config.samples == 50
        assert config.scenario == {"pointing_error": 2e-6, "focal_length": 6e5}

    def test_merge_dicts_is_recursive(self):
        merged = merge_dicts({"a": {"b": 1, "c": 2}}, {"a": {"c": 3}, "d": 4})
        assert merged == {"a": {"b": 1, "c": 3}, "d": 4}

    def test_config_file_must_be_mapping(self, tmp_path):
        path = tmp_path / "bad.yaml"
        path.write_text("- one\n- two\n", encoding="utf-8")
        with pytest.raises(ConfigurationError):
            load_config_file(path)

    def test_default_text_round_trip(self):
        text = default_config_text(LinkSimEngine.default_config())
        data = yaml.safe_load(text)
        assert "workers" not in data
        assert RunConfig.from_dict(data).preset == "micius-down"


class TestValidator:
    def test_defocused_beam_warns(self, registry):
        validator = ScenarioValidator()
        result = validator.validate_scenario(registry.scenario("micius-down", focal_length=2e5))
        assert result["is_valid"]
        assert result["has_warnings"]

    def test_dead_receiver_is_error(self, registry):
        result = ScenarioValidator().validate_scenario(registry.scenario("micius-down", detector_efficiency=0.0))
        assert not result["is_valid"]

    def test_decoy_intensities_must_be_separable(self):
        params = ProtocolParams(variant="wcp", block_n=10 ** 6, intensities=(0.5, 0.4, 0.2))
        result = ScenarioValidator().validate_protocol(params)
        assert not result["is_valid"]

    def test_high_intrinsic_error_warns(self, registry):
        env = registry.noise("night-fullmoon", "downlink")
        noisy = type(env)(**{**env.to_dict(), "Q0": 0.2})
        assert ScenarioValidator().validate_noise(noisy)["has_warnings"]

    def test_strict_mode_turns_warnings_into_errors(self):
        validator = ScenarioValidator(strict_mode=True)
        result = validator.validate_sampling(50, 200)
        assert not result["is_valid"]
        summary = validator.get_validation_summary()
        assert summary["total_errors"] == 2
        validator.clear()
        assert validator.get_validation_summary()["total_errors"] == 0


class TestManifest:
    def test_digests_detect_changes(self, tmp_path):
        (tmp_path / "a.csv").write_text("x\n1\n", encoding="utf-8")
        write_manifest(tmp_path, "run", {"seed": 1}, {"a.csv": "table"}, "1.0.0")
        manifest = read_manifest(tmp_path / "manifest.json")
        assert manifest["config"] == {"seed": 1}
        assert verify_artifacts(manifest, tmp_path) == []

        (tmp_path / "a.csv").write_text("x\n2\n", encoding="utf-8")
        assert verify_artifacts(manifest, tmp_path) == ["a.csv"]

    def test_incomplete_manifest(self, tmp_path):
        path = tmp_path / "manifest.json"
        path.write_text('{"format": 1}', encoding="utf-8")
        with pytest.raises(ConfigurationError):
            read_manifest(path)


def test_invalid_parameter_is_value_error():
    with pytest.raises(ValueError):
        ProtocolParams(variant="sp", block_n=0)
    assert issubclass(InvalidParameterError, ValueError)
