"""
Tests for settings, config files and flag precedence
"""

import pytest

from config import ExperimentConfig, LabSettings, build_experiment_config, load_config_file
from errors import InvalidInputError
from models import CoderKind, OutputFormat, Subcommand


def test_settings_read_environment(monkeypatch):
    monkeypatch.setenv("FSC_TRIALS", "77")
    monkeypatch.setenv("FSC_OUTPUT_FORMAT", "json")
    settings = LabSettings()
    assert settings.trials == 77
    assert settings.output_format == OutputFormat.JSON


def test_settings_feed_defaults():
    settings = LabSettings(seed=5, trials=123, csl_bins=30)
    cfg = build_experiment_config(Subcommand.SWEEP, settings=settings)
    assert (cfg.seed, cfg.trials, cfg.csl_bins) == (5, 123, 30)
    assert cfg.coder == CoderKind.FSC


def test_file_overrides_settings_and_flags_override_file(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("# high-noise campaign\nsigma=0.2\ntrials=50\nangle-step-deg=0.5\ncompare=fsc,psc,csl\n")
    cfg = build_experiment_config(Subcommand.ERRORDIST, {"trials": 10}, config_file=path,
                                  settings=LabSettings(trials=999))
    assert cfg.sigma == 0.2
    assert cfg.trials == 10
    assert cfg.angle_step_deg == 0.5
    assert cfg.compare == [CoderKind.FSC, CoderKind.PSC, CoderKind.CSL]


def test_load_config_file_normalizes_keys(tmp_path):
    path = tmp_path / "flat.cfg"
    path.write_text("N-FREQ=4\nseed=3\n")
    assert load_config_file(path) == {"n_freq": "4", "seed": "3"}
    with pytest.raises(FileNotFoundError):
        load_config_file(tmp_path / "absent.cfg")


@pytest.mark.parametrize(
    "flags",
    [{"trials": 0}, {"sigma": -0.1}, {"modulus": 1.5}, {"n_freq": 0}, {"definition": "le45"},
     {"coder": "gwd"}, {"unknown_key": 1}],
)
def test_invalid_values_surface_as_invalid_input(flags):
    with pytest.raises(InvalidInputError):
        build_experiment_config(Subcommand.MONTECARLO, flags)


def test_constraint_defaults_per_subcommand():
    assert ExperimentConfig(subcommand=Subcommand.ERRORDIST).constrained_kinds() == [CoderKind.FSC]
    assert ExperimentConfig(subcommand=Subcommand.MONTECARLO).constrained_kinds() == []
    explicit = ExperimentConfig(subcommand=Subcommand.ERRORDIST, constrained="pscd")
    assert explicit.constrained_kinds() == [CoderKind.PSCD]


def test_csl_window_must_fit_the_bin_count():
    with pytest.raises(InvalidInputError, match="csl_window"):
        build_experiment_config(Subcommand.ROUNDTRIP, {"coder": "csl", "csl_bins": 10})
    with pytest.raises(InvalidInputError, match="csl_window"):
        build_experiment_config(Subcommand.ERRORDIST, {"compare": "fsc,csl", "csl_bins": 12})
    # only checked when a CSL coder actually runs
    cfg = build_experiment_config(Subcommand.SWEEP, {"coder": "fsc", "csl_bins": 10})
    assert cfg.csl_bins == 10


def test_montecarlo_rejects_constrained_coders(tmp_path):
    path = tmp_path / "mc.cfg"
    path.write_text("constrained=fsc\n")
    with pytest.raises(InvalidInputError, match="constrained"):
        build_experiment_config(Subcommand.MONTECARLO, config_file=path)
    cfg = build_experiment_config(Subcommand.MONTECARLO, {"constrained": ""})
    assert cfg.constrained_kinds() == []
