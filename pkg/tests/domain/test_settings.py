"""Settings resolution: defaults, environment, config file and flags."""

import pytest
from pydantic_settings import SettingsError

from src.availability_latency.models.core_types import PopularityProfile
from src.availability_latency.models.error_domain import ConfigError
from src.availability_latency.settings import LabSettings, load_config_file, load_settings


@pytest.fixture(autouse=True)
def _clean_environment(monkeypatch):
    for name in ("SEED", "ARRIVALS", "LAMBDAS", "LOG_LEVEL"):
        monkeypatch.delenv(f"AVAIL_LAB_{name}", raising=False)


def _write(tmp_path, text: str):
    path = tmp_path / "lab.conf"
    path.write_text(text, encoding="utf-8")
    return path


def test_defaults():
    settings = load_settings([])

    assert settings.seed == 20200101
    assert settings.arrivals == 200_000
    assert settings.reps == 5
    assert settings.lambdas == ()
    assert settings.profiles == (PopularityProfile.UNIFORM, PopularityProfile.SKEWED)
    assert settings.gamma is None
    assert not settings.plot


def test_flags_with_lists_and_implicit_booleans():
    settings = load_settings(["--seed", "7", "--lambdas", "0.5,1.0", "--r-values", "2,3", "--plot"])

    assert settings.seed == 7
    assert settings.lambdas == (0.5, 1.0)
    assert settings.r_values == (2, 3)
    assert settings.plot


def test_list_spellings_are_split():
    assert LabSettings(lambdas="[0.25, 0.5]").lambdas == (0.25, 0.5)
    assert LabSettings(profiles="skewed").profiles == (PopularityProfile.SKEWED,)
    assert LabSettings(t_values="").t_values == ()


def test_environment_is_read_and_overridden_by_flags(monkeypatch):
    monkeypatch.setenv("AVAIL_LAB_SEED", "3")
    monkeypatch.setenv("AVAIL_LAB_LAMBDAS", "0.1,0.2")

    assert load_settings([]).seed == 3
    assert load_settings([]).lambdas == (0.1, 0.2)
    assert load_settings(["--seed", "4"]).seed == 4


def test_config_file_sits_between_flags_and_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("AVAIL_LAB_SEED", "3")
    path = _write(tmp_path, "# sweep\nseed = 5\narrivals = 1000  # short\nlambdas = 0.5, 1.0\n\nwarmup-fraction = 0.1\n")

    from_file = load_settings(["--config", str(path)])
    overridden = load_settings(["--config", str(path), "--seed", "9"])

    assert from_file.seed == 5
    assert from_file.arrivals == 1000
    assert from_file.lambdas == (0.5, 1.0)
    assert from_file.warmup_fraction == 0.1
    assert overridden.seed == 9
    assert overridden.arrivals == 1000


def test_config_file_accepts_the_echoed_experiment_line(tmp_path):
    path = _write(tmp_path, "experiment = bounds\nseed = 2\n")

    assert load_config_file(path) == {"seed": "2"}


def test_config_file_errors(tmp_path):
    with pytest.raises(ConfigError, match="expected 'key = value'"):
        load_config_file(_write(tmp_path, "seed 5\n"))
    with pytest.raises(ConfigError, match="unknown setting"):
        load_config_file(_write(tmp_path, "colour = blue\n"))
    with pytest.raises(ConfigError, match="unknown setting"):
        load_config_file(_write(tmp_path, "config = other.conf\n"))
    with pytest.raises(ConfigError, match="cannot read"):
        load_config_file(tmp_path / "missing.conf")


def test_invalid_flag_values_are_rejected():
    with pytest.raises((SettingsError, ValueError)):
        load_settings(["--reps", "0"])
    with pytest.raises((SettingsError, ValueError)):
        load_settings(["--azure-locality", "4"])
    with pytest.raises((SettingsError, ValueError)):
        load_settings(["--no-such-flag", "1"])
