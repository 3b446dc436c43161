"""Run configuration from defaults, environment, a config file and command-line flags.

Precedence, highest first: command-line flags, config file, environment
(``AVAIL_LAB_*``), defaults. The config file is flat ``key = value`` text
with ``#`` comments and comma-separated lists, the same syntax every output
CSV carries in its header comments.

Example:
    >>> settings = load_settings(["--seed", "7", "--lambdas", "0.5,1.0"])
    >>> settings.seed, settings.lambdas
    (7, (0.5, 1.0))
"""

import logging
from collections.abc import Sequence
from pathlib import Path
from typing import Annotated, Any, Literal

from pydantic import Field, field_validator
from pydantic_settings import BaseSettings, NoDecode, SettingsConfigDict

from .models.core_types import PopularityProfile
from .models.error_domain import ConfigError

logger = logging.getLogger(__name__)

LogLevel = Literal["DEBUG", "INFO", "WARNING", "ERROR"]


class LabSettings(BaseSettings):
    """Every knob of the command-line experiments.

    Empty grids mean "use the experiment's default grid".
    """

    model_config = SettingsConfigDict(
        env_prefix="AVAIL_LAB_",
        cli_prog_name="availability-latency",
        cli_kebab_case=True,
        cli_implicit_flags=True,
        cli_exit_on_error=False,
        frozen=True,
    )

    seed: int = Field(default=20200101, ge=0, lt=2**64, description="Seed of the first replication")
    arrivals: int = Field(default=200_000, ge=1, description="Arrivals per replication")
    reps: int = Field(default=5, ge=1, description="Replications per simulated cell")
    warmup_fraction: float = Field(default=0.2, ge=0.0, lt=1.0, description="Leading arrivals discarded")
    max_backlog: int = Field(default=100_000, ge=1, description="Per-server backlog that aborts a run")
    workers: int = Field(default=1, ge=0, description="Replication processes; 0 means one per CPU")
    out: Path = Field(default=Path(), description="Output directory")
    plot: bool = Field(default=False, description="Also write an SVG plot")
    trace: bool = Field(default=False, description="Write per-request traces of simulated cells")
    layout_file: Path | None = Field(default=None, description="JSON storage layout for fixed-object sweeps")
    config: Path | None = Field(default=None, description="key = value config file")
    log_level: LogLevel = "WARNING"

    lambdas: Annotated[tuple[float, ...], NoDecode] = Field(default=(), description="Arrival-rate grid")
    r_values: Annotated[tuple[int, ...], NoDecode] = Field(default=(1, 2, 3, 4, 5, 6), description="Locality grid")
    t_values: Annotated[tuple[int, ...], NoDecode] = Field(default=(0, 1, 2, 3, 4, 5, 6), description="Availability grid")
    profiles: Annotated[tuple[PopularityProfile, ...], NoDecode] = Field(
        default=(PopularityProfile.UNIFORM, PopularityProfile.SKEWED), description="Popularity profiles"
    )
    r: int = Field(default=2, ge=1, description="Locality of fixed-object sweeps")
    t: int = Field(default=1, ge=0, description="Availability of fixed-object sweeps")
    mu: float = Field(default=1.0, gt=0.0, description="Recovery server rate")
    gamma: float | None = Field(default=None, gt=0.0, description="Systematic server rate; defaults to mu")
    azure_locality: int = Field(default=3, ge=2, le=3, description="Locality of the Azure LRC in comparisons")

    @field_validator("lambdas", "r_values", "t_values", "profiles", mode="before")
    @classmethod
    def _split_lists(cls, value: Any) -> Any:
        """Accept ``a,b,c`` and ``[a, b, c]`` spellings of a list."""
        if not isinstance(value, str):
            return value
        stripped = value.strip().strip("[]")
        return tuple(item.strip().strip("'\"") for item in stripped.split(",") if item.strip())


def load_config_file(path: Path) -> dict[str, str]:
    """Read a flat ``key = value`` file.

    Blank lines and ``#`` comments are skipped; keys may use dashes or
    underscores. An ``experiment`` line is accepted and ignored, so the
    comment block of an output CSV loads as is once its ``#`` marks are
    stripped.

    Raises:
        ConfigError: If the file is unreadable, a line has no ``=`` or a key
            is not a setting.
    """
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc

    values: dict[str, str] = {}
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, separator, value = line.partition("=")
        if not separator:
            raise ConfigError(f"{path}:{number}: expected 'key = value'")
        name = key.strip().replace("-", "_")
        if name == "experiment":
            # Echoed into every CSV; the subcommand names the experiment.
            continue
        if name not in LabSettings.model_fields or name == "config":
            raise ConfigError(f"{path}:{number}: unknown setting {key.strip()!r}")
        values[name] = value.strip()
    logger.info("loaded %d settings from %s", len(values), path)
    return values


def load_settings(args: Sequence[str]) -> LabSettings:
    """Resolve settings for one run from flags plus the config file they name."""
    first_pass = LabSettings(_cli_parse_args=list(args))  # type: ignore[call-arg]
    if first_pass.config is None:
        return first_pass
    file_values = load_config_file(first_pass.config)
    return LabSettings(_cli_parse_args=list(args), **file_values)  # type: ignore[arg-type]
