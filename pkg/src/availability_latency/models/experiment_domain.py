"""Experiment plumbing - resolved run settings, table cells and CSV tables.

PURPOSE:
Each command-line experiment sweeps a grid (arrival rates, localities,
availabilities) and evaluates a handful of analytic or simulated quantities
per grid point. Some points lie beyond a stability boundary or outside an
approximation's domain; those become flagged cells instead of aborting the
sweep.

ARCHITECTURE NOTES:
``ExperimentSpec`` is the fully resolved configuration and renders itself as
``# key = value`` comment lines in the same syntax the config-file loader
reads, so the comment block of every CSV, saved as a config file, repeats
the run. ``CsvTable`` is
built row by row in grid order and knows its worst ``ExitStatus``.

Example:
    >>> cell = evaluate_cell(lambda: sm_mean_upper(2.0, 2, 1, 1.0))
    >>> cell.render()
    'unstable'
"""

import csv
import io
import math
from collections.abc import Callable, Sequence
from enum import StrEnum
from functools import reduce
from pathlib import Path
from typing import Literal

from pydantic import BaseModel, ConfigDict, Field, computed_field, model_validator

from .core_types import Experiment, ExitStatus, PopularityProfile
from .distribution_domain import slowest_type, type_moments
from .error_domain import ApproximationDomainError, InstabilityError, InvalidParameterError
from .qbd_domain import qbd_capacity
from .queueing_domain import fa_r2t1_capacity, sm_capacity

GRID_POINTS = 10
GRID_FRACTION = 0.95
COMPARISON_CUMULATIVE_RATE = 10.0
# Heavy-traffic end of the code comparison; the LRC under skewed access is close to saturation here.
COMPARISON_TOP_RATE = 1.8
HALF_WIDTH_SUFFIX = "_hw"


class CellStatus(StrEnum):
    """Outcome of evaluating one table cell."""

    OK = "ok"
    UNSTABLE = "unstable"
    UNDEFINED = "n/a"

    def render(self, value: float | str | None) -> str:
        """CSV text of a cell with this status."""
        renderers: dict[CellStatus, Callable[[], str]] = {
            CellStatus.OK: lambda: value if isinstance(value, str) else format(value, ".10g"),
            CellStatus.UNSTABLE: lambda: self.value,
            CellStatus.UNDEFINED: lambda: self.value,
        }
        return renderers[self]()

    @property
    def exit_status(self) -> ExitStatus:
        """Process outcome this cell contributes."""
        return ExitStatus.INSTABILITY if self == CellStatus.UNSTABLE else ExitStatus.OK


class TableCell(BaseModel):
    """One CSV cell: a number, a label, or a flag."""

    model_config = ConfigDict(frozen=True)

    value: float | str | None = None
    status: CellStatus = CellStatus.OK

    @model_validator(mode="after")
    def _check_value(self) -> "TableCell":
        if self.status == CellStatus.OK and self.value is None:
            raise InvalidParameterError("a valid cell needs a value")
        return self

    @classmethod
    def of(cls, value: float | str) -> "TableCell":
        """Valid cell holding ``value``."""
        return cls(value=value)

    @classmethod
    def unstable(cls) -> "TableCell":
        """Cell beyond a stability boundary."""
        return cls(status=CellStatus.UNSTABLE)

    @classmethod
    def undefined(cls) -> "TableCell":
        """Cell whose quantity does not apply to the parameters."""
        return cls(status=CellStatus.UNDEFINED)

    @property
    def number(self) -> float:
        """Numeric value, NaN for flagged or text cells."""
        return self.value if isinstance(self.value, float) else math.nan

    def render(self) -> str:
        """CSV text."""
        return self.status.render(self.value)


def evaluate_cell(compute: Callable[[], float]) -> TableCell:
    """Evaluate ``compute`` and flag instability or an approximation breakdown."""
    try:
        return TableCell.of(float(compute()))
    except InstabilityError:
        return TableCell.unstable()
    except ApproximationDomainError:
        return TableCell.undefined()


class CsvTable(BaseModel):
    """Header, rows and provenance comments of one experiment's output."""

    model_config = ConfigDict(frozen=True)

    experiment: Experiment
    comments: tuple[str, ...] = ()
    header: tuple[str, ...] = Field(min_length=1)
    rows: tuple[tuple[TableCell, ...], ...] = ()
    series: str | None = Field(default=None, description="Column whose values split the plot into lines")

    @model_validator(mode="after")
    def _check_widths(self) -> "CsvTable":
        for position, row in enumerate(self.rows):
            if len(row) != len(self.header):
                raise InvalidParameterError(f"row {position} has {len(row)} cells, header has {len(self.header)}")
        if self.series is not None and self.series not in self.header:
            raise InvalidParameterError(f"series column {self.series!r} not in header")
        return self

    @computed_field
    @property
    def status(self) -> ExitStatus:
        """Worst outcome over all cells."""
        statuses = (cell.status.exit_status for row in self.rows for cell in row)
        return reduce(ExitStatus.worst, statuses, ExitStatus.OK)

    def column(self, name: str) -> list[float]:
        """Numeric values of one column, NaN where flagged."""
        position = self.header.index(name)
        return [row[position].number for row in self.rows]

    @property
    def plot_columns(self) -> tuple[str, ...]:
        """Columns drawn against the experiment's x axis."""
        x_axis = self.experiment.plot_x
        skipped = {x_axis, self.series}
        return tuple(name for name in self.header if name not in skipped and not name.endswith(HALF_WIDTH_SUFFIX))

    def render(self) -> str:
        """Comment lines prefixed ``#``, then the header and the rows."""
        buffer = io.StringIO()
        for line in self.comments:
            buffer.write(f"# {line}\n")
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(self.header)
        writer.writerows([cell.render() for cell in row] for row in self.rows)
        return buffer.getvalue()


class ExperimentSpec(BaseModel):
    """Fully resolved configuration of one experiment run.

    Grids are already filled with their defaults; ``gamma`` of None means the
    systematic server runs at ``mu``.
    """

    model_config = ConfigDict(frozen=True)

    experiment: Experiment
    lambdas: tuple[float, ...] = ()
    r_values: tuple[int, ...] = ()
    t_values: tuple[int, ...] = ()
    r: int = Field(default=2, ge=1)
    t: int = Field(default=1, ge=0)
    mu: float = Field(default=1.0, gt=0.0)
    gamma: float | None = Field(default=None, gt=0.0)
    profiles: tuple[PopularityProfile, ...] = (PopularityProfile.UNIFORM, PopularityProfile.SKEWED)
    azure_locality: Literal[2, 3] = 3
    seed: int = Field(default=20200101, ge=0, lt=2**64)
    arrivals: int = Field(default=200_000, ge=1)
    reps: int = Field(default=5, ge=1)
    warmup_fraction: float = Field(default=0.2, ge=0.0, lt=1.0)
    max_backlog: int = Field(default=100_000, ge=1)
    workers: int = Field(default=1, ge=0)
    out: Path = Path()
    plot: bool = False
    trace: bool = False
    layout_file: Path | None = None

    @model_validator(mode="after")
    def _check_grids(self) -> "ExperimentSpec":
        if any(value <= 0 for value in self.lambdas):
            raise InvalidParameterError("arrival rates must be positive")
        if self.experiment.plot_x == "lambda" and not self.lambdas:
            raise InvalidParameterError(f"{self.experiment} needs a non-empty lambda grid")
        if self.experiment == Experiment.LOWTRAFFIC and not (self.r_values and self.t_values):
            raise InvalidParameterError("lowtraffic needs non-empty r and t grids")
        if any(value < 1 for value in self.r_values) or any(value < 0 for value in self.t_values):
            raise InvalidParameterError("need r >= 1 and t >= 0 in the grids")
        if self.experiment == Experiment.COMPARE_CODES and not self.profiles:
            raise InvalidParameterError("compare-codes needs at least one popularity profile")
        return self

    @property
    def systematic_rate(self) -> float:
        """Service rate of the systematic server."""
        return self.gamma if self.gamma is not None else self.mu

    @property
    def csv_path(self) -> Path:
        """Output table path."""
        return self.out / f"{self.experiment.stem}.csv"

    @property
    def svg_path(self) -> Path:
        """Output plot path, next to the table."""
        return self.csv_path.with_suffix(".svg")

    def trace_path(self, cell: str) -> Path:
        """Per-request trace path of one simulated cell."""
        return self.out / f"{self.experiment.stem}_trace_{cell}.csv"

    def config_lines(self) -> tuple[str, ...]:
        """``key = value`` lines that reproduce this run through a config file."""
        dumped = self.model_dump(mode="json", exclude={"experiment"})
        lines = [f"experiment = {self.experiment}"]
        for key, value in dumped.items():
            if value is None:
                continue
            lines.append(f"{key} = {_config_text(value)}")
        return tuple(lines)


def linear_grid(limit: float, points: int = GRID_POINTS, fraction: float = GRID_FRACTION) -> tuple[float, ...]:
    """``points`` evenly spaced rates ending at ``fraction * limit``.

    Example:
        >>> linear_grid(1.0, points=2, fraction=0.5)
        (0.25, 0.5)
    """
    if limit <= 0 or points < 1 or not 0 < fraction <= 1:
        raise InvalidParameterError("need limit > 0, points >= 1 and fraction in (0, 1]")
    return tuple(fraction * limit * i / points for i in range(1, points + 1))


def fixed_object_capacity(r: int, t: int, mu: float, gamma: float) -> float:
    """Stability limit used to scale fixed-object sweeps with systematic rate ``gamma``.

    Exact for ``r = 2, t = 1``; otherwise the Split-Merge capacity of the
    slowest type, which is a lower bound on the true limit.
    """
    if (r, t) == (2, 1):
        return fa_r2t1_capacity(gamma, mu, mu)
    return 1.0 / type_moments(slowest_type(r, t), mu, gamma).mean


def default_lambda_grid(
    experiment: Experiment,
    r: int = 2,
    t: int = 1,
    mu: float = 1.0,
    gamma: float | None = None,
) -> tuple[float, ...]:
    """Arrival-rate grid used when none is configured; empty for grid-free experiments.

    Analytic sweeps stop at ``GRID_FRACTION`` of their stability limit. The
    code comparison ends at ``COMPARISON_TOP_RATE``: the systems serve
    different objects on different servers in parallel, so their limits sit
    far above any one-request-at-a-time capacity.
    """
    systematic = gamma if gamma is not None else mu
    grids: dict[Experiment, Callable[[], tuple[float, ...]]] = {
        Experiment.TABLE1: lambda: (),
        Experiment.LOWTRAFFIC: lambda: (),
        Experiment.COMPARE_CODES: lambda: linear_grid(COMPARISON_TOP_RATE, fraction=1.0),
        Experiment.FJFA_BOUNDS: lambda: linear_grid(sm_capacity(r, t, mu)),
        Experiment.BOUNDS: lambda: linear_grid(sm_capacity(r, t, mu)),
        Experiment.APPROX: lambda: linear_grid(sm_capacity(r, t, mu)),
        Experiment.SERVICE_FREQS: lambda: linear_grid(fixed_object_capacity(r, t, mu, systematic)),
        Experiment.QBD_UB: lambda: linear_grid(
            min(1.0 / type_moments(slowest_type(2, 1), mu, systematic).mean, qbd_capacity(systematic, mu, mu))
        ),
    }
    return grids[experiment]()


def grid_label(values: Sequence[float]) -> str:
    """Short label of a grid point for file names, e.g. ``0.5`` -> ``0p5``."""
    return "_".join(format(value, ".6g").replace(".", "p") for value in values)


def _config_text(value: object) -> str:
    if isinstance(value, list):
        return ",".join(str(item) for item in value)
    if isinstance(value, bool):
        return str(value).lower()
    return str(value)
