"""Experiment service - orchestration from command line to CSV and SVG files.

PURPOSE:
Each subcommand sweeps a grid and evaluates analytic formulas and simulated
means at every grid point. This module wires the pieces together: it
resolves settings into an ``ExperimentSpec``, runs the experiment's runner,
and writes the resulting ``CsvTable`` (plus an optional plot) to disk.

ARCHITECTURE NOTES:
The service makes no modelling decisions. Formulas live in the domain
modules, instability handling lives in ``evaluate_cell``, the process exit
code lives in ``ExitStatus``. Runners are dispatched from a dictionary keyed
by ``Experiment``. File I/O happens here and in the settings loader only.

Simulated grid cells and their replications are dispatched together to a
process pool when ``workers`` allows it; rows and traces are written in grid
order once every cell has finished.

Example:
    >>> status = run(["table1", "--out", "results"])
    >>> status.exit_code
    0
"""

import logging
import sys
from collections import defaultdict
from collections.abc import Callable, Sequence
from functools import partial
from pathlib import Path

from pydantic import ValidationError
from pydantic_settings import SettingsError

from .models.code_domain import PopularityVector, StorageLayout, load_layout, single_object_layout
from .models.core_types import AccessMode, ComparisonCode, Experiment, ExitStatus
from .models.distribution_domain import Moments, fastest_type, slowest_type, type_moments
from .models.error_domain import ApproximationDomainError, ConfigError
from .models.experiment_domain import (
    COMPARISON_CUMULATIVE_RATE,
    HALF_WIDTH_SUFFIX,
    CsvTable,
    ExperimentSpec,
    TableCell,
    default_lambda_grid,
    evaluate_cell,
    fixed_object_capacity,
    grid_label,
)
from .models.lowtraffic_domain import comparison_table, et_availability, relative_gain_per_t
from .models.qbd_domain import ma_mean_ub
from .models.queueing_domain import (
    HighTrafficRates,
    Mg1Spec,
    TypeFrequencies,
    approx_mixture_mean,
    approx_r2_mean,
    approx_r2_weights,
    fsm_mean_lower,
    hightraffic_approx_mean,
    hightraffic_fractions,
    pk_mean,
    sm_mean_upper,
)
from .models.simulation_domain import SimConfig, SimResult, run_cells, type_labels, write_trace
from .settings import LabSettings, load_settings

logger = logging.getLogger(__name__)

Runner = Callable[[ExperimentSpec], CsvTable]

BOUNDS_HEADER = ("lambda", "lb_fsm", "lb_mixture", "approx", "ub_sm")


def run_table1(spec: ExperimentSpec) -> CsvTable:
    """Closed-form comparison of the four storage systems next to the published values."""
    header = ("label", "et_mu", "et_mu_norm", "overhead", "fault_tolerance", "published", "published_norm", "mismatch")
    rows = [
        (
            TableCell.of(row.label),
            TableCell.of(row.et_mu_raw),
            TableCell.of(row.et_mu_normalized),
            TableCell.of(row.storage_overhead),
            TableCell.of(float(row.fault_tolerance)),
            _optional(row.published_raw),
            _optional(row.published_normalized),
            TableCell.of("yes" if row.mismatch else "no"),
        )
        for row in comparison_table(mu=spec.mu, azure_locality=spec.azure_locality)
    ]
    return _table(spec, header, rows)


def run_lowtraffic_sweep(spec: ExperimentSpec) -> CsvTable:
    """Low-traffic mean download time over the ``(r, t)`` grid."""
    rows = [
        (
            TableCell.of(float(r)),
            TableCell.of(float(t)),
            TableCell.of(et_availability(r, t, spec.mu)),
            TableCell.of(relative_gain_per_t(r, t)),
        )
        for r in spec.r_values
        for t in spec.t_values
    ]
    return _table(spec, ("r", "t", "et", "relative_gain"), rows, series="r")


def run_code_comparison(spec: ExperimentSpec) -> CsvTable:
    """Simulated popularity-driven access to the four systems at a common cumulative rate."""
    layouts = {code: code.build_layout(spec.azure_locality) for code in ComparisonCode}
    header = ["lambda"]
    for profile in spec.profiles:
        for code in ComparisonCode:
            header += [f"{code}_{profile}", f"{code}_{profile}{HALF_WIDTH_SUFFIX}"]

    cells = [
        (
            f"{code}_{profile}_{grid_label([lambda_])}",
            _sim_config(
                spec,
                mode=AccessMode.GA,
                layout=layout,
                arrival_rate=lambda_,
                mu=COMPARISON_CUMULATIVE_RATE / layout.params.n,
                popularity=profile.build(layout.params.k),
            ),
        )
        for lambda_ in spec.lambdas
        for profile in spec.profiles
        for code, layout in layouts.items()
    ]
    results = iter(_simulate_cells(spec, cells))

    rows = []
    for lambda_ in spec.lambdas:
        row = [TableCell.of(lambda_)]
        for _ in range(len(spec.profiles) * len(layouts)):
            row += _mean_cells(next(results))
        rows.append(tuple(row))
    return _table(spec, tuple(header), rows)


def run_fjfa_bounds(spec: ExperimentSpec) -> CsvTable:
    """Simulated fixed-object mean against the bounds and approximations."""
    layout = _fixed_object_layout(spec)
    r, t, mu = layout.params.r, layout.params.t, spec.mu
    header = ("lambda", "sim_fa", f"sim_fa{HALF_WIDTH_SUFFIX}", "lb_fsm", "ub_sm", "approx", "ub_ma", "approx_ht")
    cells = [
        (grid_label([lambda_]), _sim_config(spec, mode=AccessMode.FA, layout=layout, arrival_rate=lambda_, mu=mu))
        for lambda_ in spec.lambdas
    ]
    rows = [
        (
            TableCell.of(lambda_),
            *_mean_cells(result),
            evaluate_cell(partial(fsm_mean_lower, lambda_, t, mu)),
            evaluate_cell(partial(sm_mean_upper, lambda_, r, t, mu)),
            _when(r == 2, partial(approx_r2_mean, lambda_, t, mu)),
            _when((r, t) == (2, 1), partial(ma_mean_ub, lambda_, mu, mu, mu)),
            _when((r, t) == (2, 1), partial(hightraffic_approx_mean, lambda_, mu, mu)),
        )
        for lambda_, result in zip(spec.lambdas, _simulate_cells(spec, cells), strict=True)
    ]
    return _table(spec, header, rows)


def run_service_freqs(spec: ExperimentSpec) -> CsvTable:
    """Simulated service-type frequencies and completion sources with the high-traffic bounds."""
    layout = _fixed_object_layout(spec)
    r, t, mu, gamma = layout.params.r, layout.params.t, spec.mu, spec.systematic_rate
    rates = [mu] * layout.params.n
    rates[layout.placements[0].systematic_server] = gamma
    capacity = fixed_object_capacity(r, t, mu, gamma)
    labels = type_labels(r, t)
    bounds = hightraffic_fractions(HighTrafficRates(gamma=gamma, alpha=mu, beta=mu)) if (r, t) == (2, 1) else None

    header = ["lambda", "load"]
    for label in labels:
        header += [f"f_{label}", f"f_{label}{HALF_WIDTH_SUFFIX}"]
    header += ["ws", f"ws{HALF_WIDTH_SUFFIX}", "wr", "ws_bound", "f0_bound"]

    config = partial(_sim_config, spec, mode=AccessMode.FA, layout=layout, mu=mu, server_rates=tuple(rates))
    cells = [(grid_label([lambda_]), config(arrival_rate=lambda_)) for lambda_ in spec.lambdas]
    rows = []
    for lambda_, result in zip(spec.lambdas, _simulate_cells(spec, cells), strict=True):
        row = [TableCell.of(lambda_), TableCell.of(lambda_ / capacity)]
        row += _frequency_cells(result, len(labels))
        row += _flagged(result, [result.ws, result.ws_half_width, result.wr])
        row += [_optional(bounds.ws_hat if bounds else None), _optional(bounds.f0_hat if bounds else None)]
        rows.append(tuple(row))
    return _table(spec, tuple(header), rows)


def run_qbd_ub(spec: ExperimentSpec) -> CsvTable:
    """Matrix-analytic upper bound against Split-Merge and Fast-Split-Merge for ``r = 2, t = 1``."""
    gamma, mu = spec.systematic_rate, spec.mu
    slowest = type_moments(slowest_type(2, 1), mu, gamma)
    fastest = Moments.exponential(gamma + mu)
    rows = [
        (
            TableCell.of(lambda_),
            evaluate_cell(partial(ma_mean_ub, lambda_, gamma, mu, mu)),
            evaluate_cell(partial(_pk_mean, lambda_, slowest)),
            evaluate_cell(partial(_pk_mean, lambda_, fastest)),
        )
        for lambda_ in spec.lambdas
    ]
    return _table(spec, ("lambda", "ub_ma", "ub_sm", "lb_fsm"), rows)


def run_bounds(spec: ExperimentSpec) -> CsvTable:
    """Analytic bounds and the locality-two approximation over the arrival grid."""
    rows = [_bounds_row(spec, lambda_) for lambda_ in spec.lambdas]
    return _table(spec, BOUNDS_HEADER, rows)


def run_approx(spec: ExperimentSpec) -> CsvTable:
    """Bounds plus every approximation that applies, with the estimated type weights."""
    r, t, mu = spec.r, spec.t, spec.mu
    labels = type_labels(2, t) if r == 2 else ()
    header = (*BOUNDS_HEADER, "ub_ma", "approx_ht", *(f"w_{label}" for label in labels))
    rows = []
    for lambda_ in spec.lambdas:
        rows.append(
            (
                *_bounds_row(spec, lambda_),
                _when((r, t) == (2, 1), partial(ma_mean_ub, lambda_, mu, mu, mu)),
                _when((r, t) == (2, 1), partial(hightraffic_approx_mean, lambda_, mu, mu)),
                *_weight_cells(lambda_, t, mu, len(labels)),
            )
        )
    return _table(spec, header, rows)


RUNNERS: dict[Experiment, Runner] = {
    Experiment.TABLE1: run_table1,
    Experiment.LOWTRAFFIC: run_lowtraffic_sweep,
    Experiment.COMPARE_CODES: run_code_comparison,
    Experiment.FJFA_BOUNDS: run_fjfa_bounds,
    Experiment.SERVICE_FREQS: run_service_freqs,
    Experiment.QBD_UB: run_qbd_ub,
    Experiment.BOUNDS: run_bounds,
    Experiment.APPROX: run_approx,
}


class LabService:
    """Runs one experiment end to end."""

    def run_experiment(self, spec: ExperimentSpec) -> CsvTable:
        """Evaluate the experiment's grid."""
        logger.info("%s: %d grid points", spec.experiment, max(len(spec.lambdas), 1))
        if spec.experiment.uses_simulation:
            logger.info("%s: %d arrivals x %d replications per cell", spec.experiment, spec.arrivals, spec.reps)
        elif spec.trace:
            logger.warning("%s runs no simulation; --trace writes nothing", spec.experiment)
        return RUNNERS[spec.experiment](spec)

    def write_outputs(self, table: CsvTable, spec: ExperimentSpec) -> list[Path]:
        """Write the CSV and, when requested, the SVG plot; return the written paths."""
        spec.out.mkdir(parents=True, exist_ok=True)
        spec.csv_path.write_text(table.render(), encoding="utf-8")
        written = [spec.csv_path]
        if spec.plot and spec.experiment.plot_x is not None and write_plot(table, spec.svg_path):
            written.append(spec.svg_path)
        for path in written:
            logger.info("wrote %s", path)
        return written


service = LabService()


def run_experiment(spec: ExperimentSpec) -> CsvTable:
    """Evaluate one experiment without touching the file system."""
    return service.run_experiment(spec)


def build_spec(experiment: Experiment, settings: LabSettings) -> ExperimentSpec:
    """Resolve settings into a spec, filling the default arrival-rate grid.

    A layout file fixes ``r`` and ``t`` for the fixed-object sweeps.
    """
    r, t = settings.r, settings.t
    if settings.layout_file is not None:
        params = load_layout(settings.layout_file).params
        r, t = params.r, params.t
    lambdas = settings.lambdas or default_lambda_grid(experiment, r=r, t=t, mu=settings.mu, gamma=settings.gamma)
    values = settings.model_dump(exclude={"config", "log_level"})
    values.update(lambdas=lambdas, r=r, t=t)
    return ExperimentSpec(experiment=experiment, **values)


def write_plot(table: CsvTable, path: Path) -> bool:
    """Draw every plottable column against the experiment's x axis as an SVG.

    Returns False when matplotlib is not installed.
    """
    try:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        logger.warning("matplotlib is not installed; skipping %s", path)
        return False

    x_name = table.experiment.plot_x or table.header[0]
    groups: dict[str, list[int]] = defaultdict(list)
    series_position = table.header.index(table.series) if table.series else None
    for position, row in enumerate(table.rows):
        key = row[series_position].render() if series_position is not None else ""
        groups[key].append(position)

    x_values = table.column(x_name)
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for key, positions in groups.items():
        for name in table.plot_columns:
            y_values = table.column(name)
            label = f"{name} ({table.series}={key})" if key else name
            ax.plot([x_values[i] for i in positions], [y_values[i] for i in positions], marker="o", label=label)
    ax.set_xlabel(x_name)
    ax.set_title(str(table.experiment))
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)
    return True


def run(argv: Sequence[str]) -> ExitStatus:
    """Run one subcommand; the return value carries the process exit code."""
    try:
        experiment, rest = Experiment.from_argv(argv)
        settings = load_settings(rest)
        logging.getLogger(__package__).setLevel(settings.log_level)
        spec = build_spec(experiment, settings)
        table = service.run_experiment(spec)
    except (ValidationError, SettingsError, ValueError, ConfigError, OSError) as exc:
        logger.error("invalid configuration: %s", exc)
        return ExitStatus.INVALID_CONFIG

    service.write_outputs(table, spec)
    if table.status == ExitStatus.INSTABILITY:
        logger.warning("%s: at least one cell is beyond its stability boundary", experiment)
    return table.status


def main() -> None:
    """Console entry point."""
    logging.basicConfig(level=logging.WARNING, format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    sys.exit(run(sys.argv[1:]).exit_code)


def _sim_config(
    spec: ExperimentSpec,
    mode: AccessMode,
    layout: StorageLayout,
    arrival_rate: float,
    mu: float,
    popularity: PopularityVector | None = None,
    server_rates: tuple[float, ...] | None = None,
) -> SimConfig:
    return SimConfig(
        mode=mode,
        layout=layout,
        popularity=popularity,
        arrival_rate=arrival_rate,
        mu=mu,
        server_rates=server_rates,
        n_arrivals=spec.arrivals,
        warmup_fraction=spec.warmup_fraction,
        seed=spec.seed,
        max_backlog=spec.max_backlog,
        keep_samples=False,
        keep_trace=spec.trace,
    )


def _simulate_cells(spec: ExperimentSpec, cells: Sequence[tuple[str, SimConfig]]) -> list[SimResult]:
    """Simulate every labelled cell on one pool, then write traces in grid order."""
    logger.info("simulating %d cells x %d replications", len(cells), spec.reps)
    results = run_cells([config for _, config in cells], spec.reps, workers=spec.workers)
    if spec.trace:
        for (label, _), result in zip(cells, results, strict=True):
            write_trace(result, spec.trace_path(label))
    return results


def _fixed_object_layout(spec: ExperimentSpec) -> StorageLayout:
    if spec.layout_file is not None:
        return load_layout(spec.layout_file)
    return single_object_layout(spec.r, spec.t)


def _mean_cells(result: SimResult) -> list[TableCell]:
    return _flagged(result, [result.mean_t, result.half_width])


def _flagged(result: SimResult, values: Sequence[float]) -> list[TableCell]:
    if result.aborted:
        return [TableCell.unstable() for _ in values]
    return [TableCell.of(value) for value in values]


def _frequency_cells(result: SimResult, count: int) -> list[TableCell]:
    frequencies = result.type_frequencies
    if frequencies is None:
        if result.aborted:
            return [TableCell.unstable()] * (2 * count)
        return [TableCell.undefined()] * (2 * count)
    half_widths = result.type_half_widths or (0.0,) * count
    cells = []
    for value, half_width in zip(frequencies.f, half_widths, strict=True):
        cells += _flagged(result, [value, half_width])
    return cells


def _bounds_row(spec: ExperimentSpec, lambda_: float) -> tuple[TableCell, ...]:
    r, t, mu = spec.r, spec.t, spec.mu
    fastest = TypeFrequencies.point_mass(fastest_type(r, t))
    return (
        TableCell.of(lambda_),
        evaluate_cell(partial(fsm_mean_lower, lambda_, t, mu)),
        evaluate_cell(partial(approx_mixture_mean, fastest, lambda_, mu)),
        _when(r == 2, partial(approx_r2_mean, lambda_, t, mu)),
        evaluate_cell(partial(sm_mean_upper, lambda_, r, t, mu)),
    )


def _weight_cells(lambda_: float, t: int, mu: float, count: int) -> list[TableCell]:
    if count == 0:
        return []
    try:
        weights = approx_r2_weights(lambda_, t, mu)
    except ApproximationDomainError:
        return [TableCell.undefined()] * count
    return [TableCell.of(weight) for weight in weights.f]


def _when(applies: bool, compute: Callable[[], float]) -> TableCell:
    return evaluate_cell(compute) if applies else TableCell.undefined()


def _optional(value: float | None) -> TableCell:
    return TableCell.undefined() if value is None else TableCell.of(value)


def _pk_mean(lambda_: float, service: Moments) -> float:
    return pk_mean(Mg1Spec(arrival_rate=lambda_, service=service))


def _table(
    spec: ExperimentSpec,
    header: Sequence[str],
    rows: Sequence[Sequence[TableCell]],
    series: str | None = None,
) -> CsvTable:
    return CsvTable(
        experiment=spec.experiment,
        comments=spec.config_lines(),
        header=tuple(header),
        rows=tuple(tuple(row) for row in rows),
        series=series,
    )
