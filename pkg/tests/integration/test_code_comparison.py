"""Popularity-driven access to the four six-object systems in heavy traffic."""

import pytest

from src.availability_latency.models.core_types import ComparisonCode, Experiment, ExitStatus, PopularityProfile
from src.availability_latency.models.experiment_domain import HALF_WIDTH_SUFFIX, ExperimentSpec, default_lambda_grid
from src.availability_latency.service import run_experiment
from tests.shared.test_models import OrderingTestCase

pytestmark = [pytest.mark.integration, pytest.mark.simulation]

HEAVY_TRAFFIC = default_lambda_grid(Experiment.COMPARE_CODES)[-2:]


@pytest.fixture(scope="module")
def heavy_traffic_table():
    spec = ExperimentSpec(
        experiment=Experiment.COMPARE_CODES,
        lambdas=HEAVY_TRAFFIC,
        arrivals=20_000,
        reps=3,
        workers=0,
    )
    return run_experiment(spec)


def _ordering(table, profile: PopularityProfile, position: int, codes: tuple[ComparisonCode, ...]) -> OrderingTestCase:
    names = [f"{code}_{profile}" for code in codes]
    return OrderingTestCase(
        name=f"{profile} at lambda={table.column('lambda')[position]:.3g}",
        labels=tuple(str(code) for code in codes),
        values=tuple(table.column(name)[position] for name in names),
        half_widths=tuple(table.column(f"{name}{HALF_WIDTH_SUFFIX}")[position] for name in names),
    )


def test_uniform_access_favours_replication_then_availability_then_lrc_then_mds(heavy_traffic_table):
    order = (ComparisonCode.REPLICATION, ComparisonCode.AVAILABILITY, ComparisonCode.LRC, ComparisonCode.MDS)
    for position in range(len(HEAVY_TRAFFIC)):
        case = _ordering(heavy_traffic_table, PopularityProfile.UNIFORM, position, order)
        assert case.passes, case.diagnostic


def test_skewed_access_overloads_the_shared_local_group(heavy_traffic_table):
    # Both hot objects share one simplex block and one LRC local group, so
    # those two systems fall behind MDS once access is skewed.
    order = (ComparisonCode.REPLICATION, ComparisonCode.MDS, ComparisonCode.AVAILABILITY, ComparisonCode.LRC)
    for position in range(len(HEAVY_TRAFFIC)):
        case = _ordering(heavy_traffic_table, PopularityProfile.SKEWED, position, order)
        assert case.passes, case.diagnostic


def test_every_heavy_traffic_cell_completed(heavy_traffic_table):
    assert heavy_traffic_table.status == ExitStatus.OK
