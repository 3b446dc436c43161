"""Behavior carried by the core enums, not their string values."""

import pytest
from pydantic import BaseModel, ConfigDict, computed_field

from src.availability_latency.models.core_types import (
    AccessMode,
    CompletionSource,
    ComparisonCode,
    Experiment,
    ExitStatus,
    OrderRelation,
    PopularityProfile,
)
from src.availability_latency.models.simulators.fork_join_simulator import run_fork_join
from src.availability_latency.models.simulators.split_merge_simulator import run_fast_split_merge, run_split_merge


class AccessModeTestCase(BaseModel):
    """How one access discipline is simulated."""

    model_config = ConfigDict(frozen=True)

    mode: AccessMode
    samples_popularity: bool
    classifies_service_types: bool

    @computed_field
    @property
    def passes(self) -> bool:
        """Both capabilities match."""
        return (
            self.mode.samples_popularity == self.samples_popularity
            and self.mode.classifies_service_types == self.classifies_service_types
        )


def test_access_mode_capabilities():
    cases = [
        AccessModeTestCase(mode=AccessMode.GA, samples_popularity=True, classifies_service_types=False),
        AccessModeTestCase(mode=AccessMode.FA, samples_popularity=False, classifies_service_types=True),
        AccessModeTestCase(mode=AccessMode.SM, samples_popularity=False, classifies_service_types=False),
        AccessModeTestCase(mode=AccessMode.FSM, samples_popularity=False, classifies_service_types=False),
    ]
    for case in cases:
        assert case.passes, f"{case.mode} capabilities wrong"


def test_access_mode_dispatches_to_its_engine():
    assert AccessMode.GA.simulator is run_fork_join
    assert AccessMode.FA.simulator is run_fork_join
    assert AccessMode.SM.simulator is run_split_merge
    assert AccessMode.FSM.simulator is run_fast_split_merge


def test_order_relation_from_suffix_sums():
    assert OrderRelation.from_suffix_sums((0, 1), (1, 1)) == OrderRelation.A_SLOWER
    assert OrderRelation.from_suffix_sums((2, 1), (1, 1)) == OrderRelation.B_SLOWER
    assert OrderRelation.from_suffix_sums((1,), (1,)) == OrderRelation.EQUAL
    assert OrderRelation.from_suffix_sums((2, 0), (1, 1)) == OrderRelation.INCOMPARABLE
    assert OrderRelation.A_SLOWER.inverse == OrderRelation.B_SLOWER
    assert OrderRelation.INCOMPARABLE.inverse == OrderRelation.INCOMPARABLE


def test_exit_status_severity():
    assert [status.exit_code for status in ExitStatus] == [0, 2, 3]
    assert ExitStatus.OK.worst(ExitStatus.INSTABILITY) == ExitStatus.INSTABILITY
    assert ExitStatus.INVALID_CONFIG.worst(ExitStatus.OK) == ExitStatus.INVALID_CONFIG
    assert ExitStatus.INSTABILITY.worst(ExitStatus.INVALID_CONFIG) == ExitStatus.INSTABILITY


def test_experiment_from_command_line():
    assert Experiment.from_argv(["qbd-ub", "--seed", "3"]) == (Experiment.QBD_UB, ["--seed", "3"])
    with pytest.raises(ValueError, match="missing experiment"):
        Experiment.from_argv([])
    with pytest.raises(ValueError):
        Experiment.from_argv(["table2"])


def test_experiment_outputs_and_axes():
    assert Experiment.COMPARE_CODES.stem == "compare_codes"
    assert Experiment.TABLE1.plot_x is None
    assert Experiment.LOWTRAFFIC.plot_x == "t"
    assert Experiment.APPROX.plot_x == "lambda"
    assert {experiment for experiment in Experiment if experiment.uses_simulation} == {
        Experiment.COMPARE_CODES,
        Experiment.FJFA_BOUNDS,
        Experiment.SERVICE_FREQS,
    }


def test_comparison_codes_build_six_object_layouts():
    for code in ComparisonCode:
        layout = code.build_layout()
        assert layout.params.k == 6, code
    assert ComparisonCode.LRC.build_layout(2).params.r == 2


def test_popularity_profiles_and_completion_sources():
    assert PopularityProfile.UNIFORM.build(6).max_p == pytest.approx(1 / 6)
    assert PopularityProfile.SKEWED.build(6).max_p == pytest.approx(0.45)
    assert CompletionSource.SYSTEMATIC.is_systematic
    assert not CompletionSource.RECOVERY.is_systematic
