"""Storage layouts: builders, invariants and the static code metrics."""

from fractions import Fraction

import pytest
from pydantic import BaseModel, ConfigDict, ValidationError, computed_field

from src.availability_latency.models.code_domain import (
    CodeParams,
    ObjectPlacement,
    PopularityVector,
    RecoveryGroup,
    StorageLayout,
    azure_lrc_layout,
    direct_sum,
    fault_tolerance,
    load_layout,
    mds_layout,
    replication_layout,
    save_layout,
    simplex_layout,
    single_object_layout,
    validate_layout,
)
from src.availability_latency.models.error_domain import InvalidParameterError


class LayoutShapeTestCase(BaseModel):
    """A built layout with the parameters and metrics it must report."""

    model_config = ConfigDict(frozen=True)

    layout: StorageLayout
    expected_label: str
    expected_overhead: Fraction
    expected_fault_tolerance: int

    @computed_field
    @property
    def passes(self) -> bool:
        """Label, overhead, fault tolerance and validity all match."""
        params = self.layout.params
        return (
            params.label == self.expected_label
            and params.storage_overhead == self.expected_overhead
            and fault_tolerance(params.min_distance or 1) == self.expected_fault_tolerance
            and validate_layout(self.layout).ok
        )

    @computed_field
    @property
    def diagnostic(self) -> str:
        """What the layout actually reports."""
        params = self.layout.params
        return f"{self.layout.title}: overhead {params.storage_overhead}, distance {params.min_distance}"


def _broken(groups: tuple[tuple[int, ...], ...], systematic: int = 0) -> StorageLayout:
    params = CodeParams(n=5, k=1, r=2, t=2)
    placement = ObjectPlacement(
        systematic_server=systematic, recovery_groups=tuple(RecoveryGroup(servers=group) for group in groups)
    )
    return StorageLayout(params=params, placements=(placement,))


def test_comparison_layouts_report_their_metrics():
    cases = [
        LayoutShapeTestCase(
            layout=replication_layout(k=6, t_rep=3),
            expected_label="(18,6,1,2)",
            expected_overhead=Fraction(3),
            expected_fault_tolerance=2,
        ),
        LayoutShapeTestCase(
            layout=mds_layout(n=9, k=6),
            expected_label="(9,6,8,1)",
            expected_overhead=Fraction(3, 2),
            expected_fault_tolerance=3,
        ),
        LayoutShapeTestCase(
            layout=azure_lrc_layout(3),
            expected_label="(10,6,3,1)",
            expected_overhead=Fraction(5, 3),
            expected_fault_tolerance=3,
        ),
        LayoutShapeTestCase(
            layout=azure_lrc_layout(2),
            expected_label="(10,6,2,1)",
            expected_overhead=Fraction(5, 3),
            expected_fault_tolerance=2,
        ),
        LayoutShapeTestCase(
            layout=direct_sum(simplex_layout(3), simplex_layout(3)),
            expected_label="(14,6,2,3)",
            expected_overhead=Fraction(7, 3),
            expected_fault_tolerance=3,
        ),
    ]
    for case in cases:
        assert case.passes, case.diagnostic


def test_simplex_groups_are_disjoint_pairs_completing_the_unit_vector():
    layout = simplex_layout(3)

    for obj, placement in enumerate(layout.placements):
        unit = 1 << obj
        assert placement.systematic_server == unit - 1
        assert len(placement.recovery_groups) == 3
        for group in placement.recovery_groups:
            low, high = (server + 1 for server in group.servers)
            assert low ^ high == unit
    assert layout.placements[0].recovery_groups[0].servers == (1, 2)


def test_simplex_dimension_outside_range_is_rejected():
    with pytest.raises(InvalidParameterError):
        simplex_layout(0)
    with pytest.raises(InvalidParameterError):
        simplex_layout(21)


def test_direct_sum_shifts_second_code_past_the_first():
    layout = direct_sum(simplex_layout(3), simplex_layout(3))

    assert layout.servers_of(3)[0] == 7
    assert all(server >= 7 for server in layout.servers_of(5))
    assert layout.params.min_distance == 4


def test_direct_sum_needs_matching_locality_and_availability():
    with pytest.raises(InvalidParameterError):
        direct_sum(simplex_layout(3), replication_layout(k=2, t_rep=2))


def test_replication_and_lrc_contact_the_expected_servers():
    assert replication_layout(k=6, t_rep=3).servers_of(1) == (3, 4, 5)
    assert azure_lrc_layout(3).servers_of(0) == (0, 1, 2, 6)
    assert azure_lrc_layout(3).servers_of(4) == (4, 3, 5, 7)
    assert azure_lrc_layout(2).servers_of(0) == (0, 1, 6)


def test_mds_recovery_is_any_k_of_the_other_servers():
    group = mds_layout(n=9, k=6).placements[2].recovery_groups[0]

    assert group.needed == 6
    assert len(group.servers) == 8
    assert 2 not in group.servers


def test_single_object_layout_uses_fresh_servers_per_group():
    layout = single_object_layout(r=2, t=3)

    assert layout.params.n == 7
    assert [group.servers for group in layout.placements[0].recovery_groups] == [(1, 2), (3, 4), (5, 6)]
    assert single_object_layout(r=3, t=0).servers_of(0) == (0,)


def test_validate_layout_reports_the_first_violation():
    cases = {
        "groups not disjoint": _broken(((1, 2), (2, 3))),
        "group contains the systematic server": _broken(((0, 1), (2, 3))),
        "group count 1 != t=2": _broken(((1, 2),)),
        "server index out of range": _broken(((1, 2), (3, 9))),
    }
    for expected, layout in cases.items():
        report = validate_layout(layout)
        assert not report.ok
        assert report.violation == expected
        assert report.object_index == 0


def test_validate_layout_checks_placement_count():
    layout = single_object_layout(2, 1)
    params = CodeParams(n=3, k=2, r=2, t=1)
    report = validate_layout(StorageLayout(params=params, placements=layout.placements))

    assert report.violation == "placement count 1 != k=2"
    assert report.object_index is None


def test_code_params_reject_impossible_combinations():
    with pytest.raises(ValidationError):
        CodeParams(n=3, k=4, r=1, t=1)
    with pytest.raises(ValidationError):
        CodeParams(n=6, k=1, r=2, t=3)
    with pytest.raises(ValidationError):
        RecoveryGroup(servers=(1, 2), threshold=3)


def test_fault_tolerance_needs_positive_distance():
    assert fault_tolerance(4) == 3
    with pytest.raises(InvalidParameterError):
        fault_tolerance(0)


def test_popularity_profiles():
    skewed = PopularityVector.skewed(6)

    assert skewed.p == pytest.approx((0.45, 0.45, 0.025, 0.025, 0.025, 0.025))
    assert skewed.max_p == pytest.approx(0.45)
    assert PopularityVector.uniform(4).p == (0.25,) * 4
    assert PopularityVector.point_mass(3, 1).p == (0.0, 1.0, 0.0)
    assert PopularityVector.skewed(1).p == (1.0,)


def test_popularity_must_be_a_distribution():
    with pytest.raises(ValidationError):
        PopularityVector(p=(0.5, 0.6))
    with pytest.raises(ValidationError):
        PopularityVector(p=(1.5, -0.5))
    with pytest.raises(InvalidParameterError):
        PopularityVector.point_mass(3, 3)


def test_layout_file_round_trip(tmp_path):
    layout = direct_sum(simplex_layout(3), simplex_layout(3))
    path = tmp_path / "layout.json"

    save_layout(layout, path)

    assert load_layout(path) == layout


def test_loading_a_broken_layout_is_rejected(tmp_path):
    path = tmp_path / "broken.json"
    save_layout(_broken(((1, 2), (2, 3))), path)

    with pytest.raises(InvalidParameterError, match="groups not disjoint"):
        load_layout(path)
