"""Service-type vectors, their survival functions and exact moments."""

import math

import pytest
from pydantic import ValidationError
from scipy.integrate import quad

from src.availability_latency.models.core_types import OrderRelation
from src.availability_latency.models.distribution_domain import (
    Moments,
    ServiceTypeVector,
    avail_survival,
    beta_fn,
    enumerate_types,
    exp_sum_expansion,
    fastest_type,
    slowest_second_moment,
    slowest_type,
    type_index_r2,
    type_moments,
    type_partial_order,
    type_survival,
)
from src.availability_latency.models.error_domain import InvalidParameterError
from src.availability_latency.models.lowtraffic_domain import et_availability
from tests.shared.test_models import ClosedFormTestCase


def test_slowest_type_moments_for_locality_two_availability_one():
    moments = type_moments(slowest_type(2, 1), mu=1.0)
    cases = [
        ClosedFormTestCase(name="mean", computed=moments.mean, expected=2 / 3),
        ClosedFormTestCase(name="second moment", computed=moments.second, expected=7 / 9),
        ClosedFormTestCase(name="variance", computed=moments.variance, expected=7 / 9 - 4 / 9),
    ]
    for case in cases:
        assert case.passes, case.diagnostic


def test_slowest_type_mean_is_the_low_traffic_time():
    cases = [
        ClosedFormTestCase(
            name=f"r={r}, t={t}, mu={mu}",
            computed=type_moments(slowest_type(r, t), mu).mean,
            expected=et_availability(r, t, mu),
        )
        for r, t, mu in [(1, 0, 1.0), (2, 1, 1.0), (2, 3, 2.0), (3, 2, 0.5), (4, 4, 1.0)]
    ]
    for case in cases:
        assert case.passes, case.diagnostic


def test_second_moment_matches_the_double_binomial_sum():
    for r, t in [(1, 3), (2, 1), (2, 3), (3, 2), (5, 5)]:
        case = ClosedFormTestCase(
            name=f"r={r}, t={t}",
            computed=type_moments(slowest_type(r, t), 1.5).second,
            expected=slowest_second_moment(r, t, 1.5),
        )
        assert case.passes, case.diagnostic


def test_fastest_type_is_exponential_at_the_aggregate_rate():
    for r, t in [(2, 1), (3, 2), (2, 4)]:
        moments = type_moments(fastest_type(r, t), mu=1.0, gamma=0.5)
        rate = 0.5 + t * 1.0
        assert moments.mean == pytest.approx(1 / rate)
        assert moments.second == pytest.approx(2 / rate**2)


def test_moments_agree_with_numerical_integration_of_the_survival_function():
    for nu, gamma in [
        (ServiceTypeVector(nu=(1, 1), r=2, t=2), None),
        (ServiceTypeVector(nu=(1, 1, 1), r=3, t=3), 0.5),
        (ServiceTypeVector(nu=(0, 2, 1), r=3, t=3), 2.0),
    ]:
        mean, _ = quad(lambda s, nu=nu, gamma=gamma: type_survival(nu, s, 1.3, gamma), 0, math.inf)
        second, _ = quad(lambda s, nu=nu, gamma=gamma: 2 * s * type_survival(nu, s, 1.3, gamma), 0, math.inf)
        moments = type_moments(nu, 1.3, gamma)
        assert moments.mean == pytest.approx(mean, rel=1e-7)
        assert moments.second == pytest.approx(second, rel=1e-7)


def test_exponential_sum_expansion_reproduces_the_survival_function():
    nu = ServiceTypeVector(nu=(2, 0, 1), r=3, t=3)
    terms = exp_sum_expansion(nu, mu=1.0, gamma=0.7)

    assert sum(term.coefficient for term in terms) == 1
    for s in (0.0, 0.3, 1.7, 5.0):
        expanded = math.fsum(term.coefficient * math.exp(-term.rate * s) for term in terms)
        assert expanded == pytest.approx(type_survival(nu, s, 1.0, 0.7), abs=1e-12)


def test_lone_request_survival():
    assert avail_survival(0.0, 2, 3, 1.0) == 1.0
    assert avail_survival(1.0, 1, 0, 2.0) == pytest.approx(math.exp(-2.0))
    with pytest.raises(InvalidParameterError):
        avail_survival(-0.1, 2, 1, 1.0)
    with pytest.raises(InvalidParameterError):
        type_survival(slowest_type(2, 1), 1.0, 0.0)


def test_enumeration_starts_slowest_and_counts_compositions():
    types = enumerate_types(2, 3)

    assert [nu.nu for nu in types] == [(3, 0), (2, 1), (1, 2), (0, 3)]
    assert types[0] == slowest_type(2, 3)
    assert types[-1] == fastest_type(2, 3)
    assert len(enumerate_types(3, 2)) == 6
    assert len(enumerate_types(4, 3)) == 20
    assert all(types[i] == type_index_r2(i, 3) for i in range(4))


def test_locality_two_types_are_totally_ordered_and_means_decrease():
    types = enumerate_types(2, 4)
    means = [type_moments(nu, 1.0).mean for nu in types]

    for slower, faster in zip(types, types[1:], strict=False):
        assert type_partial_order(slower, faster) == OrderRelation.A_SLOWER
        assert type_partial_order(faster, slower) == OrderRelation.B_SLOWER
    assert means == sorted(means, reverse=True)


def test_partial_order_can_be_incomparable_beyond_locality_two():
    a = ServiceTypeVector(nu=(1, 0, 1), r=3, t=2)
    b = ServiceTypeVector(nu=(0, 2, 0), r=3, t=2)

    assert type_partial_order(a, b) == OrderRelation.INCOMPARABLE
    assert type_partial_order(a, a) == OrderRelation.EQUAL


def test_partial_order_needs_matching_parameters():
    with pytest.raises(InvalidParameterError):
        type_partial_order(slowest_type(2, 1), slowest_type(2, 2))


def test_type_vector_membership():
    assert ServiceTypeVector(nu=(2, 1), r=2, t=3).label == "2-1"
    assert ServiceTypeVector(nu=(1, 2), r=2, t=3).suffix_sums == (2,)
    with pytest.raises(ValidationError):
        ServiceTypeVector(nu=(2, 2), r=2, t=3)
    with pytest.raises(ValidationError):
        ServiceTypeVector(nu=(3,), r=2, t=3)
    with pytest.raises(InvalidParameterError):
        type_index_r2(4, 3)


def test_expansion_order_is_capped():
    with pytest.raises(InvalidParameterError):
        type_moments(slowest_type(7, 9), 1.0)


def test_beta_function_and_moment_helpers():
    assert beta_fn(2, 0.5) == pytest.approx(4 / 3)
    assert beta_fn(4, 0.5) == pytest.approx(32 / 35)
    with pytest.raises(InvalidParameterError):
        beta_fn(0, 1)

    mixed = Moments.mixture([(0.6, type_moments(type_index_r2(0, 1), 1.0)), (0.4, Moments.exponential(2.0))])
    assert mixed.mean == pytest.approx(0.6)
    assert mixed.second == pytest.approx(2 / 3)
    with pytest.raises(ValidationError):
        Moments(mean=2.0, second=1.0)


def test_every_type_survives_between_the_fastest_and_slowest_types():
    times = [0.1 * step for step in range(1, 41)]
    for r, t in ((2, 3), (3, 2)):
        fastest, slowest = fastest_type(r, t), slowest_type(r, t)
        for nu in enumerate_types(r, t):
            for s in times:
                lower, upper = type_survival(fastest, s, 1.0), type_survival(slowest, s, 1.0)
                value = type_survival(nu, s, 1.0)
                assert lower - 1e-12 <= value <= upper + 1e-12, f"{nu.label} at s={s}"


def test_partial_order_agrees_with_pointwise_survival_dominance():
    times = [0.1 * step for step in range(1, 41)]
    for r, t in ((2, 3), (3, 2), (3, 3)):
        types = enumerate_types(r, t)
        for a in types:
            for b in types:
                if type_partial_order(a, b) != OrderRelation.A_SLOWER:
                    continue
                for s in times:
                    assert type_survival(a, s, 1.0) >= type_survival(b, s, 1.0) - 1e-12, f"{a.label} vs {b.label}"
