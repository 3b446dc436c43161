"""Exact service-time distributions for Fork-Join access to availability codes.

PURPOSE:
A request that reaches the head of the line with ``d_g`` sub-copies of group
``g`` already finished completes at the minimum of its systematic copy and the
maxima of the ``r - d_g`` sub-copies still running in each group. Only the
occupancy vector ``nu_d = #{g : d_g = d}`` matters, so the service-time
distribution of any request is one of ``C(t+r-1, r-1)`` "types".

ARCHITECTURE NOTES:
With ``x = exp(-mu*s)`` the survival function of a type is
``exp(-gamma*s) * prod_d (1 - (1-x)^(r-d))^nu_d``, a polynomial in ``x``. The
polynomial is expanded exactly with integer coefficients, which turns every
moment into a finite sum of ``coefficient / rate^j`` terms. The alternating
sums cancel badly in floating point, so they are accumulated as exact
fractions and converted once. Integer coefficients stay below ``2^(r*t)``;
beyond ``MAX_EXPANSION_ORDER`` the expansion is refused.

Example:
    >>> nu = slowest_type(r=2, t=1)
    >>> type_moments(nu, mu=1.0).mean
    0.6666666666666666
"""

import math
from collections.abc import Iterator
from fractions import Fraction

import numpy as np
import numpy.typing as npt
from pydantic import BaseModel, ConfigDict, Field, computed_field, model_validator
from scipy.special import betaln, comb

from .core_types import OrderRelation
from .error_domain import InvalidParameterError

MAX_EXPANSION_ORDER = 60
MOMENT_TOLERANCE = 1e-12


class ServiceTypeVector(BaseModel):
    """Occupancy vector ``(nu_0, ..., nu_{r-1})`` of early-departure counts.

    ``nu_d`` is the number of recovery groups in which ``d`` sub-copies had
    already finished when the request reached the head of the line.

    Example:
        >>> ServiceTypeVector(nu=(1, 2), r=2, t=3).suffix_sums
        (2,)
    """

    model_config = ConfigDict(frozen=True)

    nu: tuple[int, ...] = Field(min_length=1)
    r: int = Field(ge=1)
    t: int = Field(ge=0)

    @model_validator(mode="after")
    def _check_membership(self) -> "ServiceTypeVector":
        if len(self.nu) != self.r:
            raise InvalidParameterError(f"type vector has {len(self.nu)} entries, locality is {self.r}")
        if any(count < 0 for count in self.nu):
            raise InvalidParameterError("type vector entries must be non-negative")
        if sum(self.nu) != self.t:
            raise InvalidParameterError(f"type vector sums to {sum(self.nu)}, availability is {self.t}")
        return self

    @computed_field
    @property
    def suffix_sums(self) -> tuple[int, ...]:
        """``sum_{i >= j} nu_i`` for ``j = 1..r-1``."""
        return tuple(sum(self.nu[j:]) for j in range(1, self.r))

    @property
    def label(self) -> str:
        """Compact column label, e.g. ``2-1`` for ``(2, 1)``."""
        return "-".join(str(count) for count in self.nu)


class Moments(BaseModel):
    """Mean and second moment of a non-negative random time."""

    model_config = ConfigDict(frozen=True)

    mean: float = Field(ge=0.0)
    second: float = Field(ge=0.0)

    @model_validator(mode="after")
    def _check_variance(self) -> "Moments":
        if self.second < self.mean**2 * (1.0 - MOMENT_TOLERANCE):
            raise InvalidParameterError(f"second moment {self.second} below squared mean {self.mean**2}")
        return self

    @computed_field
    @property
    def variance(self) -> float:
        """Variance, clipped at zero against rounding."""
        return max(self.second - self.mean**2, 0.0)

    @classmethod
    def exponential(cls, rate: float) -> "Moments":
        """Moments of an exponential time with the given rate."""
        if rate <= 0:
            raise InvalidParameterError("rate must be positive")
        return cls(mean=1.0 / rate, second=2.0 / rate**2)

    @classmethod
    def mixture(cls, weighted: list[tuple[float, "Moments"]]) -> "Moments":
        """Moments of a probabilistic mixture."""
        return cls(
            mean=math.fsum(weight * part.mean for weight, part in weighted),
            second=math.fsum(weight * part.second for weight, part in weighted),
        )


class ExpTerm(BaseModel):
    """One ``coefficient * exp(-rate * s)`` term of a survival function."""

    model_config = ConfigDict(frozen=True)

    coefficient: int
    rate: float = Field(gt=0.0)


def beta_fn(x: float, y: float) -> float:
    """Beta function through the log-gamma identity.

    Raises:
        InvalidParameterError: If either argument is not positive.
    """
    if x <= 0 or y <= 0:
        raise InvalidParameterError(f"beta function needs positive arguments, got ({x}, {y})")
    return math.exp(betaln(x, y))


def avail_survival(s: float, r: int, t: int, mu: float) -> float:
    """``P(T > s)`` for a lone request: ``e^{-mu s} (1 - (1 - e^{-mu s})^r)^t``."""
    _check_time(s)
    _check_rate(mu)
    x = math.exp(-mu * s)
    return x * (1.0 - (1.0 - x) ** r) ** t


def type_survival(nu: ServiceTypeVector, s: float, mu: float, gamma: float | None = None) -> float:
    """Survival function of the service type ``nu``.

    Args:
        nu: Service type.
        s: Time at which to evaluate, non-negative.
        mu: Recovery-server rate.
        gamma: Systematic-server rate; defaults to ``mu``.
    """
    _check_time(s)
    _check_rate(mu)
    systematic = _check_rate(gamma if gamma is not None else mu)
    x = math.exp(-mu * s)
    groups = math.prod((1.0 - (1.0 - x) ** (nu.r - d)) ** count for d, count in enumerate(nu.nu))
    return math.exp(-systematic * s) * groups


def exp_sum_expansion(nu: ServiceTypeVector, mu: float, gamma: float | None = None) -> tuple[ExpTerm, ...]:
    """Exact exponential-sum form ``sum_l a_l exp(-(gamma + l*mu) s)`` of ``type_survival``.

    Raises:
        InvalidParameterError: If ``r*t`` exceeds ``MAX_EXPANSION_ORDER``.
    """
    _check_rate(mu)
    systematic = _check_rate(gamma if gamma is not None else mu)
    return tuple(
        ExpTerm(coefficient=coefficient, rate=systematic + power * mu)
        for power, coefficient in enumerate(_survival_polynomial(nu))
        if coefficient != 0
    )


def _survival_polynomial(nu: ServiceTypeVector) -> list[int]:
    """Coefficients of ``prod_d (1 - (1-x)^(r-d))^nu_d`` in increasing powers of ``x``."""
    _check_order(nu.r, nu.t)
    polynomial: npt.NDArray[np.int64] = np.array([1], dtype=np.int64)
    for d, count in enumerate(nu.nu):
        factor = _complement_power_poly(nu.r - d)
        for _ in range(count):
            polynomial = np.convolve(polynomial, factor)
    return [int(coefficient) for coefficient in polynomial]


def _complement_power_poly(m: int) -> npt.NDArray[np.int64]:
    """Integer coefficients of ``1 - (1 - x)^m`` in increasing powers of ``x``."""
    coefficients = [0] + [(-1) ** (j + 1) * int(comb(m, j, exact=True)) for j in range(1, m + 1)]
    return np.array(coefficients, dtype=np.int64)


def type_moments(nu: ServiceTypeVector, mu: float, gamma: float | None = None) -> Moments:
    """Mean and second moment of service type ``nu`` by term-wise integration.

    With ``c = gamma/mu`` the term rates are ``mu (c + l)``, so both moments are
    rational functions of ``c`` scaled by ``1/mu`` and ``1/mu^2``.
    """
    _check_rate(mu)
    ratio = Fraction(_check_rate(gamma if gamma is not None else mu)) / Fraction(mu)
    coefficients = list(enumerate(_survival_polynomial(nu)))
    first = sum((Fraction(a) / (ratio + power) for power, a in coefficients if a), Fraction(0))
    second = sum((Fraction(2 * a) / (ratio + power) ** 2 for power, a in coefficients if a), Fraction(0))
    return Moments(mean=float(first) / mu, second=float(second) / mu**2)


def slowest_second_moment(r: int, t: int, mu: float) -> float:
    """Second moment of the slowest type as an explicit double binomial sum.

    ``sum_j C(t,j) (-1)^j sum_l (-1)^l C(rj,l) * 2 / (mu^2 (l+1)^2)``
    """
    _check_order(r, t)
    _check_rate(mu)
    total = sum(
        (
            Fraction(2 * (-1) ** (j + i) * int(comb(t, j, exact=True)) * int(comb(r * j, i, exact=True)), (i + 1) ** 2)
            for j in range(t + 1)
            for i in range(r * j + 1)
        ),
        Fraction(0),
    )
    return float(total) / mu**2


def enumerate_types(r: int, t: int) -> tuple[ServiceTypeVector, ...]:
    """All service types for ``(r, t)``, slowest ``(t, 0, ..., 0)`` first.

    Vectors come in descending lexicographic order, so for ``r = 2`` the
    position of a vector equals its number of early-departing groups.
    """
    if r < 1 or t < 0:
        raise InvalidParameterError("enumeration needs r >= 1 and t >= 0")
    return tuple(ServiceTypeVector(nu=nu, r=r, t=t) for nu in _compositions(t, r))


def _compositions(total: int, parts: int) -> Iterator[tuple[int, ...]]:
    if parts == 1:
        yield (total,)
        return
    for head in range(total, -1, -1):
        for tail in _compositions(total - head, parts - 1):
            yield (head, *tail)


def type_partial_order(a: ServiceTypeVector, b: ServiceTypeVector) -> OrderRelation:
    """Stochastic order between two types of the same ``(r, t)``.

    Raises:
        InvalidParameterError: If the types belong to different ``(r, t)``.
    """
    if (a.r, a.t) != (b.r, b.t):
        raise InvalidParameterError(f"cannot order types of {(a.r, a.t)} and {(b.r, b.t)}")
    return OrderRelation.from_suffix_sums(a.suffix_sums, b.suffix_sums)


def slowest_type(r: int, t: int) -> ServiceTypeVector:
    """No early departures anywhere: ``(t, 0, ..., 0)``."""
    return ServiceTypeVector(nu=(t,) + (0,) * (r - 1), r=r, t=t)


def fastest_type(r: int, t: int) -> ServiceTypeVector:
    """One sub-copy left in every group: ``(0, ..., 0, t)``."""
    return ServiceTypeVector(nu=(0,) * (r - 1) + (t,), r=r, t=t)


def type_index_r2(i: int, t: int) -> ServiceTypeVector:
    """Locality-two type-``i``: ``i`` groups with an early departure, ``nu = (t-i, i)``."""
    if not 0 <= i <= t:
        raise InvalidParameterError(f"type index {i} outside [0, {t}]")
    return ServiceTypeVector(nu=(t - i, i), r=2, t=t)


def _check_time(s: float) -> None:
    if s < 0:
        raise InvalidParameterError(f"time must be non-negative, got {s}")


def _check_rate(rate: float) -> float:
    if rate <= 0:
        raise InvalidParameterError(f"rate must be positive, got {rate}")
    return rate


def _check_order(r: int, t: int) -> None:
    if r < 1 or t < 0:
        raise InvalidParameterError("expansion needs r >= 1 and t >= 0")
    if r * t > MAX_EXPANSION_ORDER:
        raise InvalidParameterError(f"r*t = {r * t} exceeds {MAX_EXPANSION_ORDER}; alternating sums lose precision")
