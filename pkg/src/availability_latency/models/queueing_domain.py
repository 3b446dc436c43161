"""Queueing-regime bounds and M/G/1 approximations for Fork-Join access.

PURPOSE:
Under load, a request's copies wait behind earlier requests and some of its
recovery sub-copies may finish before the request reaches the head of the
line. Exact analysis is out of reach, so this module brackets the mean
download time:

- Split-Merge (one request in service at a time, slowest service type) is an
  upper bound and is an M/G/1 queue.
- Fast-Split-Merge (every request at the fastest type) is a lower bound and
  is an M/M/1 queue.
- Between them, mixtures of service types weighted by their long-run
  frequencies give M/G/1 approximations.

ARCHITECTURE NOTES:
Every formula that has a stability condition raises ``InstabilityError``
carrying the violated constraint, so sweeps can mark the cell and move on.
Approximations whose internal recursion breaks down raise
``ApproximationDomainError`` instead.

Example:
    >>> round(sm_mean_upper(1.0, r=2, t=1, mu=1.0), 4)
    1.8333
"""

import math
from collections.abc import Sequence
from fractions import Fraction

from pydantic import BaseModel, ConfigDict, Field, computed_field, model_validator
from scipy.special import comb

from .code_domain import PopularityVector
from .distribution_domain import (
    Moments,
    ServiceTypeVector,
    enumerate_types,
    slowest_type,
    type_index_r2,
    type_moments,
)
from .error_domain import ApproximationDomainError, InstabilityError, InvalidParameterError
from .lowtraffic_domain import et_availability

FREQUENCY_TOLERANCE = 1e-12


class Mg1Spec(BaseModel):
    """Poisson arrivals at rate ``arrival_rate`` into a single FCFS server."""

    model_config = ConfigDict(frozen=True)

    arrival_rate: float = Field(ge=0.0)
    service: Moments

    @computed_field
    @property
    def utilization(self) -> float:
        """Offered load ``lambda * E[S]``."""
        return self.arrival_rate * self.service.mean


class TypeFrequencies(BaseModel):
    """Long-run fraction of requests served with each service type.

    ``f`` is aligned with ``enumerate_types(r, t)``; for locality two the
    position is the number of early-departing groups.
    """

    model_config = ConfigDict(frozen=True)

    r: int = Field(ge=1)
    t: int = Field(ge=0)
    f: tuple[float, ...] = Field(min_length=1)

    @model_validator(mode="after")
    def _check_distribution(self) -> "TypeFrequencies":
        expected = int(comb(self.t + self.r - 1, self.r - 1, exact=True))
        if len(self.f) != expected:
            raise InvalidParameterError(f"{len(self.f)} frequencies for {expected} service types")
        if any(not 0.0 <= value <= 1.0 for value in self.f):
            raise InvalidParameterError("frequencies must lie in [0, 1]")
        if abs(math.fsum(self.f) - 1.0) > FREQUENCY_TOLERANCE:
            raise InvalidParameterError(f"frequencies sum to {math.fsum(self.f)}, not 1")
        return self

    @property
    def types(self) -> tuple[ServiceTypeVector, ...]:
        """Service types in the order of ``f``."""
        return enumerate_types(self.r, self.t)

    def frequency(self, nu: ServiceTypeVector) -> float:
        """Frequency of one service type."""
        return self.f[self.types.index(nu)]

    @classmethod
    def point_mass(cls, nu: ServiceTypeVector) -> "TypeFrequencies":
        """All requests served with type ``nu``."""
        types = enumerate_types(nu.r, nu.t)
        return cls(r=nu.r, t=nu.t, f=tuple(float(candidate == nu) for candidate in types))

    @classmethod
    def from_counts(cls, r: int, t: int, counts: Sequence[int]) -> "TypeFrequencies":
        """Normalize observed type counts.

        Raises:
            InvalidParameterError: If no request was classified.
        """
        total = sum(counts)
        if total <= 0:
            raise InvalidParameterError("no classified requests")
        return cls(r=r, t=t, f=tuple(count / total for count in counts))


class HighTrafficRates(BaseModel):
    """Rates of the availability-one, locality-two system.

    ``gamma`` serves the systematic copy, ``alpha`` and ``beta`` the two
    recovery sub-copies.
    """

    model_config = ConfigDict(frozen=True)

    gamma: float = Field(gt=0.0)
    alpha: float = Field(gt=0.0)
    beta: float = Field(gt=0.0)

    @computed_field
    @property
    def nu_total(self) -> float:
        """Total service rate ``gamma + alpha + beta``."""
        return self.gamma + self.alpha + self.beta

    @computed_field
    @property
    def lead_ratios(self) -> tuple[float, float]:
        """Geometric ratios of the lead chain: ``alpha/(beta+gamma)`` and ``beta/(alpha+gamma)``."""
        return self.alpha / (self.beta + self.gamma), self.beta / (self.alpha + self.gamma)

    @property
    def leads_are_stable(self) -> bool:
        """Whether neither recovery server runs away from the other."""
        return all(ratio < 1.0 for ratio in self.lead_ratios)


class HighTrafficFractions(BaseModel):
    """High-traffic estimates of service-type and completion-source fractions."""

    model_config = ConfigDict(frozen=True)

    f0_hat: float = Field(ge=0.0, le=1.0)
    f1_hat: float = Field(ge=0.0, le=1.0)
    ws_hat: float = Field(ge=0.0, le=1.0)
    wr_hat: float = Field(ge=0.0, le=1.0)


class BirthDeathSteadyState(BaseModel):
    """Stationary law of the recovery-server lead when every queue is busy.

    State ``(a, 0)`` means server alpha has finished ``a`` more sub-copies than
    beta; ``(0, b)`` the reverse.

    Example:
        >>> chain = birth_death_steady_state(HighTrafficRates(gamma=1, alpha=1, beta=1))
        >>> round(chain.p00, 4), round(chain.departure_rate, 4)
        (0.3333, 1.6667)
    """

    model_config = ConfigDict(frozen=True)

    rates: HighTrafficRates
    p00: float = Field(gt=0.0, le=1.0)

    def prob(self, alpha_lead: int, beta_lead: int) -> float:
        """Probability of lead state ``(alpha_lead, beta_lead)``; zero when both lead."""
        if alpha_lead < 0 or beta_lead < 0:
            raise InvalidParameterError("leads are non-negative")
        if alpha_lead and beta_lead:
            return 0.0
        ratio_alpha, ratio_beta = self.rates.lead_ratios
        return ratio_alpha**alpha_lead * ratio_beta**beta_lead * self.p00

    @computed_field
    @property
    def alpha_leads(self) -> float:
        """Probability that server alpha is ahead."""
        ratio = self.rates.lead_ratios[0]
        return self.p00 * ratio / (1.0 - ratio)

    @computed_field
    @property
    def beta_leads(self) -> float:
        """Probability that server beta is ahead."""
        ratio = self.rates.lead_ratios[1]
        return self.p00 * ratio / (1.0 - ratio)

    @computed_field
    @property
    def departure_rate(self) -> float:
        """Long-run completion rate with every queue busy: the system's capacity."""
        rates = self.rates
        return rates.gamma + rates.alpha * self.beta_leads + rates.beta * self.alpha_leads


def pk_mean(spec: Mg1Spec) -> float:
    """Pollaczek-Khinchine mean sojourn time ``E[S] + lambda E[S^2] / (2 (1 - lambda E[S]))``.

    Raises:
        InstabilityError: If ``lambda E[S] >= 1``.
    """
    if spec.utilization >= 1.0:
        raise InstabilityError("lambda*E[S] >= 1")
    service = spec.service
    return service.mean + spec.arrival_rate * service.second / (2.0 * (1.0 - spec.utilization))


def fjga_ccdf_lower(x: float, lambda_: float, p: PopularityVector, t: int, mu: float) -> float:
    """Lower bound on ``P(T > x)`` under popularity-driven access.

    Each object behaves at best like an M/M/1 queue served at the aggregate
    rate ``(t+1) mu`` and fed by its share ``p_i lambda`` of the arrivals.
    """
    _check_fork_join(lambda_ * p.max_p, t, mu)
    if x < 0:
        raise InvalidParameterError("x must be non-negative")
    aggregate = (t + 1) * mu
    return math.fsum(p_i * math.exp(-(aggregate - p_i * lambda_) * x) for p_i in p.p)


def fjga_mean_lower(lambda_: float, p: PopularityVector, t: int, mu: float) -> float:
    """Lower bound ``sum_i p_i / ((t+1) mu - p_i lambda)`` on the mean download time."""
    _check_fork_join(lambda_ * p.max_p, t, mu)
    aggregate = (t + 1) * mu
    return math.fsum(p_i / (aggregate - p_i * lambda_) for p_i in p.p)


def fjfa_ccdf_lower(x: float, lambda_: float, t: int, mu: float) -> float:
    """Fixed-object lower bound ``exp(-((t+1) mu - lambda) x)`` on ``P(T > x)``."""
    _check_fork_join(lambda_, t, mu)
    if x < 0:
        raise InvalidParameterError("x must be non-negative")
    return math.exp(-((t + 1) * mu - lambda_) * x)


def fsm_mean_lower(lambda_: float, t: int, mu: float) -> float:
    """Fast-Split-Merge mean ``1/((t+1) mu - lambda)``, a lower bound for fixed-object access."""
    _check_fork_join(lambda_, t, mu)
    return 1.0 / ((t + 1) * mu - lambda_)


def sm_mean_upper(lambda_: float, r: int, t: int, mu: float) -> float:
    """Split-Merge mean download time, an upper bound for Fork-Join access.

    Raises:
        InstabilityError: If ``lambda >= 1/eta`` with ``eta`` the low-traffic mean.
    """
    _check_sm_stable(lambda_, r, t, mu)
    return pk_mean(Mg1Spec(arrival_rate=lambda_, service=type_moments(slowest_type(r, t), mu)))


def sm_mean_upper_closed_form(lambda_: float, r: int, t: int, mu: float) -> float:
    """``eta + lambda * sum_j C(t,j)(-1)^j sum_l (-1)^l C(rj,l)(l+1)^-2 / (mu^2 (1 - lambda eta))``.

    Evaluated without the type-moment machinery; used to cross-check
    ``sm_mean_upper``.
    """
    eta = _check_sm_stable(lambda_, r, t, mu)
    double_sum = sum(
        (
            Fraction((-1) ** (i + j) * comb(t, j, exact=True) * comb(r * j, i, exact=True), (i + 1) ** 2)
            for j in range(t + 1)
            for i in range(r * j + 1)
        ),
        Fraction(0),
    )
    return eta + lambda_ * float(double_sum) / (mu**2 * (1.0 - lambda_ * eta))


def sm_capacity(r: int, t: int, mu: float) -> float:
    """Largest arrival rate Split-Merge sustains: ``1/eta``."""
    return 1.0 / et_availability(r, t, mu)


def sm_load(lambda_: float, r: int, t: int, mu: float) -> float:
    """Offered load ``lambda * eta`` relative to the Split-Merge capacity."""
    return lambda_ * et_availability(r, t, mu)


def mixture_moments(freqs: TypeFrequencies, mu: float, gamma: float | None = None) -> Moments:
    """Service moments of the type mixture weighted by ``freqs``."""
    return Moments.mixture(
        [(weight, type_moments(nu, mu, gamma)) for nu, weight in zip(freqs.types, freqs.f, strict=True) if weight]
    )


def approx_mixture_mean(freqs: TypeFrequencies, lambda_: float, mu: float) -> float:
    """M/G/1 approximation fed with the type mixture of ``freqs``."""
    return pk_mean(Mg1Spec(arrival_rate=lambda_, service=mixture_moments(freqs, mu)))


def approx_r2_weights(lambda_: float, t: int, mu: float) -> TypeFrequencies:
    """Estimated type frequencies for locality two from the lead recursion.

    ``rho_0 = lambda E[V] / (t (1 - lambda E[V]))`` and for ``0 < i < t``::

        rho_i = (1 - (1 - lambda E[V]) (1 + sum_{k<i} prod_{l<=k} rho_l))
                / ((1 - lambda E[V]) (t - i) prod_{k<i} rho_k)

    where ``E[V]`` is the average of the type means. Type ``i`` gets weight
    proportional to ``prod_{j<i} rho_j``. ``rho_t`` is never needed.

    Raises:
        ApproximationDomainError: If ``lambda E[V] >= 1`` or a ``rho`` leaves ``[0, inf)``.
    """
    if lambda_ < 0 or t < 0:
        raise InvalidParameterError("need lambda >= 0 and t >= 0")
    if t == 0:
        return TypeFrequencies(r=2, t=0, f=(1.0,))
    mean_v = math.fsum(type_moments(type_index_r2(i, t), mu).mean for i in range(t + 1)) / (t + 1)
    idle = 1.0 - lambda_ * mean_v
    if idle <= 0.0:
        raise ApproximationDomainError(f"lambda*E[V] = {lambda_ * mean_v:.4f} >= 1")

    products = [1.0]  # prod_{j<i} rho_j for i = 0..t
    for i in range(t):
        if products[i] == 0.0:
            products.append(0.0)
            continue
        numerator = 1.0 - idle * (1.0 + math.fsum(products[1:]))
        rho = numerator / (idle * (t - i) * products[i])
        if not math.isfinite(rho) or rho < 0.0:
            raise ApproximationDomainError(f"rho_{i} = {rho} outside [0, inf)")
        products.append(products[i] * rho)
    total = math.fsum(products)
    return TypeFrequencies(r=2, t=t, f=tuple(product / total for product in products))


def approx_r2_mean(lambda_: float, t: int, mu: float) -> float:
    """Locality-two M/G/1 approximation with ``approx_r2_weights`` as the mixture."""
    return approx_mixture_mean(approx_r2_weights(lambda_, t, mu), lambda_, mu)


def hightraffic_fractions(rates: HighTrafficRates) -> HighTrafficFractions:
    """High-traffic type and completion-source fractions for ``alpha = beta = mu``.

    With ``nu = gamma + 2 mu``: ``f0 = ws = gamma nu / (gamma nu + 2 mu^2)`` and
    ``f1 = wr = 2 mu^2 / (gamma nu + 2 mu^2)``.
    """
    if not math.isclose(rates.alpha, rates.beta):
        raise InvalidParameterError("high-traffic fractions need alpha == beta")
    mu = rates.alpha
    slow = rates.gamma * rates.nu_total
    fast = 2.0 * mu**2
    f0 = slow / (slow + fast)
    f1 = fast / (slow + fast)
    return HighTrafficFractions(f0_hat=f0, f1_hat=f1, ws_hat=f0, wr_hat=f1)


def r2t1_service_moment_lb(gamma: float, mu: float) -> Moments:
    """Lower bounds on the service moments of the availability-one, locality-two system.

    Mixes the type-0 and type-1 moments (systematic rate ``gamma``, recovery
    rate ``mu``) with the high-traffic fractions.
    """
    fractions = hightraffic_fractions(HighTrafficRates(gamma=gamma, alpha=mu, beta=mu))
    return Moments.mixture(
        [
            (fractions.f0_hat, type_moments(type_index_r2(0, 1), mu, gamma)),
            (fractions.f1_hat, type_moments(type_index_r2(1, 1), mu, gamma)),
        ]
    )


def hightraffic_approx_mean(lambda_: float, gamma: float, mu: float) -> float:
    """Pollaczek-Khinchine mean with the high-traffic service-moment bounds."""
    return pk_mean(Mg1Spec(arrival_rate=lambda_, service=r2t1_service_moment_lb(gamma, mu)))


def birth_death_steady_state(rates: HighTrafficRates) -> BirthDeathSteadyState:
    """Stationary lead distribution with ``p00 = (gamma^2 - (alpha-beta)^2) / (gamma (alpha+beta+gamma))``.

    Raises:
        InstabilityError: If either geometric ratio is at least one.
    """
    if not rates.leads_are_stable:
        raise InstabilityError("alpha >= beta+gamma or beta >= alpha+gamma")
    p00 = (rates.gamma**2 - (rates.alpha - rates.beta) ** 2) / (rates.gamma * rates.nu_total)
    return BirthDeathSteadyState(rates=rates, p00=p00)


def fa_r2t1_capacity(gamma: float, alpha: float, beta: float) -> float:
    """Throughput limit of fixed-object access with availability one and locality two."""
    return birth_death_steady_state(HighTrafficRates(gamma=gamma, alpha=alpha, beta=beta)).departure_rate


def _check_fork_join(lambda_: float, t: int, mu: float) -> None:
    if lambda_ < 0 or t < 0 or mu <= 0:
        raise InvalidParameterError("need lambda >= 0, t >= 0 and mu > 0")
    if lambda_ >= (t + 1) * mu:
        raise InstabilityError("lambda >= (t+1)*mu")


def _check_sm_stable(lambda_: float, r: int, t: int, mu: float) -> float:
    if lambda_ < 0:
        raise InvalidParameterError("lambda must be non-negative")
    eta = et_availability(r, t, mu)
    if lambda_ * eta >= 1.0:
        raise InstabilityError("lambda >= 1/eta")
    return eta
