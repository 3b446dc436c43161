"""Low-traffic download times and the commercial-code comparison table.

When requests arrive rarely enough that each one finds the system empty, the
download time of an object is the minimum of its systematic copy and the
slowest sub-copy of each recovery group. Everything here is closed form.
"""

import logging
from collections.abc import Callable
from typing import Literal

from pydantic import BaseModel, ConfigDict, Field, computed_field

from .code_domain import StorageLayout, fault_tolerance
from .core_types import ComparisonCode
from .distribution_domain import avail_survival, beta_fn
from .error_domain import InvalidParameterError

logger = logging.getLogger(__name__)

# Published table values are printed with two decimals, some truncated.
PUBLISHED_TOLERANCE = 0.01

PUBLISHED_VALUES: dict[ComparisonCode, tuple[float, float]] = {
    ComparisonCode.REPLICATION: (0.33, 0.67),
    ComparisonCode.MDS: (0.67, 0.67),
    ComparisonCode.LRC: (0.6, 0.83),
    ComparisonCode.AVAILABILITY: (0.45, 0.71),
}


class ComparisonRow(BaseModel):
    """One row of the comparison table.

    ``et_mu_raw`` uses the per-server rate ``mu``; ``et_mu_normalized`` gives
    every system the same cumulative service rate.
    """

    model_config = ConfigDict(frozen=True)

    label: str = Field(min_length=1)
    et_mu_raw: float = Field(gt=0.0)
    et_mu_normalized: float = Field(gt=0.0)
    storage_overhead: float = Field(gt=0.0)
    fault_tolerance: int = Field(ge=0)
    published_raw: float | None = None
    published_normalized: float | None = None

    @computed_field
    @property
    def mismatch(self) -> bool:
        """True when a computed value disagrees with its published counterpart."""
        pairs = ((self.et_mu_raw, self.published_raw), (self.et_mu_normalized, self.published_normalized))
        return any(published is not None and abs(value - published) > PUBLISHED_TOLERANCE for value, published in pairs)


def et_availability(r: int, t: int, mu: float) -> float:
    """Mean low-traffic download time ``beta(t+1, 1/r) / (mu r)``.

    Example:
        >>> round(et_availability(2, 3, 1.0), 4)
        0.4571
    """
    _check(r >= 1 and t >= 0 and mu > 0, f"need r >= 1, t >= 0, mu > 0; got r={r}, t={t}, mu={mu}")
    return beta_fn(t + 1, 1.0 / r) / (mu * r)


def et_availability_ccdf(s: float, r: int, t: int, mu: float) -> float:
    """Low-traffic download-time distribution ``P(T > s)``."""
    return avail_survival(s, r, t, mu)


def et_replication(t_rep: int, mu: float) -> float:
    """Mean low-traffic download time with ``t_rep`` replicas: ``1/(t_rep mu)``."""
    _check(t_rep >= 1 and mu > 0, "need t_rep >= 1 and mu > 0")
    return 1.0 / (t_rep * mu)


def et_replication_normalized(n: int, k: int, mu: float) -> float:
    """Replication at a fixed cumulative rate: ``k/(n mu)``."""
    _check(n >= k >= 1 and mu > 0, "need n >= k >= 1 and mu > 0")
    return k / (n * mu)


def et_mds(n: int, k: int, mu: float) -> float:
    """Mean low-traffic download time of a systematic ``(n, k)`` MDS code: ``k/(n mu)``."""
    _check(n >= k >= 1 and mu > 0, "need n >= k >= 1 and mu > 0")
    return k / (n * mu)


def relative_gain_per_t(r: int, t: int) -> float:
    """Relative drop in mean download time from one more recovery group: ``1/(r(t+1)+1)``."""
    _check(r >= 1 and t >= 0, "need r >= 1 and t >= 0")
    return 1.0 / (r * (t + 1) + 1)


def comparison_table(
    mu: float = 1.0,
    baseline_cumulative_rate: float | None = None,
    azure_locality: Literal[2, 3] = 3,
) -> list[ComparisonRow]:
    """Rows for 3-replication, (9,6)-MDS, the Azure LRC and the (14,6,2,3) availability code.

    Args:
        mu: Per-server service rate for the raw column.
        baseline_cumulative_rate: Cumulative rate shared by every system in
            the normalized column; defaults to ``9 mu``, the MDS system's.
        azure_locality: Which parameterization of the Azure LRC to use.
    """
    _check(mu > 0, "mu must be positive")
    baseline = baseline_cumulative_rate if baseline_cumulative_rate is not None else 9 * mu
    _check(baseline > 0, "baseline cumulative rate must be positive")

    rows = []
    for code in ComparisonCode:
        layout = code.build_layout(azure_locality)
        raw = low_traffic_time(code, layout, mu)
        normalized = low_traffic_time(code, layout, baseline / layout.params.n)
        published_raw, published_normalized = PUBLISHED_VALUES[code]
        row = ComparisonRow(
            label=_TABLE_LABELS[code](layout),
            et_mu_raw=raw * mu,
            et_mu_normalized=normalized * mu,
            storage_overhead=float(layout.params.storage_overhead),
            fault_tolerance=fault_tolerance(layout.params.min_distance or 1),
            published_raw=published_raw,
            published_normalized=published_normalized,
        )
        if row.mismatch:
            logger.warning("%s: computed %.4f / %.4f, published %s / %s", row.label, row.et_mu_raw,
                           row.et_mu_normalized, published_raw, published_normalized)
        rows.append(row)
    return rows


def low_traffic_time(code: ComparisonCode, layout: StorageLayout, rate: float) -> float:
    """Closed-form low-traffic mean download time of a comparison system at per-server ``rate``."""
    params = layout.params
    formulas: dict[ComparisonCode, Callable[[], float]] = {
        ComparisonCode.REPLICATION: lambda: et_replication(params.t + 1, rate),
        ComparisonCode.MDS: lambda: et_mds(params.n, params.k, rate),
        ComparisonCode.LRC: lambda: et_availability(params.r, params.t, rate),
        ComparisonCode.AVAILABILITY: lambda: et_availability(params.r, params.t, rate),
    }
    return formulas[code]()


_TABLE_LABELS: dict[ComparisonCode, Callable[[StorageLayout], str]] = {
    ComparisonCode.REPLICATION: lambda layout: f"{layout.params.t + 1}-replication",
    ComparisonCode.MDS: lambda layout: f"({layout.params.n},{layout.params.k})-MDS",
    ComparisonCode.LRC: lambda layout: f"{layout.params.label}-LRC",
    ComparisonCode.AVAILABILITY: lambda layout: f"{layout.params.label}-LRC",
}


def _check(condition: bool, message: str) -> None:
    if not condition:
        raise InvalidParameterError(message)
