"""Storage code layouts - which servers a request for each object contacts.

PURPOSE:
Queueing behaviour of a coded storage system depends only on *which* servers
hold an object's systematic copy and its recovery groups, never on the field
arithmetic behind the code. This module describes codes at exactly that level:
server indices, disjoint recovery groups and a few static metrics (storage
overhead, fault tolerance).

ARCHITECTURE NOTES:
``StorageLayout`` accepts any structurally typed content so that
``validate_layout`` can report on broken layouts instead of refusing to build
them. The builders (``simplex_layout``, ``direct_sum``, ``replication_layout``,
``single_object_layout``, ``mds_layout``, ``azure_lrc_layout``) always
validate what they produce.

Example:
    >>> layout = simplex_layout(3)
    >>> layout.params.label
    '(7,3,2,3)'
    >>> layout.placements[0].recovery_groups[0].servers
    (1, 2)
"""

import math
from fractions import Fraction
from pathlib import Path
from typing import Literal

from pydantic import BaseModel, ConfigDict, Field, computed_field, model_validator

from .error_domain import InvalidParameterError

MAX_SIMPLEX_DIMENSION = 20
POPULARITY_TOLERANCE = 1e-12


class CodeParams(BaseModel):
    """Parameters of an (n, k, r, t) code with optional minimum distance.

    WHAT: Server count ``n``, object count ``k``, locality ``r`` (recovery-group
    size) and availability ``t`` (number of disjoint recovery groups).

    WHY: Every analytic formula in the package is parameterized by some subset
    of these numbers; keeping them in one validated value means a formula can
    never receive an impossible combination such as ``1 + t*r > n``.
    """

    model_config = ConfigDict(frozen=True)

    n: int = Field(ge=1, description="Number of servers")
    k: int = Field(ge=1, description="Number of objects")
    r: int = Field(ge=1, description="Locality (recovery-group size)")
    t: int = Field(ge=0, description="Availability (number of disjoint recovery groups)")
    min_distance: int | None = Field(default=None, ge=1, description="Minimum distance, when known")

    @model_validator(mode="after")
    def _check_counts(self) -> "CodeParams":
        if self.n < self.k:
            raise InvalidParameterError(f"n={self.n} must be at least k={self.k}")
        if 1 + self.t * self.r > self.n:
            raise InvalidParameterError(f"1 + t*r = {1 + self.t * self.r} exceeds n={self.n}")
        return self

    @computed_field
    @property
    def label(self) -> str:
        """Conventional ``(n,k,r,t)`` label."""
        return f"({self.n},{self.k},{self.r},{self.t})"

    @property
    def storage_overhead(self) -> Fraction:
        """Inverse code rate n/k."""
        return storage_overhead(self)


class RecoveryGroup(BaseModel):
    """A set of servers that jointly reconstruct one object.

    ``threshold`` generalizes the usual "all servers of the group" rule to
    "any ``threshold`` of them", which is how an MDS code's recovery set
    behaves.
    """

    model_config = ConfigDict(frozen=True)

    servers: tuple[int, ...] = Field(min_length=1, description="Server indices in the group")
    threshold: int | None = Field(default=None, ge=1, description="Sub-copies needed; None means all")

    @model_validator(mode="after")
    def _check_threshold(self) -> "RecoveryGroup":
        if self.threshold is not None and self.threshold > len(self.servers):
            raise InvalidParameterError(f"threshold {self.threshold} exceeds group size {len(self.servers)}")
        return self

    @computed_field
    @property
    def needed(self) -> int:
        """Number of finished sub-copies that complete the group."""
        return self.threshold or len(self.servers)


class ObjectPlacement(BaseModel):
    """Where one object lives: its systematic server plus its recovery groups."""

    model_config = ConfigDict(frozen=True)

    systematic_server: int = Field(ge=0)
    recovery_groups: tuple[RecoveryGroup, ...] = Field(default=())

    @computed_field
    @property
    def servers(self) -> tuple[int, ...]:
        """Every server a request for this object is forked to, systematic first."""
        grouped = tuple(server for group in self.recovery_groups for server in group.servers)
        return (self.systematic_server, *grouped)


class StorageLayout(BaseModel):
    """Per-object placement of a code across ``params.n`` servers.

    Example:
        >>> layout = replication_layout(k=2, t_rep=2)
        >>> layout.servers_of(1)
        (2, 3)
    """

    model_config = ConfigDict(frozen=True)

    params: CodeParams
    placements: tuple[ObjectPlacement, ...] = Field(min_length=1)
    name: str = Field(default="layout", min_length=1, description="Human-readable code name")

    def servers_of(self, obj: int) -> tuple[int, ...]:
        """All servers contacted by a request for object ``obj`` (0-based)."""
        return self.placements[obj].servers

    @computed_field
    @property
    def title(self) -> str:
        """Label used in tables, e.g. ``(14,6,2,3)-LRC``."""
        return f"{self.params.label}-{self.name}"

    def to_json(self) -> str:
        """Serialize to the structured text format used by ``--layout-file``."""
        return self.model_dump_json(indent=2)

    @classmethod
    def from_json(cls, payload: str) -> "StorageLayout":
        """Parse a layout produced by ``to_json``."""
        return cls.model_validate_json(payload)


class LayoutReport(BaseModel):
    """Outcome of ``validate_layout``: either ok or the first violated invariant."""

    model_config = ConfigDict(frozen=True)

    violation: str | None = Field(default=None, description="First violated invariant, None when ok")
    object_index: int | None = Field(default=None, description="Object whose placement violated it")

    @computed_field
    @property
    def ok(self) -> bool:
        """True when no invariant is violated."""
        return self.violation is None


class PopularityVector(BaseModel):
    """Object request probabilities ``p_1..p_k`` summing to one.

    Example:
        >>> PopularityVector.skewed(6).p[:2]
        (0.45, 0.45)
    """

    model_config = ConfigDict(frozen=True)

    p: tuple[float, ...] = Field(min_length=1)

    @model_validator(mode="after")
    def _check_distribution(self) -> "PopularityVector":
        if any(not 0.0 <= value <= 1.0 for value in self.p):
            raise InvalidParameterError("popularities must lie in [0, 1]")
        if abs(math.fsum(self.p) - 1.0) > POPULARITY_TOLERANCE:
            raise InvalidParameterError(f"popularities sum to {math.fsum(self.p)}, not 1")
        return self

    @computed_field
    @property
    def k(self) -> int:
        """Number of objects."""
        return len(self.p)

    @computed_field
    @property
    def max_p(self) -> float:
        """Largest popularity, which sets the GA stability limit."""
        return max(self.p)

    @classmethod
    def uniform(cls, k: int) -> "PopularityVector":
        """Equal popularity over ``k`` objects."""
        if k < 1:
            raise InvalidParameterError("k must be at least 1")
        return cls(p=(1.0 / k,) * k)

    @classmethod
    def point_mass(cls, k: int, obj: int) -> "PopularityVector":
        """Every request asks for object ``obj``."""
        if not 0 <= obj < k:
            raise InvalidParameterError(f"object {obj} outside [0, {k})")
        return cls(p=tuple(float(i == obj) for i in range(k)))

    @classmethod
    def skewed(cls, k: int, hot_fraction: float = 1 / 3, hot_mass: float = 0.9) -> "PopularityVector":
        """A hot subset of objects shares ``hot_mass``; the rest share the remainder.

        With the defaults, a third of the objects receive 90% of the requests.
        """
        if k < 1 or not 0.0 < hot_fraction <= 1.0 or not 0.0 < hot_mass <= 1.0:
            raise InvalidParameterError("invalid skew parameters")
        hot = min(k, max(1, round(k * hot_fraction)))
        if hot == k:
            return cls.uniform(k)
        return cls(p=(hot_mass / hot,) * hot + ((1.0 - hot_mass) / (k - hot),) * (k - hot))


def validate_layout(layout: StorageLayout) -> LayoutReport:
    """Report the first violated layout invariant, or ok.

    Checks, in order: placement count, server index range, group count, group
    size, systematic server excluded from its own groups, pairwise
    disjointness of an object's groups.
    """
    params = layout.params
    if len(layout.placements) != params.k:
        return LayoutReport(violation=f"placement count {len(layout.placements)} != k={params.k}")

    for index, placement in enumerate(layout.placements):
        violation = _placement_violation(placement, params)
        if violation is not None:
            return LayoutReport(violation=violation, object_index=index)
    return LayoutReport()


def _placement_violation(placement: ObjectPlacement, params: CodeParams) -> str | None:
    if any(not 0 <= server < params.n for server in placement.servers):
        return "server index out of range"
    if len(placement.recovery_groups) != params.t:
        return f"group count {len(placement.recovery_groups)} != t={params.t}"
    seen: set[int] = set()
    for group in placement.recovery_groups:
        members = set(group.servers)
        if len(group.servers) != params.r or len(members) != len(group.servers):
            return f"group size {len(members)} != r={params.r}"
        if placement.systematic_server in members:
            return "group contains the systematic server"
        if seen & members:
            return "groups not disjoint"
        seen |= members
    return None


def _checked(layout: StorageLayout) -> StorageLayout:
    report = validate_layout(layout)
    if not report.ok:
        raise InvalidParameterError(f"{layout.title}: {report.violation}")
    return layout


def simplex_layout(m: int) -> StorageLayout:
    """Binary Simplex code of dimension ``m``.

    Servers are labeled by the nonzero length-``m`` binary vectors (server
    index = label - 1). Object ``i`` sits on the unit vector ``e_i`` and is
    recoverable from every pair ``{v, v xor e_i}`` of the remaining servers.

    Args:
        m: Code dimension, between 1 and 20.

    Returns:
        A ``(2^m - 1, m, 2, 2^(m-1) - 1)`` layout.

    Raises:
        InvalidParameterError: If ``m`` is outside ``[1, 20]``.
    """
    if not 1 <= m <= MAX_SIMPLEX_DIMENSION:
        raise InvalidParameterError(f"simplex dimension m={m} outside [1, {MAX_SIMPLEX_DIMENSION}]")
    n = 2**m - 1
    placements = []
    for i in range(m):
        unit = 1 << i
        pairs = sorted(
            (label, label ^ unit) for label in range(1, n + 1) if label != unit and label < label ^ unit
        )
        groups = tuple(RecoveryGroup(servers=(low - 1, high - 1)) for low, high in pairs)
        placements.append(ObjectPlacement(systematic_server=unit - 1, recovery_groups=groups))
    # Simplex codes meet d = 2^(m-1).
    params = CodeParams(n=n, k=m, r=2, t=2 ** (m - 1) - 1, min_distance=2 ** (m - 1))
    return _checked(StorageLayout(params=params, placements=tuple(placements), name="Simplex"))


def direct_sum(a: StorageLayout, b: StorageLayout) -> StorageLayout:
    """Place two codes side by side; ``b``'s servers are shifted past ``a``'s.

    Raises:
        InvalidParameterError: If the two layouts differ in ``r`` or ``t``.
    """
    if (a.params.r, a.params.t) != (b.params.r, b.params.t):
        raise InvalidParameterError(
            f"direct sum needs equal (r,t): {(a.params.r, a.params.t)} vs {(b.params.r, b.params.t)}"
        )
    shift = a.params.n
    shifted = tuple(
        ObjectPlacement(
            systematic_server=placement.systematic_server + shift,
            recovery_groups=tuple(
                RecoveryGroup(servers=tuple(s + shift for s in group.servers), threshold=group.threshold)
                for group in placement.recovery_groups
            ),
        )
        for placement in b.placements
    )
    distances = [d for d in (a.params.min_distance, b.params.min_distance) if d is not None]
    params = CodeParams(
        n=a.params.n + b.params.n,
        k=a.params.k + b.params.k,
        r=a.params.r,
        t=a.params.t,
        min_distance=min(distances) if len(distances) == 2 else None,
    )
    name = a.name if a.name == b.name else f"{a.name}+{b.name}"
    return _checked(StorageLayout(params=params, placements=a.placements + shifted, name=name))


def replication_layout(k: int, t_rep: int) -> StorageLayout:
    """``t_rep`` copies of each object on dedicated servers (groups of size one)."""
    if k < 1 or t_rep < 1:
        raise InvalidParameterError("replication needs k >= 1 and t_rep >= 1")
    placements = tuple(
        ObjectPlacement(
            systematic_server=obj * t_rep,
            recovery_groups=tuple(RecoveryGroup(servers=(obj * t_rep + c,)) for c in range(1, t_rep)),
        )
        for obj in range(k)
    )
    params = CodeParams(n=k * t_rep, k=k, r=1, t=t_rep - 1, min_distance=t_rep)
    return _checked(StorageLayout(params=params, placements=placements, name="replication"))


def single_object_layout(r: int, t: int) -> StorageLayout:
    """One object on server 0 with ``t`` disjoint groups of ``r`` fresh servers.

    Fixed-object access only ever touches the requested object's servers, so
    this is the smallest layout exhibiting any ``(r, t)`` pair.
    """
    if r < 1 or t < 0:
        raise InvalidParameterError("single-object layout needs r >= 1 and t >= 0")
    groups = tuple(RecoveryGroup(servers=tuple(range(1 + g * r, 1 + (g + 1) * r))) for g in range(t))
    params = CodeParams(n=1 + r * t, k=1, r=r, t=t)
    placement = ObjectPlacement(systematic_server=0, recovery_groups=groups)
    return _checked(StorageLayout(params=params, placements=(placement,), name="fork-join"))


def mds_layout(n: int, k: int) -> StorageLayout:
    """Systematic (n, k) MDS code: systematic copy or any k of the other n-1 servers."""
    if not n > k >= 1:
        raise InvalidParameterError("MDS layout needs n > k >= 1")
    placements = tuple(
        ObjectPlacement(
            systematic_server=obj,
            recovery_groups=(RecoveryGroup(servers=tuple(s for s in range(n) if s != obj), threshold=k),),
        )
        for obj in range(k)
    )
    params = CodeParams(n=n, k=k, r=n - 1, t=1, min_distance=n - k + 1)
    return _checked(StorageLayout(params=params, placements=placements, name="MDS"))


def azure_lrc_layout(locality: Literal[2, 3] = 3) -> StorageLayout:
    """Six-object local reconstruction code on ten servers.

    ``locality=3`` is the ``(10,6,3,1)`` parameterization: two local groups of
    three data servers, two local parities and two global parities.
    ``locality=2`` is the ``(10,6,2,1)`` one: three local groups of two data
    servers, three local parities and one global parity. Global parities are
    never contacted by the Fork-Join access.
    """
    layouts = {
        3: (((0, 1, 2), 6), ((3, 4, 5), 7)),
        2: (((0, 1), 6), ((2, 3), 7), ((4, 5), 8)),
    }
    if locality not in layouts:
        raise InvalidParameterError(f"unsupported LRC locality {locality}")
    placements: list[ObjectPlacement] = []
    for data, parity in layouts[locality]:
        for obj in data:
            peers = tuple(d for d in data if d != obj)
            group = RecoveryGroup(servers=(*peers, parity))
            placements.append(ObjectPlacement(systematic_server=obj, recovery_groups=(group,)))
    # Distance bound for LRCs: n - k - ceil(k/r) + 2.
    min_distance = 10 - 6 - math.ceil(6 / locality) + 2
    params = CodeParams(n=10, k=6, r=locality, t=1, min_distance=min_distance)
    return _checked(StorageLayout(params=params, placements=tuple(placements), name="LRC"))


def storage_overhead(params: CodeParams) -> Fraction:
    """Inverse code rate n/k as an exact fraction."""
    return Fraction(params.n, params.k)


def fault_tolerance(min_distance: int) -> int:
    """Number of arbitrary server failures a code of distance ``d`` survives: ``d - 1``."""
    if min_distance < 1:
        raise InvalidParameterError("minimum distance must be at least 1")
    return min_distance - 1


def save_layout(layout: StorageLayout, path: Path) -> None:
    """Write a layout in its JSON text form."""
    path.write_text(layout.to_json(), encoding="utf-8")


def load_layout(path: Path) -> StorageLayout:
    """Read and validate a layout file.

    Raises:
        InvalidParameterError: If the file parses but violates a layout invariant.
    """
    return _checked(StorageLayout.from_json(path.read_text(encoding="utf-8")))
