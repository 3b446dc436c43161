"""Core vocabulary of the latency laboratory - behavioral enums.

PURPOSE:
Every closed set of cases the package branches on (access discipline, order
between service types, which copy won a race, experiment name, process exit
status, popularity profile, comparison code) is a ``StrEnum`` that carries its
own behaviour. Callers ask the enum instead of writing if/elif chains.

ARCHITECTURE NOTES:
This is the foundation layer. Enums that need richer domain modules (layouts,
simulators) import them lazily inside the method so that the domain modules
can import this one freely.

Example:
    >>> AccessMode.FA.classifies_service_types
    True
    >>> ExitStatus.OK.worst(ExitStatus.INSTABILITY).exit_code
    3
"""

from collections.abc import Callable, Sequence
from enum import StrEnum
from typing import TYPE_CHECKING, Literal

if TYPE_CHECKING:
    from .code_domain import PopularityVector, StorageLayout
    from .simulation_domain import RunOutcome, SimConfig


class AccessMode(StrEnum):
    """Fork-Join access discipline simulated for a request stream.

    WHAT: ``GA`` samples each request's object from a popularity vector, ``FA``
    sends every request to one fixed object, ``SM`` (Split-Merge) admits one
    request at a time into an idle system and ``FSM`` (Fast-Split-Merge)
    serves every request at the fastest possible aggregate rate.

    WHY: GA and FA need the full per-server event calendar; SM and FSM are the
    bounding disciplines and reduce to a single-server Lindley recursion. The
    mode knows which engine runs it.
    """

    GA = "GA"
    FA = "FA"
    SM = "SM"
    FSM = "FSM"

    @property
    def samples_popularity(self) -> bool:
        """Whether arrivals draw their object from the popularity vector."""
        return self == AccessMode.GA

    @property
    def classifies_service_types(self) -> bool:
        """Whether head-of-line epochs and service types are recorded."""
        return self == AccessMode.FA

    @property
    def simulator(self) -> "Callable[[SimConfig], RunOutcome]":
        """Engine that runs one replication under this discipline."""
        from .simulators.fork_join_simulator import run_fork_join
        from .simulators.split_merge_simulator import run_fast_split_merge, run_split_merge

        engines: dict[AccessMode, Callable[[SimConfig], RunOutcome]] = {
            AccessMode.GA: run_fork_join,
            AccessMode.FA: run_fork_join,
            AccessMode.SM: run_split_merge,
            AccessMode.FSM: run_fast_split_merge,
        }
        return engines[self]


class OrderRelation(StrEnum):
    """Stochastic order between two service-type distributions."""

    A_SLOWER = "a_slower"
    B_SLOWER = "b_slower"
    EQUAL = "equal"
    INCOMPARABLE = "incomparable"

    @classmethod
    def from_suffix_sums(cls, a_suffix: Sequence[int], b_suffix: Sequence[int]) -> "OrderRelation":
        """Classify two vectors of suffix sums ``sum_{i >= j} nu_i`` (j = 1..r-1).

        A type with pointwise smaller suffix sums has fewer early departures in
        the high-index groups and is therefore the slower one.
        """
        a_below = all(x <= y for x, y in zip(a_suffix, b_suffix, strict=True))
        b_below = all(y <= x for x, y in zip(a_suffix, b_suffix, strict=True))
        relations = {
            (True, True): cls.EQUAL,
            (True, False): cls.A_SLOWER,
            (False, True): cls.B_SLOWER,
            (False, False): cls.INCOMPARABLE,
        }
        return relations[(a_below, b_below)]

    @property
    def inverse(self) -> "OrderRelation":
        """The relation seen with the arguments swapped."""
        swapped = {
            OrderRelation.A_SLOWER: OrderRelation.B_SLOWER,
            OrderRelation.B_SLOWER: OrderRelation.A_SLOWER,
        }
        return swapped.get(self, self)


class CompletionSource(StrEnum):
    """Which copy finished a request first."""

    SYSTEMATIC = "systematic"
    RECOVERY = "recovery"

    @property
    def is_systematic(self) -> bool:
        """True for completions by the systematic server."""
        return self == CompletionSource.SYSTEMATIC


class PopularityProfile(StrEnum):
    """Named object-popularity profiles used by the code comparison."""

    UNIFORM = "uniform"
    SKEWED = "skewed"

    def build(self, k: int) -> "PopularityVector":
        """Popularity vector over ``k`` objects for this profile."""
        from .code_domain import PopularityVector

        builders: dict[PopularityProfile, Callable[[int], PopularityVector]] = {
            PopularityProfile.UNIFORM: PopularityVector.uniform,
            PopularityProfile.SKEWED: PopularityVector.skewed,
        }
        return builders[self](k)


class ComparisonCode(StrEnum):
    """The four six-object storage systems compared side by side.

    Each member builds its layout; ``LRC`` takes the Azure locality because
    both parameterizations of that code are in circulation.
    """

    REPLICATION = "replication"
    MDS = "mds"
    LRC = "lrc"
    AVAILABILITY = "availability"

    def build_layout(self, azure_locality: Literal[2, 3] = 3) -> "StorageLayout":
        """Storage layout of this system."""
        from .code_domain import azure_lrc_layout, direct_sum, mds_layout, replication_layout, simplex_layout

        builders: dict[ComparisonCode, Callable[[], StorageLayout]] = {
            ComparisonCode.REPLICATION: lambda: replication_layout(k=6, t_rep=3),
            ComparisonCode.MDS: lambda: mds_layout(n=9, k=6),
            ComparisonCode.LRC: lambda: azure_lrc_layout(azure_locality),
            ComparisonCode.AVAILABILITY: lambda: direct_sum(simplex_layout(3), simplex_layout(3)),
        }
        return builders[self]()


class Experiment(StrEnum):
    """Command-line subcommands, one per reproducible table or figure."""

    TABLE1 = "table1"
    LOWTRAFFIC = "lowtraffic"
    COMPARE_CODES = "compare-codes"
    FJFA_BOUNDS = "fjfa-bounds"
    SERVICE_FREQS = "service-freqs"
    QBD_UB = "qbd-ub"
    BOUNDS = "bounds"
    APPROX = "approx"

    @property
    def uses_simulation(self) -> bool:
        """Whether the experiment runs the discrete-event simulator."""
        return self in {Experiment.COMPARE_CODES, Experiment.FJFA_BOUNDS, Experiment.SERVICE_FREQS}

    @property
    def plot_x(self) -> str | None:
        """Column used as the x axis of the optional plot; None when not plottable."""
        axes = {
            Experiment.TABLE1: None,
            Experiment.LOWTRAFFIC: "t",
        }
        return axes.get(self, "lambda")

    @property
    def stem(self) -> str:
        """File stem of the CSV and SVG outputs."""
        return self.value.replace("-", "_")

    @classmethod
    def from_argv(cls, argv: Sequence[str]) -> tuple["Experiment", list[str]]:
        """Split ``argv`` into the subcommand and the remaining flags.

        Raises:
            ValueError: If no argument is given or it names no experiment.
        """
        if not argv:
            raise ValueError(f"missing experiment; choose one of: {', '.join(cls)}")
        return cls(argv[0]), list(argv[1:])


class ExitStatus(StrEnum):
    """Process outcome of a command-line run."""

    OK = "ok"
    INVALID_CONFIG = "invalid_config"
    INSTABILITY = "instability"

    @property
    def exit_code(self) -> int:
        """Exit code reported to the shell."""
        codes = {
            ExitStatus.OK: 0,
            ExitStatus.INVALID_CONFIG: 2,
            ExitStatus.INSTABILITY: 3,
        }
        return codes[self]

    def worst(self, other: "ExitStatus") -> "ExitStatus":
        """The more severe of two statuses."""
        return max(self, other, key=lambda status: status.exit_code)
