"""Domain models of the latency laboratory.

## Domain Organization

- **core_types**: behavioral enums (access mode, order relation, experiment, exit status)
- **error_domain**: exception hierarchy
- **code_domain**: storage layouts, recovery groups, popularity vectors
- **distribution_domain**: service-type vectors and their survival functions and moments
- **lowtraffic_domain**: closed-form low-traffic download times and the comparison table
- **queueing_domain**: Split-Merge / Fast-Split-Merge bounds, M/G/1 approximations, high-traffic fractions
- **qbd_domain**: matrix-analytic upper bound for availability one and locality two
- **simulation_domain**: simulation configuration, results, replication
- **experiment_domain**: resolved run settings and CSV tables
- **simulators/**: event engines dispatched by ``AccessMode``
"""

from .code_domain import PopularityVector, StorageLayout
from .core_types import AccessMode, Experiment, ExitStatus
from .experiment_domain import CsvTable, ExperimentSpec
from .simulation_domain import SimConfig, SimResult

__all__ = [
    "AccessMode",
    "CsvTable",
    "Experiment",
    "ExitStatus",
    "ExperimentSpec",
    "PopularityVector",
    "SimConfig",
    "SimResult",
    "StorageLayout",
]
