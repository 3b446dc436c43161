"""Download-latency laboratory for distributed storage with availability codes.

## Public API

```python
# Command-line usage
from availability_latency import main

main()  # availability-latency fjfa-bounds --r 2 --t 3 --reps 5

# Programmatic usage
from availability_latency import SimConfig, AccessMode, simulate
from availability_latency.models.code_domain import single_object_layout

result = simulate(SimConfig(mode=AccessMode.FA, layout=single_object_layout(2, 1),
                            arrival_rate=0.8, n_arrivals=100_000, seed=1))
print(result.mean_t, result.type_frequencies)
```

## Architecture

- **Domain Models** (`models/`) - layouts, distributions, bounds, the QBD solver
- **Simulators** (`models/simulators/`) - event engines per access mode
- **Settings** (`settings.py`) - flags, environment and config file
- **Service** (`service.py`) - experiment orchestration and file output
"""

from .models import (
    AccessMode,
    CsvTable,
    Experiment,
    ExitStatus,
    ExperimentSpec,
    PopularityVector,
    SimConfig,
    SimResult,
    StorageLayout,
)
from .models.simulation_domain import replicate, run_cells, simulate
from .service import main, run, run_experiment

__version__ = "0.1.0"

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
    "__version__",
    "main",
    "replicate",
    "run",
    "run_cells",
    "run_experiment",
    "simulate",
]
