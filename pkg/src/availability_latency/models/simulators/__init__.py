"""Simulation engines, one per access discipline.

``AccessMode.simulator`` picks the engine; callers go through
``simulation_domain.simulate`` and never import these modules directly.
"""

__all__: list[str] = []
