"""Multi-population evolutionary game of device owners choosing synchronization tasks."""

__version__ = "0.1.0"

from .analysis import (  # noqa: E402
    DirectionFieldSpec,
    alpha_sweep,
    direction_field,
    find_equilibria,
    simplex_seeds,
)
from .dynamics import (  # noqa: E402
    RevisionProtocol,
    hybrid_field,
    mean_dynamics,
    replicator_field,
    smith_field,
    switch_rate,
)
from .errors import (  # noqa: E402
    IntegrationError,
    RateBoundError,
    StructuralError,
    SyncGameError,
    ValidationError,
)
from .game import (  # noqa: E402
    PayoffTable,
    PopulationSpec,
    RegionSpec,
    Scenario,
    effective_selector_mass,
    payoff,
    payoff_table,
    reward_share,
    sensing_distance,
    total_energy,
)
from .integrator import IntegratorConfig, Trajectory, converged_at, integrate, step  # noqa: E402
from .stochastic import (  # noqa: E402
    AgentPopulationState,
    StochasticConfig,
    ensemble,
    sample_revision,
    simulate,
)

__all__ = [
    "AgentPopulationState", "DirectionFieldSpec", "IntegrationError", "IntegratorConfig",
    "PayoffTable", "PopulationSpec", "RateBoundError", "RegionSpec", "RevisionProtocol",
    "Scenario", "StochasticConfig", "StructuralError", "SyncGameError", "Trajectory",
    "ValidationError", "alpha_sweep", "converged_at", "direction_field", "effective_selector_mass",
    "ensemble", "find_equilibria", "hybrid_field", "integrate", "mean_dynamics", "payoff",
    "payoff_table", "replicator_field", "reward_share", "sample_revision", "sensing_distance",
    "simplex_seeds", "simulate", "smith_field", "step", "switch_rate", "total_energy",
]
