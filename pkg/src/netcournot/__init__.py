"""Nash equilibria of networked Cournot games with a market maker on a capacitated grid."""

__version__ = "0.1.0"

from .network import (  # noqa: E402
    DimensionError,
    MarketGraph,
    ProducerMap,
    ValidationError,
    ValidationReport,
    consumption,
    incidence_apply,
    market_capacity_bound,
    validate,
)
from .game import (  # noqa: E402
    AffinePrice,
    ConcavePrice,
    ConvexCost,
    GameInstance,
    NumericalError,
    QuadraticCost,
    UnsupportedModelError,
    make_game,
    marshallian_welfare,
    potential,
    potential_gradient,
    producer_strategy_bound,
    producer_utility,
)
from .solver import (  # noqa: E402
    Equilibrium,
    KktReport,
    PreconditionError,
    SolverOptions,
    best_response_dynamics,
    best_response_market_maker,
    best_response_producer,
    canonical_flow,
    solve_potential,
    verify_equilibrium,
)
from .analysis import (  # noqa: E402
    CutCertificate,
    PriceGroupReport,
    Theorem2Report,
    find_saturated_cut,
    flow_report,
    price_groups,
    residual_reachable,
    verify_theorem2,
)
