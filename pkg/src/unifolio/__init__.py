"""Universal portfolio selection with continuous side information.

Core pieces: add-one (Laplace) sequential probability assignments and their
state-conditional extension, minimal empirical coverings of state-function
classes, an epoch-doubling covering-mixture assignment, probability-induced
portfolios with exact small-horizon oracles, Monte Carlo wealth simulation,
and empirical-process regret diagnostics.
"""

__version__ = "0.1.0"

from .assignments import (
    CountTable,
    LaplaceAssignment,
    StatewiseLaplaceAssignment,
    SymbolSequence,
    StateSequence,
    laplace_conditional,
    laplace_log_prob,
    statewise_laplace_conditional,
    statewise_laplace_log_prob,
)
from .covering import (
    EmpiricalCovering,
    FiniteSet,
    ProductThreshold,
    SideInfoSample,
    Threshold1D,
    minimal_covering,
)
from .epoch_mixture import EpochMixtureAssignment, roll_epoch
from .portfolio import (
    MarketSequence,
    SimplexVector,
    StateCRP,
    best_crp,
    best_state_crp,
    crp_wealth,
    induced_portfolio_exact,
    induced_wealth_exact,
    state_crp_wealth,
)

__all__ = [
    "__version__",
    "CountTable",
    "LaplaceAssignment",
    "StatewiseLaplaceAssignment",
    "SymbolSequence",
    "StateSequence",
    "laplace_conditional",
    "laplace_log_prob",
    "statewise_laplace_conditional",
    "statewise_laplace_log_prob",
    "EmpiricalCovering",
    "FiniteSet",
    "ProductThreshold",
    "SideInfoSample",
    "Threshold1D",
    "minimal_covering",
    "EpochMixtureAssignment",
    "roll_epoch",
    "MarketSequence",
    "SimplexVector",
    "StateCRP",
    "best_crp",
    "best_state_crp",
    "crp_wealth",
    "induced_portfolio_exact",
    "induced_wealth_exact",
    "state_crp_wealth",
]
