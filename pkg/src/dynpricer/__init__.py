"""Posted-price welfare maximization from revealed-preference feedback.

The seller never sees buyer values, only what a random buyer purchases at the
posted prices. :class:`BunToPrice` learns prices inducing a target expected
bundle, :class:`OWel` maximizes welfare over bundles on top of it, and
:class:`OWelUD` handles unit-demand buyers with randomized Gumbel prices.
"""

from .bun_to_price import BtpBudget, BunToPrice, bun_to_price, dual_gradient_estimate, price_radius
from .core_types import Box, CappedSimplex, PriceBall, Simplex, project, shrunk_box, shrunk_set
from .exceptions import (BoundViolationError, DynPricerError, InfeasibleShrinkError,
                         InvalidArgumentError, NotFittedError, NotInducibleError,
                         SingularGradientError, SolverFailureError, StructuralError)
from .market import (BuyerDistribution, MarketInstance, RevealedPreferenceOracle, rep_query,
                     unit_demand_market)
from .owel import OWel, OwelConfig, OwelTrace, owel, shrink_loss_bound, welfare_supergradient
from .sgd import DescentConfig, sgd_perturbed, sgd_unbiased
from .unit_demand import (GumbelPriceDistribution, OWelUD, convert, owel_ud,
                          sample_perturbed_price, sim)
from .valuations import (EntropyRegularized, LinearUnitDemand, Quadratic, SeparablePower,
                         buyer_response, regularized_response, unit_demand_choice)

__version__ = "0.1.0"

__all__ = [
    "Box", "BoundViolationError", "BtpBudget", "BunToPrice", "BuyerDistribution", "CappedSimplex",
    "DescentConfig", "DynPricerError", "EntropyRegularized", "GumbelPriceDistribution",
    "InfeasibleShrinkError", "InvalidArgumentError", "LinearUnitDemand", "MarketInstance",
    "NotFittedError", "NotInducibleError", "OWel", "OWelUD", "OwelConfig", "OwelTrace",
    "PriceBall", "Quadratic", "RevealedPreferenceOracle", "SeparablePower", "Simplex",
    "SingularGradientError", "SolverFailureError", "StructuralError", "bun_to_price",
    "buyer_response", "convert", "dual_gradient_estimate", "owel", "owel_ud", "price_radius",
    "project", "regularized_response", "rep_query", "sample_perturbed_price", "sgd_perturbed",
    "sgd_unbiased", "shrink_loss_bound", "shrunk_box", "shrunk_set", "sim", "unit_demand_choice",
    "unit_demand_market", "welfare_supergradient",
]
