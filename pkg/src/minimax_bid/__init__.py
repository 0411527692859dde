"""Minimax-loss bidding in pay-as-bid and uniform-price multi-unit auctions."""

from .errors import ConfigError, ConvergenceError, DomainError, InconsistentBidError
from .values import (
    BidVector,
    MarginalValueCurve,
    StepBid,
    ValueVector,
    clipped_surplus,
    generalized_inverse,
    value_mass,
)

__all__ = [
    "BidVector",
    "ConfigError",
    "ConvergenceError",
    "DomainError",
    "InconsistentBidError",
    "MarginalValueCurve",
    "StepBid",
    "ValueVector",
    "clipped_surplus",
    "generalized_inverse",
    "value_mass",
]
__version__ = "0.1.0"
