"""Mixing of statistics on Markov chains: exact, coupling and analytic tools."""

__version__ = "0.1.0"

from .model import ChainSpec, CapExceeded, RngStream, ValidationError  # noqa: E402
from .features import StatisticSpec  # noqa: E402
from .couplings import CouplingSpec, MatchPredicate  # noqa: E402

__all__ = [
    "CapExceeded",
    "ChainSpec",
    "CouplingSpec",
    "MatchPredicate",
    "RngStream",
    "StatisticSpec",
    "ValidationError",
]
