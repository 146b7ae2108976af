"""Replicator dynamics of the consumer/producer delivery game."""

from replidyn.game_model import (
    ECOMMERCE,
    RETAIL,
    EconomicPrimitives,
    GameParams,
    PopulationState,
    Regime,
    classify_regime,
    validate,
)

__version__ = "0.1.0"

__all__ = [
    "ECOMMERCE",
    "RETAIL",
    "EconomicPrimitives",
    "GameParams",
    "PopulationState",
    "Regime",
    "classify_regime",
    "validate",
]
