"""Client SDK for the reward scoring service."""

from .client import (
    AdvantageVector,
    ClientConfig,
    ClientError,
    ResponseSchemaError,
    ScoreBreakdown,
    ServiceError,
    TrainerClient,
    TransportError,
    ValidationError,
    advantages,
    score_batch,
)

__version__ = "0.1.0"

__all__ = [
    "AdvantageVector",
    "ClientConfig",
    "ClientError",
    "ResponseSchemaError",
    "ScoreBreakdown",
    "ServiceError",
    "TrainerClient",
    "TransportError",
    "ValidationError",
    "advantages",
    "score_batch",
    "__version__",
]
