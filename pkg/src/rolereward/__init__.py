"""Verifiable rewards and dataset curation for role-playing dialogue agents."""

__version__ = "0.1.0"

from .advantages import (
    DEFAULT_EPSILON,
    DEFAULT_GROUP_SIZE,
    AdvantageVector,
    IncompleteGroupError,
    RolloutGroup,
    assemble_groups,
    group_advantages,
)
from .rewards import (
    FormatConfig,
    ModelResponse,
    RewardBreakdown,
    RewardSpec,
    ScoringConfig,
    SpecLabel,
    accuracy_reward,
    chinese_ratio,
    default_format_config,
    default_scoring_config,
    format_reward,
    parse_response,
    total_reward,
)

__all__ = [
    "__version__",
    "AdvantageVector",
    "DEFAULT_EPSILON",
    "DEFAULT_GROUP_SIZE",
    "FormatConfig",
    "IncompleteGroupError",
    "ModelResponse",
    "RewardBreakdown",
    "RewardSpec",
    "RolloutGroup",
    "ScoringConfig",
    "SpecLabel",
    "accuracy_reward",
    "assemble_groups",
    "chinese_ratio",
    "default_format_config",
    "default_scoring_config",
    "format_reward",
    "group_advantages",
    "parse_response",
    "total_reward",
]
