"""Group-relative advantage normalization over per-rollout scalar rewards.

For a group of G rewards the advantage of rollout i is
(r_i - mean) / (pstdev + epsilon); groups whose population standard deviation
falls below epsilon are degenerate and map to exact zeros.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from statistics import fmean, pstdev
from typing import Iterable, Iterator

from .rewards import RewardBreakdown

DEFAULT_GROUP_SIZE = 7
DEFAULT_EPSILON = 1e-6


class IncompleteGroupError(ValueError):
    def __init__(self, prompt_id: str, count: int, group_size: int):
        super().__init__(f"prompt {prompt_id!r} has {count} rollouts, expected {group_size}")
        self.prompt_id = prompt_id
        self.count = count
        self.group_size = group_size


@dataclass(frozen=True)
class RolloutGroup:
    """All rewards for one prompt, in rollout order."""

    prompt_id: str
    rewards: tuple[float, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "rewards", tuple(float(r) for r in self.rewards))
        if len(self.rewards) < 2:
            raise ValueError(f"group {self.prompt_id!r} needs at least 2 rewards")
        if not all(math.isfinite(r) for r in self.rewards):
            raise ValueError(f"group {self.prompt_id!r} contains a non-finite reward")

    @property
    def group_size(self) -> int:
        return len(self.rewards)


@dataclass(frozen=True)
class AdvantageVector:
    prompt_id: str
    advantages: tuple[float, ...]
    degenerate: bool


def group_advantages(group: RolloutGroup, epsilon: float = DEFAULT_EPSILON) -> AdvantageVector:
    """Centered, scale-normalized advantages; all-zero when the group's
    spread is below epsilon."""
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    sigma = pstdev(group.rewards)
    if sigma < epsilon:
        return AdvantageVector(group.prompt_id, (0.0,) * len(group.rewards), degenerate=True)
    mu = fmean(group.rewards)
    scale = sigma + epsilon
    return AdvantageVector(
        group.prompt_id,
        tuple((r - mu) / scale for r in group.rewards),
        degenerate=False,
    )


def assemble_groups(
    scored: Iterable[tuple[str, RewardBreakdown]],
    group_size: int = DEFAULT_GROUP_SIZE,
) -> Iterator[RolloutGroup]:
    """Group totals by prompt_id, preserving rollout order within a prompt.
    Yields each group as soon as it reaches group_size; any prompt with a
    different count raises IncompleteGroupError naming it."""
    pending: dict[str, list[float]] = {}
    for prompt_id, breakdown in scored:
        rewards = pending.setdefault(prompt_id, [])
        if len(rewards) >= group_size:
            raise IncompleteGroupError(prompt_id, len(rewards) + 1, group_size)
        rewards.append(breakdown.total)
        if len(rewards) == group_size:
            yield RolloutGroup(prompt_id, tuple(rewards))
    for prompt_id, rewards in pending.items():
        if len(rewards) != group_size:
            raise IncompleteGroupError(prompt_id, len(rewards), group_size)
