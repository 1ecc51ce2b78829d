import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rolereward.advantages import (
    DEFAULT_GROUP_SIZE,
    IncompleteGroupError,
    RolloutGroup,
    assemble_groups,
    group_advantages,
)
from rolereward.rewards import RewardBreakdown

from oracles import oracle_advantages


def group(*rewards, prompt_id="p"):
    return RolloutGroup(prompt_id=prompt_id, rewards=tuple(float(r) for r in rewards))


class TestRolloutGroup:
    def test_minimum_size_two(self):
        with pytest.raises(ValueError):
            group(1.0)

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            group(1.0, float("nan"))
        with pytest.raises(ValueError):
            group(1.0, float("inf"))

    def test_coerces_ints(self):
        g = group(0, 1, 2)
        assert g.rewards == (0.0, 1.0, 2.0)
        assert g.group_size == 3


class TestGroupAdvantages:
    def test_two_point_group_lands_on_unit_interval(self):
        # rewards [0,2]: mean 1, population sigma 1, so advantages approach
        # [-1, 1] as epsilon vanishes
        vector = group_advantages(group(0.0, 2.0), epsilon=1e-15)
        assert vector.advantages[0] == pytest.approx(-1.0, abs=1e-9)
        assert vector.advantages[1] == pytest.approx(1.0, abs=1e-9)
        assert not vector.degenerate

    def test_matches_direct_formula(self):
        rng = random.Random(8)
        for _ in range(200):
            rewards = [rng.uniform(0, 2) for _ in range(DEFAULT_GROUP_SIZE)]
            vector = group_advantages(RolloutGroup(prompt_id="p", rewards=tuple(rewards)))
            expected, degenerate = oracle_advantages(rewards)
            assert not degenerate
            assert vector.advantages == pytest.approx(expected, abs=1e-12)

    def test_constant_group_is_exact_zeros(self):
        vector = group_advantages(group(*([0.75] * 7)))
        assert vector.degenerate
        assert vector.advantages == (0.0,) * 7

    def test_binary_rewards_all_zero_and_all_one(self):
        assert group_advantages(group(*([0.0] * 7))).degenerate
        assert group_advantages(group(*([1.0] * 7))).degenerate

    def test_near_constant_below_epsilon_degenerates(self):
        vector = group_advantages(group(1.0, 1.0 + 1e-9, 1.0), epsilon=1e-6)
        assert vector.degenerate
        assert vector.advantages == (0.0, 0.0, 0.0)

    def test_epsilon_validation(self):
        with pytest.raises(ValueError):
            group_advantages(group(0.0, 1.0), epsilon=0.0)
        with pytest.raises(ValueError):
            group_advantages(group(0.0, 1.0), epsilon=-1e-6)

    def test_centering_1000_random_groups(self):
        rng = random.Random(314159)
        for _ in range(1000):
            rewards = tuple(rng.uniform(-5, 5) for _ in range(7))
            vector = group_advantages(RolloutGroup(prompt_id="p", rewards=rewards))
            if not vector.degenerate:
                assert abs(sum(vector.advantages)) < 1e-9

    def test_shift_invariance(self):
        rng = random.Random(2718)
        for _ in range(300):
            rewards = [rng.uniform(0, 2) for _ in range(7)]
            shift = rng.uniform(-100, 100)
            base = group_advantages(RolloutGroup(prompt_id="p", rewards=tuple(rewards)))
            moved = group_advantages(RolloutGroup(prompt_id="p", rewards=tuple(r + shift for r in rewards)))
            assert moved.advantages == pytest.approx(base.advantages, abs=1e-9)

    def test_positive_scale_invariance_in_small_epsilon_limit(self):
        rng = random.Random(1618)
        for _ in range(300):
            rewards = [rng.uniform(0, 2) for _ in range(7)]
            scale = rng.uniform(0.1, 10)
            base = group_advantages(RolloutGroup(prompt_id="p", rewards=tuple(rewards)), epsilon=1e-12)
            scaled = group_advantages(
                RolloutGroup(prompt_id="p", rewards=tuple(r * scale for r in rewards)), epsilon=1e-12
            )
            assert scaled.advantages == pytest.approx(base.advantages, abs=1e-6)

    @given(st.lists(st.floats(min_value=-1e6, max_value=1e6), min_size=2, max_size=32))
    @settings(max_examples=300, deadline=None)
    def test_length_preserved_and_finite(self, rewards):
        vector = group_advantages(RolloutGroup(prompt_id="p", rewards=tuple(rewards)))
        assert len(vector.advantages) == len(rewards)
        assert all(math.isfinite(a) for a in vector.advantages)
        if vector.degenerate:
            assert vector.advantages == (0.0,) * len(rewards)


def breakdown(total):
    return RewardBreakdown(accuracy=0, format=0, total=total, spec_id="s")


class TestAssembleGroups:
    def test_splits_stream_into_groups(self):
        scored = [("a", breakdown(float(i))) for i in range(3)] + [("b", breakdown(float(i))) for i in range(3)]
        groups = list(assemble_groups(iter(scored), group_size=3))
        assert [g.prompt_id for g in groups] == ["a", "b"]
        assert groups[0].rewards == (0.0, 1.0, 2.0)

    def test_interleaved_prompts(self):
        scored = [("a", breakdown(1.0)), ("b", breakdown(2.0)), ("a", breakdown(3.0)), ("b", breakdown(4.0))]
        groups = {g.prompt_id: g.rewards for g in assemble_groups(iter(scored), group_size=2)}
        assert groups == {"a": (1.0, 3.0), "b": (2.0, 4.0)}

    def test_undersized_group_raises(self):
        scored = [("a", breakdown(1.0))] * 2
        with pytest.raises(IncompleteGroupError) as excinfo:
            list(assemble_groups(iter(scored), group_size=3))
        assert excinfo.value.prompt_id == "a"
        assert excinfo.value.count == 2

    def test_oversized_group_raises(self):
        scored = [("a", breakdown(1.0))] * 4
        with pytest.raises(IncompleteGroupError):
            list(assemble_groups(iter(scored), group_size=3))

    def test_default_group_size_is_seven(self):
        scored = [("a", breakdown(float(i))) for i in range(7)]
        groups = list(assemble_groups(iter(scored)))
        assert len(groups) == 1
        assert groups[0].group_size == DEFAULT_GROUP_SIZE == 7
