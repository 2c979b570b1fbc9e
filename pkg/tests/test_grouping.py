#!/usr/bin/env python
# -*- coding: utf-8 -*-
"""分组与种子派生的测试"""

from collections import Counter

import pytest

from tourrank.core import Candidate, InvalidArgument
from tourrank.grouping import assign_groups, derive_seed, make_rng, redeal_groups, shuffle_presentation


def ranked(n):
    return [Candidate(str(i), "", i) for i in range(1, n + 1)]


def test_round_robin_two_groups():
    assignment = assign_groups(ranked(10), 2)
    assert assignment.groups == (("1", "3", "5", "7", "9"), ("2", "4", "6", "8", "10"))


def test_round_robin_spread_hundred():
    assignment = assign_groups(ranked(100), 5)
    for g, members in enumerate(assignment.groups):
        assert len(members) == 20
        assert all(int(d) % 5 == (g + 1) % 5 for d in members)


def test_round_robin_remainder():
    assignment = assign_groups(ranked(7), 3)
    assert [len(g) for g in assignment.groups] == [3, 2, 2]
    assert assignment.groups[0] == ("1", "4", "7")


@pytest.mark.parametrize("groups", [0, 8])
def test_group_count_out_of_range(groups):
    with pytest.raises(InvalidArgument):
        assign_groups(ranked(7), groups)


def test_empty_survivors():
    with pytest.raises(InvalidArgument):
        assign_groups([], 1)


def test_shuffle_is_deterministic_permutation():
    base = assign_groups(ranked(100), 5)
    first = shuffle_presentation(base, 42)
    again = shuffle_presentation(base, 42)
    assert first == again
    assert first.groups == base.groups
    for members, presented in zip(first.groups, first.presentation):
        assert sorted(members) == sorted(presented)
    assert shuffle_presentation(base, 43).presentation != first.presentation


def test_shuffle_first_position_uniform():
    base = assign_groups(ranked(5), 1)
    counts = Counter(shuffle_presentation(base, seed).presentation[0][0] for seed in range(10_000))
    assert set(counts) == {"1", "2", "3", "4", "5"}
    assert all(1800 <= c <= 2200 for c in counts.values())


def test_redeal_keeps_block_spread():
    survivors = ranked(100)
    assignment = redeal_groups(survivors, 5, seed=9)
    assert sorted(d for g in assignment.groups for d in g) == sorted(c.doc_id for c in survivors)
    for block in range(20):
        ids = {str(block * 5 + i) for i in range(1, 6)}
        assert all(len(ids & set(g)) == 1 for g in assignment.groups)
    assert redeal_groups(survivors, 5, seed=9) == assignment
    assert redeal_groups(survivors, 5, seed=10).groups != assignment.groups


def test_derived_seeds_are_path_sensitive():
    assert derive_seed(1, 2, 3) == derive_seed(1, 2, 3)
    assert derive_seed(1, 2, 3) != derive_seed(1, 3, 2)
    assert derive_seed(1, 2) != derive_seed(2, 2)
    assert make_rng(5, 1).random() == make_rng(5, 1).random()
