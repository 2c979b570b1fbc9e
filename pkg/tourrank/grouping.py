#!/usr/bin/env python
# -*- coding: utf-8 -*-
"""
分组模块
按初始排名轮流发牌分组（种子式分组），并在组内打乱呈现顺序
"""

from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from .core import Candidate, InvalidArgument

_SEED_MASK = (1 << 64) - 1

PRNG_NAME = f"numpy.random.PCG64 via SeedSequence (numpy {np.__version__})"


def derive_seed(seed: int, *path: int) -> int:
    """
    由一个整数种子和路径 (round, stage, group, ...) 派生 64 位子种子
    使用 numpy SeedSequence(entropy=seed, spawn_key=path) 的哈希混合
    """
    sequence = np.random.SeedSequence(entropy=seed & _SEED_MASK, spawn_key=tuple(p & _SEED_MASK for p in path))
    return int(sequence.generate_state(1, dtype=np.uint64)[0])


def make_rng(seed: int, *path: int) -> np.random.Generator:
    sequence = np.random.SeedSequence(entropy=seed & _SEED_MASK, spawn_key=tuple(p & _SEED_MASK for p in path))
    return np.random.Generator(np.random.PCG64(sequence))


@dataclass(frozen=True)
class GroupAssignment:
    """
    groups: 每组成员（发牌顺序）
    presentation: 每组展示给评审的顺序，是 groups[g] 的一个排列
    """
    groups: Tuple[Tuple[str, ...], ...]
    presentation: Tuple[Tuple[str, ...], ...]

    def __len__(self) -> int:
        return len(self.groups)


def _check(survivors: Sequence[Candidate], groups: int) -> None:
    if not survivors:
        raise InvalidArgument("cannot group an empty survivor list")
    if not 1 <= groups <= len(survivors):
        raise InvalidArgument(f"G={groups} out of range 1..{len(survivors)}")


def assign_groups(survivors: Sequence[Candidate], groups: int) -> GroupAssignment:
    """
    轮流发牌：按初始排名第 p 位（从 0 开始）的文档进入第 p mod G 组
    :param survivors: 按 initial_rank 升序排列的候选
    :param groups: 分组数 G
    :return: 只含成员关系的 GroupAssignment（presentation 与 groups 相同）
    """
    _check(survivors, groups)
    dealt: List[List[str]] = [[] for _ in range(groups)]
    for position, candidate in enumerate(survivors):
        dealt[position % groups].append(candidate.doc_id)
    members = tuple(tuple(g) for g in dealt)
    return GroupAssignment(groups=members, presentation=members)


def redeal_groups(survivors: Sequence[Candidate], groups: int, seed: int) -> GroupAssignment:
    """
    可选的重新发牌：每个长度为 G 的连续排名块随机分给 G 个组
    仍然保持每块每组恰好一篇的均匀分布性质
    """
    _check(survivors, groups)
    rng = make_rng(seed)
    dealt: List[List[str]] = [[] for _ in range(groups)]
    for start in range(0, len(survivors), groups):
        block = survivors[start:start + groups]
        # a short trailing block goes to a random subset of groups
        targets = rng.permutation(groups)[:len(block)]
        for candidate, g in zip(block, targets):
            dealt[int(g)].append(candidate.doc_id)
    members = tuple(tuple(g) for g in dealt)
    return GroupAssignment(groups=members, presentation=members)


def shuffle_presentation(assignment: GroupAssignment, seed: int) -> GroupAssignment:
    """
    组内顺序打乱，第 g 组的随机数由 (seed, g) 决定
    成员关系不变，相同输入得到相同输出
    """
    presentation = []
    for g, members in enumerate(assignment.groups):
        order = make_rng(seed, g).permutation(len(members))
        presentation.append(tuple(members[int(i)] for i in order))
    return GroupAssignment(groups=assignment.groups, presentation=tuple(presentation))
