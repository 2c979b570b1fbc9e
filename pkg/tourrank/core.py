#!/usr/bin/env python
# -*- coding: utf-8 -*-
"""
核心类型模块
候选文档、赛程（schedule）、积分表以及各模块共用的异常
"""

import math
from collections import Counter
from dataclasses import dataclass, field, replace
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple


class TourRankError(Exception):
    """所有 tourrank 异常的基类"""


class InvalidArgument(TourRankError, ValueError):
    """参数不合法"""


class DataFormatError(TourRankError, ValueError):
    """qrels / run / 语料文件格式错误"""


class JudgeAuthError(TourRankError):
    """缺少或被拒绝的 API 凭据，宽松模式也不会吞掉它"""


class JudgeUnavailable(TourRankError):
    """
    评审（judge）在重试上限后仍不可用
    传播过程中由 engine / baselines 补充出错位置
    """

    def __init__(self, message: str, *, round: Optional[int] = None, stage: Optional[int] = None,
                 group: Optional[int] = None, window: Optional[int] = None):
        super().__init__(message)
        self.message = message
        self.round = round
        self.stage = stage
        self.group = group
        self.window = window

    def annotated(self, **where: Optional[int]) -> "JudgeUnavailable":
        """返回补充了位置信息的新异常（已有字段不覆盖）"""
        fields = {"round": self.round, "stage": self.stage, "group": self.group, "window": self.window}
        for key, value in where.items():
            if fields.get(key) is None:
                fields[key] = value
        return JudgeUnavailable(self.message, **fields)

    def location(self) -> str:
        parts = [f"{key}={value}" for key, value in
                 (("round", self.round), ("stage", self.stage), ("group", self.group), ("window", self.window))
                 if value is not None]
        return ", ".join(parts)

    def __str__(self) -> str:
        where = self.location()
        return f"{self.message} ({where})" if where else self.message


@dataclass(frozen=True)
class Candidate:
    """待排序文档及其初始检索排名（1 为最好）"""
    doc_id: str
    text: str
    initial_rank: int


@dataclass(frozen=True)
class StageSpec:
    """一个选择阶段 N_k -> N_{k+1}：分 G 组，每组 n 篇，每组选 m 篇"""
    n_in: int
    n_out: int
    groups: int
    group_size: int
    select_per_group: int

    @property
    def eliminated(self) -> int:
        return self.n_in - self.n_out

    def group_sizes(self) -> List[int]:
        """轮流发牌时每组的大小，相差不超过 1"""
        base, extra = divmod(self.n_in, self.groups)
        return [base + (1 if g < extra else 0) for g in range(self.groups)]

    def to_dict(self) -> Dict[str, int]:
        return {"n_in": self.n_in, "n_out": self.n_out, "groups": self.groups,
                "group_size": self.group_size, "select_per_group": self.select_per_group}


def make_stage(n_in: int, n_out: int, groups: int) -> StageSpec:
    """
    由 (N_k, N_{k+1}, G) 推出 n 和 m
    :param n_in: 进入本阶段的文档数
    :param n_out: 晋级的文档数
    :param groups: 分组数 G
    :return: StageSpec
    """
    if groups < 1:
        raise InvalidArgument(f"groups must be >= 1, got {groups}")
    if n_out % groups:
        raise InvalidArgument(f"n_out={n_out} is not a multiple of groups={groups}")
    return StageSpec(n_in=n_in, n_out=n_out, groups=groups,
                     group_size=math.ceil(n_in / groups), select_per_group=n_out // groups)


@dataclass(frozen=True)
class TournamentSchedule:
    """阶段阶梯 N_1 -> ... -> N_K 以及轮数 R"""
    stages: Tuple[StageSpec, ...]
    rounds: int = 10

    @property
    def selection_stages(self) -> int:
        """K-1"""
        return len(self.stages)

    @property
    def head(self) -> int:
        return self.stages[0].n_in if self.stages else 0

    @property
    def finalists(self) -> int:
        return self.stages[-1].n_out if self.stages else 0

    @property
    def max_points(self) -> int:
        return self.rounds * self.selection_stages

    def docs_per_tournament(self) -> int:
        return sum(stage.n_in for stage in self.stages)

    def with_rounds(self, rounds: int) -> "TournamentSchedule":
        return replace(self, rounds=rounds)

    def to_dict(self) -> Dict[str, Any]:
        return {"rounds": self.rounds,
                "stages": [{"n_in": s.n_in, "n_out": s.n_out, "groups": s.groups} for s in self.stages]}

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "TournamentSchedule":
        try:
            stages = tuple(make_stage(int(s["n_in"]), int(s["n_out"]), int(s["groups"]))
                           for s in data["stages"])
        except (KeyError, TypeError) as e:
            raise InvalidArgument(f"malformed schedule: {e}") from e
        return cls(stages=stages, rounds=int(data.get("rounds", 10)))


# Default hyperparameters: 100 -> 50 -> 20 -> 10 -> 5 -> 2
_DEFAULT_LADDER = ((100, 50, 5), (50, 20, 5), (20, 10, 1), (10, 5, 1), (5, 2, 1))


def default_schedule(rounds: int = 10) -> TournamentSchedule:
    """默认赛程，R 默认为 10"""
    return TournamentSchedule(stages=tuple(make_stage(*row) for row in _DEFAULT_LADDER), rounds=rounds)


@dataclass(frozen=True)
class ScheduleViolation:
    invariant: str
    message: str
    stage: Optional[int] = None


@dataclass(frozen=True)
class ValidationReport:
    violations: Tuple[ScheduleViolation, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    @property
    def first(self) -> Optional[ScheduleViolation]:
        return self.violations[0] if self.violations else None


class ScheduleError(InvalidArgument):
    def __init__(self, report: ValidationReport):
        super().__init__(report.first.message if report.first else "invalid schedule")
        self.report = report


def validate_schedule(schedule: TournamentSchedule, candidate_count: int) -> ValidationReport:
    """
    检查赛程不变量，返回（而不是抛出）违规报告
    :param schedule: 赛程
    :param candidate_count: 候选文档数 N_1
    :return: ValidationReport，first 为第一个违反的不变量
    """
    found: List[ScheduleViolation] = []
    if not schedule.stages:
        return ValidationReport((ScheduleViolation("non-empty", "schedule has no stages"),))

    if schedule.stages[0].n_in != candidate_count:
        found.append(ScheduleViolation(
            "head", f"stage 0 expects {schedule.stages[0].n_in} inputs, got {candidate_count}", 0))

    for i, stage in enumerate(schedule.stages):
        if stage.groups < 1 or stage.groups > stage.n_in:
            found.append(ScheduleViolation("groups", f"stage {i}: groups={stage.groups} out of range", i))
            continue
        if stage.group_size != math.ceil(stage.n_in / stage.groups):
            found.append(ScheduleViolation(
                "group-size", f"stage {i}: groups x group_size does not cover n_in={stage.n_in}", i))
        if stage.groups * stage.select_per_group != stage.n_out:
            found.append(ScheduleViolation(
                "selection", f"stage {i}: groups x select_per_group != n_out ({stage.n_out})", i))
        smallest = stage.n_in // stage.groups
        if not 1 <= stage.select_per_group < smallest:
            found.append(ScheduleViolation(
                "select-range", f"stage {i}: select_per_group={stage.select_per_group} "
                                f"must be in [1, {smallest})", i))
        if stage.n_out >= stage.n_in:
            found.append(ScheduleViolation("shrink", f"stage {i}: n_out must be < n_in", i))
        if i + 1 < len(schedule.stages) and stage.n_out != schedule.stages[i + 1].n_in:
            found.append(ScheduleViolation(
                "chain", f"stage {i}: n_out={stage.n_out} != stage {i + 1} n_in="
                         f"{schedule.stages[i + 1].n_in}", i))

    if schedule.rounds < 1:
        found.append(ScheduleViolation("rounds", f"rounds must be >= 1, got {schedule.rounds}"))
    return ValidationReport(tuple(found))


def require_valid(schedule: TournamentSchedule, candidate_count: int) -> None:
    report = validate_schedule(schedule, candidate_count)
    if not report.ok:
        raise ScheduleError(report)


def validate_candidates(candidates: Sequence[Candidate]) -> None:
    """doc_id 唯一，initial_rank 为 1..N 的排列"""
    ids = [c.doc_id for c in candidates]
    if len(set(ids)) != len(ids):
        dup = next(d for d, n in Counter(ids).items() if n > 1)
        raise InvalidArgument(f"duplicate doc_id {dup!r} in candidate list")
    if sorted(c.initial_rank for c in candidates) != list(range(1, len(candidates) + 1)):
        raise InvalidArgument("initial_rank values must form a permutation of 1..N")


def tier_points(schedule: TournamentSchedule) -> Dict[int, int]:
    """
    一场比赛后的积分分布：在第 k 阶段被淘汰的文档得 k-1 分
    默认赛程下为 {5:2, 4:3, 3:5, 2:10, 1:30, 0:50}
    """
    histogram = {k: stage.eliminated for k, stage in enumerate(schedule.stages)}
    histogram[schedule.selection_stages] = schedule.finalists
    return histogram


@dataclass(frozen=True)
class PointsTable:
    """每轮积分 P_{T_r} 与累计积分 P_T"""
    per_round: Mapping[int, Mapping[str, int]] = field(default_factory=dict)
    accumulated: Mapping[str, int] = field(default_factory=dict)

    @classmethod
    def from_rounds(cls, per_round: Mapping[int, Mapping[str, int]]) -> "PointsTable":
        accumulated: Dict[str, int] = {}
        for r in sorted(per_round):
            for doc_id, points in per_round[r].items():
                accumulated[doc_id] = accumulated.get(doc_id, 0) + points
        return cls(per_round={r: dict(per_round[r]) for r in sorted(per_round)}, accumulated=accumulated)

    @property
    def rounds(self) -> int:
        return len(self.per_round)

    def prefix(self, r: int) -> "PointsTable":
        """只累计前 r 轮"""
        if not 1 <= r <= self.rounds:
            raise InvalidArgument(f"prefix length {r} out of range 1..{self.rounds}")
        keys = sorted(self.per_round)[:r]
        return PointsTable.from_rounds({k: self.per_round[k] for k in keys})

    def distinct_values(self) -> int:
        return len(set(self.accumulated.values()))

    def histogram(self, r: Optional[int] = None) -> Dict[int, int]:
        source = self.accumulated if r is None else self.per_round[r]
        return dict(Counter(source.values()))


def by_initial_rank(candidates: Iterable[Candidate]) -> List[Candidate]:
    return sorted(candidates, key=lambda c: c.initial_rank)
