#!/usr/bin/env python
# -*- coding: utf-8 -*-
"""
锦标赛引擎
逐阶段选择、按层级计分、R 轮并行比赛与积分累加，最终按积分排序
"""

import threading
from concurrent.futures import Executor, ThreadPoolExecutor
from dataclasses import dataclass
from typing import Dict, FrozenSet, List, Mapping, Optional, Sequence, Tuple

from .console import get_logger
from .core import (
    Candidate, InvalidArgument, JudgeUnavailable, PointsTable, StageSpec, TournamentSchedule,
    by_initial_rank, require_valid, validate_candidates,
)
from .cost import PARALLEL, SEQUENTIAL, CostLedger, ledger_merge, merge_all
from .grouping import PRNG_NAME, assign_groups, derive_seed, redeal_groups, shuffle_presentation
from .judge import Judge, JudgeRequest, judge_select

logger = get_logger(__name__)

# seed path tags under one stage seed
_PRESENTATION, _MEMBERSHIP = 0, 1


@dataclass(frozen=True)
class EngineOptions:
    """
    parallelism: 同时进行的评审调用上限
    lenient: 轮次失败时丢弃该轮而不是中止
    redeal_groups: 每轮重新发牌（默认固定成员，只打乱呈现顺序）
    serial_rounds: 轮次逐个执行
    """
    parallelism: int = 8
    lenient: bool = False
    redeal_groups: bool = False
    serial_rounds: bool = False

    def __post_init__(self):
        if self.parallelism < 1:
            raise InvalidArgument(f"parallelism must be >= 1, got {self.parallelism}")

    def round_width(self, rounds: int) -> int:
        """同时进行的轮次数，受 parallelism 限制"""
        return 1 if self.serial_rounds else max(1, min(rounds, self.parallelism))


@dataclass(frozen=True)
class StageOutcome:
    advancing: FrozenSet[str]
    cost: CostLedger


@dataclass(frozen=True)
class RoundResult:
    round: int
    points: Mapping[str, int]
    stage_survivors: Tuple[FrozenSet[str], ...]
    cost: CostLedger


@dataclass(frozen=True)
class RankingResult:
    ranking: Tuple[str, ...]
    points_table: PointsTable
    cost: CostLedger
    run_seed: int
    rounds_requested: int
    rounds_effective: int
    failed_rounds: Tuple[int, ...] = ()
    round_width: int = 1
    prng: str = PRNG_NAME


def run_stage(query: str, stage: StageSpec, survivors: Sequence[Candidate], judge: Judge, seed: int,
              executor: Optional[Executor] = None, redeal: bool = False,
              abort: Optional[threading.Event] = None) -> StageOutcome:
    """
    一个选择阶段：分组、组内打乱、每组一次评审、合并晋级文档
    :param query: 查询
    :param stage: 阶段参数
    :param survivors: 本阶段的 N_k 篇文档
    :param judge: 评审
    :param seed: 阶段种子
    :param executor: 组间并发用的线程池，None 时顺序执行
    :param redeal: 是否随机重新发牌
    :param abort: 置位后不再发起新的评审调用
    :return: 晋级文档集合和本阶段成本
    """
    if len(survivors) != stage.n_in:
        raise InvalidArgument(f"stage expects {stage.n_in} survivors, got {len(survivors)}")
    ordered = by_initial_rank(survivors)
    if redeal:
        assignment = redeal_groups(ordered, stage.groups, derive_seed(seed, _MEMBERSHIP))
    else:
        assignment = assign_groups(ordered, stage.groups)
    assignment = shuffle_presentation(assignment, derive_seed(seed, _PRESENTATION))

    by_id = {c.doc_id: c for c in survivors}
    requests = [JudgeRequest.from_docs(query, [by_id[d] for d in presented], stage.select_per_group)
                for presented in assignment.presentation]

    def judge_group(g: int):
        try:
            if abort is not None and abort.is_set():
                raise JudgeUnavailable("round aborted")
            return judge_select(judge, requests[g])
        except JudgeUnavailable as e:
            raise e.annotated(group=g) from e

    if executor is None:
        selections = [judge_group(g) for g in range(len(requests))]
    else:
        selections = list(executor.map(judge_group, range(len(requests))))

    advancing = set()
    ledgers = []
    for request, selection in zip(requests, selections):
        advancing.update(selection.chosen_doc_ids(request))
        ledgers.append(CostLedger.call(request.n, selection.retries))
    if len(advancing) != stage.n_out:
        raise InvalidArgument(f"stage produced {len(advancing)} survivors, expected {stage.n_out}")
    return StageOutcome(advancing=frozenset(advancing), cost=merge_all(ledgers, PARALLEL))


def run_tournament(query: str, candidates: Sequence[Candidate], schedule: TournamentSchedule, judge: Judge,
                   round_seed: int, round_index: int = 1, executor: Optional[Executor] = None,
                   options: Optional[EngineOptions] = None,
                   abort: Optional[threading.Event] = None) -> RoundResult:
    """
    一场比赛：所有文档从 0 分开始，每通过一个阶段加 1 分
    """
    options = options or EngineOptions()
    require_valid(schedule, len(candidates))
    validate_candidates(candidates)

    points: Dict[str, int] = {c.doc_id: 0 for c in candidates}
    survivors: List[Candidate] = list(candidates)
    trail: List[FrozenSet[str]] = []
    cost = CostLedger()
    for k, stage in enumerate(schedule.stages):
        try:
            outcome = run_stage(query, stage, survivors, judge, derive_seed(round_seed, k),
                                executor=executor, redeal=options.redeal_groups, abort=abort)
        except JudgeUnavailable as e:
            raise e.annotated(round=round_index, stage=k) from e
        for doc_id in outcome.advancing:
            points[doc_id] += 1
        survivors = [c for c in survivors if c.doc_id in outcome.advancing]
        trail.append(outcome.advancing)
        cost = ledger_merge(cost, outcome.cost, SEQUENTIAL)
    return RoundResult(round=round_index, points=points, stage_survivors=tuple(trail), cost=cost)


def rank_by_points(points_table: PointsTable, candidates: Sequence[Candidate]) -> List[str]:
    """累计积分降序，同分按 initial_rank 升序"""
    missing = [c.doc_id for c in candidates if c.doc_id not in points_table.accumulated]
    if missing:
        raise InvalidArgument(f"no accumulated points for {missing[0]!r}")
    ordered = sorted(candidates, key=lambda c: (-points_table.accumulated[c.doc_id], c.initial_rank))
    return [c.doc_id for c in ordered]


def run_tourrank(query: str, candidates: Sequence[Candidate], schedule: TournamentSchedule, judge: Judge,
                 run_seed: int, options: Optional[EngineOptions] = None) -> RankingResult:
    """
    R 场相互独立的比赛（轮次种子由 run_seed 派生），积分逐轮相加后排序
    :param query: 查询
    :param candidates: 候选文档
    :param schedule: 赛程，schedule.rounds 为 R
    :param judge: 评审
    :param run_seed: 整次运行的种子
    :param options: 并发与容错选项
    :return: RankingResult
    """
    options = options or EngineOptions()
    require_valid(schedule, len(candidates))
    validate_candidates(candidates)
    rounds = range(1, schedule.rounds + 1)

    results: Dict[int, RoundResult] = {}
    failed: List[int] = []
    round_width = options.round_width(schedule.rounds)
    abort = threading.Event()
    with ThreadPoolExecutor(max_workers=options.parallelism, thread_name_prefix="judge") as calls, \
            ThreadPoolExecutor(max_workers=round_width, thread_name_prefix="round") as round_pool:
        futures = {r: round_pool.submit(run_tournament, query, candidates, schedule, judge,
                                        derive_seed(run_seed, r), r, calls, options, abort)
                   for r in rounds}
        for r in rounds:
            try:
                results[r] = futures[r].result()
            except JudgeUnavailable as e:
                if not options.lenient:
                    abort.set()
                    for future in futures.values():
                        future.cancel()
                    raise
                logger.warning("dropping round %d: %s", r, e)
                failed.append(r)

    if not results:
        raise JudgeUnavailable(f"all {schedule.rounds} rounds failed")
    points_table = PointsTable.from_rounds({r: res.points for r, res in results.items()})
    cost = _merge_waves([results[r].cost for r in sorted(results)], round_width)
    return RankingResult(ranking=tuple(rank_by_points(points_table, candidates)), points_table=points_table,
                         cost=cost, run_seed=run_seed, rounds_requested=schedule.rounds,
                         rounds_effective=len(results), failed_rounds=tuple(failed), round_width=round_width)


def _merge_waves(costs: Sequence[CostLedger], width: int) -> CostLedger:
    """每 width 轮为一波：波内并行，波与波之间串行"""
    waves = [merge_all(costs[i:i + width], PARALLEL) for i in range(0, len(costs), width)]
    return merge_all(waves, SEQUENTIAL)
