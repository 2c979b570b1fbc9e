#!/usr/bin/env python
# -*- coding: utf-8 -*-
"""
对比基线
滑动窗口列表式重排、逐点打分重排，以及把任一方法串行迭代多次
"""

import math
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, List, Mapping, Sequence, Tuple, Union

from .console import get_logger
from .core import Candidate, InvalidArgument, JudgeUnavailable, TourRankError
from .cost import PARALLEL, SEQUENTIAL, CostLedger, ledger_merge, merge_all
from .grouping import make_rng
from .judge import ChatClient, Judge, OrderingJudgeRequest, request_fingerprint

logger = get_logger(__name__)

__all__ = [
    "BaselineResult", "SerialResult", "WindowSpec", "OrderingJudgeRequest", "window_starts",
    "sliding_window_rerank", "serial_rerank", "pointwise_rerank",
    "OracleScorer", "NoisyScorer", "LLMGradeScorer", "ScorerError", "Graded",
]


@dataclass(frozen=True)
class WindowSpec:
    window: int = 20
    step: int = 10

    def check(self, n: int) -> None:
        if not 1 <= self.step <= self.window <= n:
            raise InvalidArgument(f"need 1 <= step <= window <= N, got step={self.step} "
                                  f"window={self.window} N={n}")


@dataclass(frozen=True)
class BaselineResult:
    ranking: Tuple[str, ...]
    cost: CostLedger


@dataclass(frozen=True)
class SerialResult:
    trajectory: Tuple[Tuple[str, ...], ...]
    costs: Tuple[CostLedger, ...]
    cost: CostLedger

    @property
    def final(self) -> Tuple[str, ...]:
        return self.trajectory[-1]


def window_starts(n: int, spec: WindowSpec) -> List[int]:
    """从列表底部往顶部滑动；最后一个窗口固定从 0 开始"""
    spec.check(n)
    starts = []
    start = n - spec.window
    while start > 0:
        starts.append(start)
        start -= spec.step
    starts.append(0)
    return starts


def sliding_window_rerank(query: str, candidates: Sequence[Candidate], spec: WindowSpec,
                          judge: Judge) -> BaselineResult:
    """
    滑动窗口重排，窗口之间严格顺序执行
    :param query: 查询
    :param candidates: 当前顺序的候选（列表顺序即当前排名）
    :param spec: 窗口大小与步长
    :param judge: 提供 order() 的评审
    :return: 排序结果与成本
    """
    order = list(candidates)
    cost = CostLedger()
    for index, start in enumerate(window_starts(len(order), spec)):
        docs = order[start:start + spec.window]
        request = OrderingJudgeRequest.from_docs(query, docs)
        try:
            selection = judge.order(request)
        except JudgeUnavailable as e:
            raise e.annotated(window=index) from e
        if sorted(selection.chosen_labels) != list(range(1, len(docs) + 1)):
            raise InvalidArgument(f"{judge!r} returned an invalid ordering {selection.chosen_labels}")
        order[start:start + spec.window] = [request.doc_for(label) for label in selection.chosen_labels]
        cost = ledger_merge(cost, CostLedger.call(len(docs), selection.retries), SEQUENTIAL)
    return BaselineResult(ranking=tuple(c.doc_id for c in order), cost=cost)


def serial_rerank(query: str, candidates: Sequence[Candidate],
                  method: Callable[[str, Sequence[Candidate]], BaselineResult],
                  iterations: int) -> SerialResult:
    """
    串行迭代：上一次的输出顺序作为下一次的输入顺序
    """
    if iterations < 1:
        raise InvalidArgument(f"iterations must be >= 1, got {iterations}")
    by_id = {c.doc_id: c for c in candidates}
    current = list(candidates)
    trajectory, costs = [], []
    for _ in range(iterations):
        result = method(query, current)
        trajectory.append(result.ranking)
        costs.append(result.cost)
        current = [by_id[d] for d in result.ranking]
    return SerialResult(trajectory=tuple(trajectory), costs=tuple(costs), cost=merge_all(costs, SEQUENTIAL))


class ScorerError(TourRankError):
    """逐点打分器无法给出分数"""


@dataclass(frozen=True)
class Graded:
    """带传输重试次数的分数"""
    value: float
    retries: int = 0


Scorer = Callable[[str, Candidate], Union[float, Graded]]


def pointwise_rerank(query: str, candidates: Sequence[Candidate], scorer: Scorer, on_error: str = "skip",
                     parallelism: int = 8) -> BaselineResult:
    """
    逐点打分：每篇文档独立打分（可完全并行），分数降序，同分按 initial_rank
    :param on_error: "skip" 失败文档记为负无穷，"abort" 直接抛出
    """
    if on_error not in ("skip", "abort"):
        raise InvalidArgument(f"on_error must be 'skip' or 'abort', got {on_error!r}")

    def score(candidate: Candidate) -> Graded:
        try:
            result = scorer(query, candidate)
            graded = result if isinstance(result, Graded) else Graded(float(result))
            if math.isnan(graded.value):
                raise ScorerError(f"scorer returned NaN for {candidate.doc_id}")
        except (ScorerError, JudgeUnavailable) as e:
            if on_error == "abort":
                raise
            logger.warning("scorer failed for %s, ranking it last: %s", candidate.doc_id, e)
            return Graded(-math.inf)
        return graded

    with ThreadPoolExecutor(max_workers=max(1, parallelism)) as pool:
        scores = list(pool.map(score, candidates))
    ranked = sorted(zip(candidates, scores), key=lambda pair: (-pair[1].value, pair[0].initial_rank))
    cost = merge_all((CostLedger.call(1, graded.retries) for graded in scores), PARALLEL)
    return BaselineResult(ranking=tuple(c.doc_id for c, _ in ranked), cost=cost)


class OracleScorer:
    def __init__(self, grades: Mapping[str, int]):
        self.grades = dict(grades)

    def __call__(self, query: str, candidate: Candidate) -> float:
        return float(self.grades.get(candidate.doc_id, 0))


class NoisyScorer:
    """以概率 epsilon 把真值等级替换成 [0, max_grade] 内的随机分数"""

    def __init__(self, grades: Mapping[str, int], epsilon: float, seed: int):
        self.grades = dict(grades)
        self.epsilon = epsilon
        self.seed = seed
        self.max_grade = max(self.grades.values(), default=0)

    def __call__(self, query: str, candidate: Candidate) -> float:
        rng = make_rng(self.seed, request_fingerprint(query, [candidate], 1))
        if rng.random() < self.epsilon:
            return float(rng.uniform(0, self.max_grade))
        return float(self.grades.get(candidate.doc_id, 0))


_FIRST_INT = re.compile(r"-?\d+")


class LLMGradeScorer:
    """让模型给出 0..max_grade 的整数相关性分数"""

    def __init__(self, client: ChatClient, max_grade: int = 10):
        self.client = client
        self.max_grade = max_grade

    def messages(self, query: str, candidate: Candidate):
        return [
            {"role": "system", "content": "You are an intelligent assistant that judges how relevant a "
                                          "document is to a query."},
            {"role": "user", "content": f"Query: {query}\nDocument: {candidate.text}\n"
                                        f"From a scale of 0 to {self.max_grade}, judge the relevance between "
                                        f"the query and the document. Output only the number."},
        ]

    def __call__(self, query: str, candidate: Candidate) -> Graded:
        content, retries = self.client.complete(self.messages(query, candidate))
        match = _FIRST_INT.search(content)
        if not match:
            raise ScorerError(f"no grade in response for {candidate.doc_id}: {content[:80]!r}")
        return Graded(float(min(self.max_grade, max(0, int(match.group(0))))), retries)
