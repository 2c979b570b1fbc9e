#!/usr/bin/env python
# -*- coding: utf-8 -*-
"""
compare 命令
方法 × 初始顺序扰动的对比实验、串行迭代轨迹，以及积分粒度分析
"""

import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

from rich.table import Table

from .baselines import (
    LLMGradeScorer, NoisyScorer, OracleScorer, WindowSpec, pointwise_rerank, serial_rerank,
    sliding_window_rerank,
)
from .console import console, get_logger
from .core import Candidate, InvalidArgument, TournamentSchedule
from .cost import CostLedger
from .engine import rank_by_points, run_tourrank
from .evaluation import PERTURBATIONS, Qrels, evaluate, points_by_grade, read_qrels
from .rank import JudgeFactory, QueryTask, engine_options, load_tasks, noise_seed, prepare, query_seed
from .utils import RunConfig, copy_to_clipboard, echo_config, load_schedule

logger = get_logger(__name__)

_TOURRANK = re.compile(r"^tourrank-(\d+)$")
BASELINES = ("sliding-window", "pointwise")


def parse_method(name: str) -> Tuple[str, int]:
    """"tourrank-10" -> ("tourrank", 10)；基线返回 (name, 0)"""
    match = _TOURRANK.match(name)
    if match:
        rounds = int(match.group(1))
        if rounds < 1:
            raise InvalidArgument(f"{name}: rounds must be >= 1")
        return "tourrank", rounds
    if name in BASELINES:
        return name, 0
    raise InvalidArgument(f"unknown method {name!r}; expected tourrank-<r>, {', '.join(BASELINES)}")


@dataclass(frozen=True)
class MethodCell:
    method: str
    perturb: str
    means: Dict[int, float]
    docs_sent: float
    depth: float
    distinct_points: Optional[float] = None


@dataclass(frozen=True)
class ComparisonReport:
    ks: Tuple[int, ...]
    methods: Tuple[str, ...]
    perturbations: Tuple[str, ...]
    cells: Dict[Tuple[str, str], MethodCell] = field(default_factory=dict)
    points_by_grade: Dict[str, Dict[int, List[int]]] = field(default_factory=dict)

    def mean(self, method: str, perturb: str, k: int) -> float:
        return self.cells[(method, perturb)].means[k]

    def spread(self, method: str, k: int) -> float:
        """各扰动下平均 NDCG@k 的最大值减最小值"""
        values = [self.mean(method, p, k) for p in self.perturbations]
        return max(values) - min(values)


@dataclass(frozen=True)
class TrajectoryPoint:
    step: int
    sliding_ndcg: float
    sliding_docs: float
    tourrank_ndcg: float
    tourrank_docs: float


@dataclass(frozen=True)
class TrajectoryReport:
    k: int
    perturb: str
    points: Tuple[TrajectoryPoint, ...]

    def sliding(self, step: int) -> float:
        return self.points[step - 1].sliding_ndcg

    def tourrank(self, step: int) -> float:
        return self.points[step - 1].tourrank_ndcg


def _scorer(factory: JudgeFactory, qid: str):
    config = factory.config
    if config.judge == "oracle":
        return OracleScorer(factory.grades(qid))
    if config.judge == "noisy":
        return NoisyScorer(factory.grades(qid), config.epsilon, noise_seed(config.seed, qid))
    return LLMGradeScorer(factory.client)


def _mean(values: Sequence[float]) -> float:
    return sum(values) / len(values) if values else 0.0


def run_comparison(tasks: Sequence[QueryTask], qrels: Qrels, config: RunConfig, methods: Sequence[str],
                   perturbations: Sequence[str] = PERTURBATIONS, ks: Sequence[int] = (10,),
                   schedule: Optional[TournamentSchedule] = None,
                   factory: Optional[JudgeFactory] = None) -> ComparisonReport:
    """
    每个方法在每种扰动下运行一遍，所有方法共享同一组种子
    :param tasks: 查询任务
    :param qrels: 相关性判断（评估用，oracle / noisy 评审也用它）
    :param config: 有效配置
    :param methods: 例如 ["tourrank-10", "sliding-window"]
    :param perturbations: keep / shuffle / reverse 的子集
    :param ks: NDCG 截断
    :param schedule: 赛程（轮数由方法名决定），默认按配置加载
    :return: ComparisonReport
    """
    if not methods:
        raise InvalidArgument("no methods given")
    if not perturbations:
        raise InvalidArgument("no perturbations given")
    parsed = {m: parse_method(m) for m in methods}
    schedule = schedule or load_schedule(config.schedule, config.rounds)
    factory = factory or JudgeFactory(config, qrels)
    options = engine_options(config)
    spec = WindowSpec(config.window, config.step)

    cells: Dict[Tuple[str, str], MethodCell] = {}
    case_points: Dict[str, Dict[int, List[int]]] = {}
    for perturb in perturbations:
        rankings: Dict[str, Dict[str, List[str]]] = {m: {} for m in methods}
        ledgers: Dict[str, List[CostLedger]] = {m: [] for m in methods}
        distinct: Dict[str, List[int]] = {m: [] for m in methods}
        for task in tasks:
            candidates = prepare(task, config, perturb)
            judge = factory.for_query(task.qid)
            for method, (kind, rounds) in parsed.items():
                if kind == "tourrank":
                    result = run_tourrank(task.query, candidates, schedule.with_rounds(rounds), judge,
                                          query_seed(config.seed, task.qid), options)
                    ranking, ledger = list(result.ranking), result.cost
                    distinct[method].append(result.points_table.distinct_values())
                    if perturb == perturbations[0] and task is tasks[0]:
                        case_points[method] = points_by_grade(result.points_table, factory.grades(task.qid))
                elif kind == "sliding-window":
                    baseline = sliding_window_rerank(task.query, candidates, spec, judge)
                    ranking, ledger = list(baseline.ranking), baseline.cost
                else:
                    baseline = pointwise_rerank(task.query, candidates, _scorer(factory, task.qid),
                                                parallelism=config.parallelism)
                    ranking, ledger = list(baseline.ranking), baseline.cost
                rankings[method][task.qid] = ranking
                ledgers[method].append(ledger)
        for method in methods:
            report = evaluate(rankings[method], qrels, ks)
            cells[(method, perturb)] = MethodCell(
                method=method, perturb=perturb, means=report.means,
                docs_sent=_mean([l.docs_sent for l in ledgers[method]]),
                depth=_mean([l.depth for l in ledgers[method]]),
                distinct_points=_mean(distinct[method]) if distinct[method] else None,
            )
        logger.info("finished perturbation %s", perturb)
    return ComparisonReport(ks=tuple(ks), methods=tuple(methods), perturbations=tuple(perturbations),
                            cells=cells, points_by_grade=case_points)


def run_trajectories(tasks: Sequence[QueryTask], qrels: Qrels, config: RunConfig, iterations: int,
                     perturb: str = "keep", k: int = 10, schedule: Optional[TournamentSchedule] = None,
                     factory: Optional[JudgeFactory] = None) -> TrajectoryReport:
    """
    串行滑动窗口第 1..I 次迭代 与 TourRank-r（r = 1..I，取同一次 R=I 运行的前 r 轮）对比
    """
    if iterations < 1:
        raise InvalidArgument(f"iterations must be >= 1, got {iterations}")
    schedule = (schedule or load_schedule(config.schedule, config.rounds)).with_rounds(iterations)
    factory = factory or JudgeFactory(config, qrels)
    options = engine_options(config)
    spec = WindowSpec(config.window, config.step)

    sliding: List[Dict[str, List[str]]] = [{} for _ in range(iterations)]
    tour: List[Dict[str, List[str]]] = [{} for _ in range(iterations)]
    sliding_docs = [0.0] * iterations
    tour_docs = [0.0] * iterations
    for task in tasks:
        candidates: List[Candidate] = prepare(task, config, perturb)
        judge = factory.for_query(task.qid)
        serial = serial_rerank(task.query, candidates,
                               lambda q, c: sliding_window_rerank(q, c, spec, judge), iterations)
        result = run_tourrank(task.query, candidates, schedule, judge, query_seed(config.seed, task.qid), options)
        for i in range(iterations):
            sliding[i][task.qid] = list(serial.trajectory[i])
            sliding_docs[i] += sum(c.docs_sent for c in serial.costs[:i + 1])
            tour[i][task.qid] = rank_by_points(result.points_table.prefix(i + 1), candidates)
            tour_docs[i] += (i + 1) * schedule.docs_per_tournament()

    n = len(tasks)
    points = tuple(
        TrajectoryPoint(step=i + 1,
                        sliding_ndcg=evaluate(sliding[i], qrels, (k,)).means[k], sliding_docs=sliding_docs[i] / n,
                        tourrank_ndcg=evaluate(tour[i], qrels, (k,)).means[k], tourrank_docs=tour_docs[i] / n)
        for i in range(iterations))
    return TrajectoryReport(k=k, perturb=perturb, points=points)


def render_comparison(report: ComparisonReport) -> Table:
    table = Table(title="方法 × 初始顺序", show_header=True)
    table.add_column("方法", style="cyan")
    for k in report.ks:
        for perturb in report.perturbations:
            table.add_column(f"@{k} {perturb}", justify="right", style="green")
        table.add_column(f"@{k} 极差", justify="right", style="yellow")
    table.add_column("文档数/查询", justify="right")
    table.add_column("深度", justify="right")
    for method in report.methods:
        row = []
        for k in report.ks:
            row += [f"{report.mean(method, p, k):.4f}" for p in report.perturbations]
            row.append(f"{report.spread(method, k):.4f}")
        first = report.cells[(method, report.perturbations[0])]
        row += [f"{first.docs_sent:,.0f}", f"{first.depth:g}"]
        table.add_row(method, *row)
    return table


def render_trajectories(report: TrajectoryReport) -> Table:
    table = Table(title=f"串行滑动窗口 vs 并行 TourRank-r (NDCG@{report.k}, {report.perturb})", show_header=True)
    table.add_column("迭代/轮数", justify="right", style="cyan")
    table.add_column("滑动窗口", justify="right", style="green")
    table.add_column("文档数", justify="right", style="dim")
    table.add_column("TourRank", justify="right", style="green")
    table.add_column("文档数", justify="right", style="dim")
    for point in report.points:
        table.add_row(str(point.step), f"{point.sliding_ndcg:.4f}", f"{point.sliding_docs:,.0f}",
                      f"{point.tourrank_ndcg:.4f}", f"{point.tourrank_docs:,.0f}")
    return table


def render_granularity(report: ComparisonReport) -> Table:
    table = Table(title="累计积分粒度", show_header=True)
    table.add_column("方法", style="cyan")
    table.add_column("不同积分值(均值)", justify="right", style="green")
    table.add_column("首个查询: 等级 -> 积分", style="dim")
    for method in report.methods:
        cell = report.cells[(method, report.perturbations[0])]
        if cell.distinct_points is None:
            continue
        case = report.points_by_grade.get(method, {})
        summary = "; ".join(f"{g}: {values[:8]}" for g, values in case.items())
        table.add_row(method, f"{cell.distinct_points:.2f}", summary)
    return table


def report_to_dict(report: ComparisonReport, trajectory: Optional[TrajectoryReport] = None) -> Dict:
    data = {
        "ks": list(report.ks),
        "cells": [{"method": c.method, "perturb": c.perturb, "means": {str(k): v for k, v in c.means.items()},
                   "docs_sent": c.docs_sent, "depth": c.depth, "distinct_points": c.distinct_points}
                  for c in report.cells.values()],
        "spreads": {m: {str(k): report.spread(m, k) for k in report.ks} for m in report.methods},
    }
    if trajectory is not None:
        data["trajectory"] = [vars(p) for p in trajectory.points]
    return data


def cmd_compare(config: RunConfig, corpus: Path, queries: Path, candidates: Path, qrels: Path,
                methods: Sequence[str], perturbations: Sequence[str], ks: Sequence[int] = (10,),
                serial: bool = False, granularity: bool = False, json_path: Optional[Path] = None,
                copy_replay: bool = False) -> bool:
    """
    对比实验
    :param serial: 同时输出串行迭代轨迹（迭代次数取 config.iterations）
    :param granularity: 输出累计积分粒度表
    :param json_path: 把结果写成 JSON
    :return: 操作是否成功
    """
    if not methods:
        raise InvalidArgument("no methods given")
    extra = ["--corpus", str(corpus), "--queries", str(queries), "--candidates", str(candidates),
             "--qrels", str(qrels), "--methods", ",".join(methods), "--perturbations", ",".join(perturbations)]
    line = echo_config("compare", config, extra)
    if copy_replay and copy_to_clipboard(line):
        console.print("[green]复现命令已复制到剪贴板[/]")

    tasks = load_tasks(corpus, queries, candidates)
    qrels_map = read_qrels(qrels)
    factory = JudgeFactory(config, qrels_map)
    with console.status("[bold green]运行对比实验...[/]"):
        report = run_comparison(tasks, qrels_map, config, methods, perturbations, ks, factory=factory)
        trajectory = (run_trajectories(tasks, qrels_map, config, config.iterations, config.perturb,
                                       ks[0], factory=factory)
                      if serial else None)

    console.print(render_comparison(report))
    if granularity:
        console.print(render_granularity(report))
    if trajectory is not None:
        console.print(render_trajectories(trajectory))
    if json_path:
        with open(json_path, "w", encoding="utf-8") as f:
            json.dump(report_to_dict(report, trajectory), f, indent=2)
        console.print(f"[green]结果已写入[/] {json_path}")
    return True
