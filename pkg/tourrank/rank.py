#!/usr/bin/env python
# -*- coding: utf-8 -*-
"""
rank 命令
对查询集合运行 TourRank，写出 TREC run 文件和成本报告
"""

import json
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence

from rich.table import Table

from .console import console, get_logger
from .core import Candidate, InvalidArgument, TournamentSchedule
from .cost import PARALLEL, analytic_cost, ledger_audit, merge_all
from .engine import EngineOptions, RankingResult, run_tourrank
from .evaluation import (
    Qrels, RunEntry, build_candidates, evaluate, perturb_initial, read_corpus, read_qrels, read_queries,
    read_run, render_report, write_run,
)
from .grouping import derive_seed
from .judge import ChatClient, Judge, LLMJudge, NoiseSpec, NoisyJudge, OracleJudge, ThrottledJudge
from .utils import RunConfig, copy_to_clipboard, echo_config, load_schedule, stable_hash

logger = get_logger(__name__)

# seed path tags under a query seed
_PERTURB, _NOISE = 1, 2


@dataclass(frozen=True)
class QueryTask:
    qid: str
    query: str
    candidates: List[Candidate]


@dataclass(frozen=True)
class QueryOutcome:
    qid: str
    candidates: List[Candidate]
    result: RankingResult


def query_seed(seed: int, qid: str, *path: int) -> int:
    return derive_seed(seed, stable_hash(qid), *path)


def noise_seed(seed: int, qid: str) -> int:
    """带噪评审与打分器共用的种子，各方法、各扰动之间相同"""
    return query_seed(seed, qid, _NOISE)


def load_tasks(corpus_path: Path, queries_path: Path, candidates_path: Path) -> List[QueryTask]:
    """
    读取语料、查询和一阶段候选 run，按查询文件顺序返回
    """
    corpus = read_corpus(corpus_path)
    queries = read_queries(queries_path)
    run = read_run(candidates_path)
    unknown = sorted(set(run) - set(queries))
    if unknown:
        raise InvalidArgument(f"candidates reference unknown query {unknown[0]!r}")
    tasks = [QueryTask(qid, text, build_candidates(run[qid], corpus, qid)) for qid, text in queries.items()
             if qid in run]
    if not tasks:
        raise InvalidArgument("no query has candidates")
    return tasks


class JudgeFactory:
    """
    按配置为每个查询构造评审；所有评审共享一个信号量，
    即整个进程同时在途的评审调用数只有一个上限
    """

    def __init__(self, config: RunConfig, qrels: Optional[Qrels] = None, client: Optional[ChatClient] = None):
        self.config = config
        self.qrels = qrels or {}
        self.limiter = threading.BoundedSemaphore(config.parallelism)
        self._client = client
        if config.judge == "llm" and client is None:
            self._client = ChatClient(config.endpoint_config())
        if config.judge in ("oracle", "noisy") and not self.qrels:
            raise InvalidArgument(f"the {config.judge} judge needs qrels (--qrels)")

    @property
    def client(self) -> Optional[ChatClient]:
        return self._client

    def grades(self, qid: str) -> Dict[str, int]:
        return dict(self.qrels.get(qid, {}))

    def for_query(self, qid: str) -> Judge:
        if self.config.judge == "oracle":
            inner: Judge = OracleJudge(self.grades(qid))
        elif self.config.judge == "noisy":
            noise = NoiseSpec(self.config.epsilon, noise_seed(self.config.seed, qid))
            inner = NoisyJudge(self.grades(qid), noise)
        else:
            inner = LLMJudge(self._client)
        return ThrottledJudge(inner, self.limiter)


def engine_options(config: RunConfig) -> EngineOptions:
    return EngineOptions(parallelism=config.parallelism, lenient=config.lenient,
                         redeal_groups=config.redeal_groups, serial_rounds=config.serial_rounds)


def prepare(task: QueryTask, config: RunConfig, mode: Optional[str] = None) -> List[Candidate]:
    """按扰动模式改写初始顺序"""
    return perturb_initial(task.candidates, mode or config.perturb, query_seed(config.seed, task.qid, _PERTURB))


def rank_queries(tasks: Sequence[QueryTask], config: RunConfig, schedule: TournamentSchedule,
                 factory: JudgeFactory) -> List[QueryOutcome]:
    """
    查询之间并行；结果按输入顺序返回
    """
    options = engine_options(config)

    def one(task: QueryTask) -> QueryOutcome:
        candidates = prepare(task, config)
        result = run_tourrank(task.query, candidates, schedule, factory.for_query(task.qid),
                              query_seed(config.seed, task.qid), options)
        logger.info("ranked %s: %d rounds, %d docs sent", task.qid, result.rounds_effective,
                    result.cost.docs_sent)
        return QueryOutcome(task.qid, candidates, result)

    with ThreadPoolExecutor(max_workers=config.parallelism, thread_name_prefix="query") as pool:
        return list(pool.map(one, tasks))


def run_score(points: int, initial_rank: int, n: int) -> float:
    """积分加上按初始排名编码的小数，保证分数严格递减且与排序规则一致"""
    return points + (n - initial_rank) / n * 1e-3


def to_run_entries(outcome: QueryOutcome) -> List[RunEntry]:
    ranks = {c.doc_id: c.initial_rank for c in outcome.candidates}
    n = len(outcome.candidates)
    accumulated = outcome.result.points_table.accumulated
    return [RunEntry(doc_id, i, run_score(accumulated[doc_id], ranks[doc_id], n))
            for i, doc_id in enumerate(outcome.result.ranking, 1)]


def cost_report(outcomes: Sequence[QueryOutcome], schedule: TournamentSchedule) -> Dict:
    per_query = {}
    for outcome in outcomes:
        result = outcome.result
        predicted = analytic_cost("tourrank", len(outcome.candidates), schedule=schedule,
                                  rounds=result.rounds_effective, round_width=result.round_width)
        audit = ledger_audit(result.cost, predicted)
        per_query[outcome.qid] = {
            **result.cost.to_dict(),
            "rounds_effective": result.rounds_effective,
            "failed_rounds": list(result.failed_rounds),
            "run_seed": result.run_seed,
            "predicted_docs_sent": predicted.docs_sent,
            "predicted_depth": predicted.depth,
            "audit_ok": audit.ok,
        }
    total = merge_all((o.result.cost for o in outcomes), PARALLEL)
    prng = outcomes[0].result.prng if outcomes else ""
    return {"per_query": per_query, "total": total.to_dict(), "prng": prng}


def render_cost(report: Mapping) -> Table:
    table = Table(title="成本报告", show_header=True)
    table.add_column("查询", style="cyan")
    for column in ("invocations", "docs_sent", "depth", "retries"):
        table.add_column(column, justify="right", style="green")
    table.add_column("审计", justify="center")
    for qid, row in report["per_query"].items():
        table.add_row(qid, *(f"{row[c]:,}" for c in ("invocations", "docs_sent", "depth", "retries")),
                      "[green]✓[/]" if row["audit_ok"] else "[yellow]Δ[/]")
    total = report["total"]
    table.add_row("[bold]合计[/]", *(f"[bold]{total[c]:,}[/]" for c in ("invocations", "docs_sent", "depth", "retries")),
                  "")
    return table


def cmd_rank(config: RunConfig, corpus: Path, queries: Path, candidates: Path, output: Path,
             qrels: Optional[Path] = None, cost_path: Optional[Path] = None, tag: str = "tourrank",
             copy_replay: bool = False) -> bool:
    """
    运行 TourRank 并写出 run 文件和成本报告
    :param config: 有效配置
    :param corpus: JSONL 语料
    :param queries: TSV 查询
    :param candidates: 一阶段候选 run 文件
    :param output: 输出 run 文件
    :param qrels: qrels 文件（oracle / noisy 评审必需；给出时顺带打印 NDCG）
    :param cost_path: 成本报告 JSON，默认 <output>.cost.json
    :return: 操作是否成功
    """
    extra = ["--corpus", str(corpus), "--queries", str(queries), "--candidates", str(candidates),
             "--output", str(output)] + (["--qrels", str(qrels)] if qrels else [])
    line = echo_config("rank", config, extra)
    if copy_replay and copy_to_clipboard(line):
        console.print("[green]复现命令已复制到剪贴板[/]")

    schedule = load_schedule(config.schedule, config.rounds)
    tasks = load_tasks(corpus, queries, candidates)
    qrels_map = read_qrels(qrels) if qrels else None
    factory = JudgeFactory(config, qrels_map)

    with console.status(f"[bold green]排序 {len(tasks)} 个查询...[/]"):
        outcomes = rank_queries(tasks, config, schedule, factory)

    write_run(output, {o.qid: to_run_entries(o) for o in outcomes}, tag)
    report = cost_report(outcomes, schedule)
    cost_path = Path(cost_path) if cost_path else Path(str(output) + ".cost.json")
    with open(cost_path, "w", encoding="utf-8") as f:
        json.dump(report, f, indent=2, ensure_ascii=False)

    console.print(render_cost(report))
    console.print(f"[bold green]run 文件:[/] {output}\n[bold green]成本报告:[/] {cost_path}")
    dropped = sum(len(o.result.failed_rounds) for o in outcomes)
    if dropped:
        console.print(f"[bold yellow]警告:[/] 宽松模式丢弃了 {dropped} 个失败轮次")
    if qrels_map:
        console.print(render_report(evaluate({o.qid: list(o.result.ranking) for o in outcomes}, qrels_map,
                                             (5, 10, 20))))
    return True
