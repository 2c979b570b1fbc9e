#!/usr/bin/env python
# -*- coding: utf-8 -*-
"""
评估模块
NDCG@k、TREC qrels / run 文件读写、语料与查询文件、初始顺序扰动
"""

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, NamedTuple, Sequence, Tuple, Union

from rich.table import Table

from .console import console
from .core import Candidate, DataFormatError, InvalidArgument, PointsTable, by_initial_rank
from .grouping import make_rng

Qrels = Dict[str, Dict[str, int]]
PathLike = Union[str, Path]

PERTURBATIONS = ("keep", "shuffle", "reverse")


class RunEntry(NamedTuple):
    doc_id: str
    rank: int
    score: float


RunFile = Dict[str, List[RunEntry]]


def dcg_at_k(ranking: Sequence[str], grades: Mapping[str, int], k: int) -> float:
    return sum((2 ** grades.get(doc_id, 0) - 1) / math.log2(i + 2) for i, doc_id in enumerate(ranking[:k]))


def ndcg_at_k(ranking: Sequence[str], grades: Mapping[str, int], k: int) -> float:
    """
    指数增益 (2^g - 1) 与 log2(i+1) 折扣；IDCG 为 0 时返回 0
    :param ranking: 排好序的 doc_id
    :param grades: 相关性等级，缺失视为 0
    :param k: 截断位置
    :return: [0, 1] 内的 NDCG@k
    """
    if k < 1:
        raise InvalidArgument(f"k must be >= 1, got {k}")
    ideal = sorted(grades.values(), reverse=True)[:k]
    idcg = sum((2 ** g - 1) / math.log2(i + 2) for i, g in enumerate(ideal))
    if idcg <= 0:
        return 0.0
    return dcg_at_k(ranking, grades, k) / idcg


def perturb_initial(candidates: Sequence[Candidate], mode: str, seed: int = 0) -> List[Candidate]:
    """
    改变初始顺序，并按新顺序重新分配 initial_rank 1..N
    :param mode: keep / shuffle / reverse
    """
    ordered = by_initial_rank(candidates)
    if mode == "keep":
        return ordered
    if mode == "reverse":
        ordered = ordered[::-1]
    elif mode == "shuffle":
        ordered = [ordered[int(i)] for i in make_rng(seed).permutation(len(ordered))]
    else:
        raise InvalidArgument(f"unknown perturbation {mode!r}; expected one of {', '.join(PERTURBATIONS)}")
    return [replace(c, initial_rank=rank) for rank, c in enumerate(ordered, 1)]


def _lines(path: PathLike):
    with open(path, "r", encoding="utf-8") as f:
        for number, line in enumerate(f, 1):
            if line.strip():
                yield number, line.split()


def read_qrels(path: PathLike) -> Qrels:
    """TREC qrels：`qid 0 docid grade`"""
    qrels: Qrels = {}
    for number, parts in _lines(path):
        if len(parts) != 4:
            raise DataFormatError(f"{path}:{number}: expected 4 fields in qrels line, got {len(parts)}")
        qid, _, doc_id, grade = parts
        try:
            value = int(grade)
        except ValueError:
            raise DataFormatError(f"{path}:{number}: grade {grade!r} is not an integer") from None
        if value < 0:
            raise DataFormatError(f"{path}:{number}: negative grade {value}")
        qrels.setdefault(qid, {})[doc_id] = value
    return qrels


def write_qrels(path: PathLike, qrels: Mapping[str, Mapping[str, int]]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for qid, grades in qrels.items():
            for doc_id, grade in grades.items():
                f.write(f"{qid} 0 {doc_id} {grade}\n")


def write_run(path: PathLike, runs: Mapping[str, Sequence[RunEntry]], tag: str = "tourrank") -> None:
    """TREC run：`qid Q0 docid rank score tag`，分数用 repr 保证无损往返"""
    if not tag or any(ch.isspace() for ch in tag):
        raise InvalidArgument(f"run tag must be a non-empty token, got {tag!r}")
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for qid, entries in runs.items():
            for entry in entries:
                f.write(f"{qid} Q0 {entry.doc_id} {entry.rank} {float(entry.score)!r} {tag}\n")


def read_run(path: PathLike) -> RunFile:
    run: RunFile = {}
    for number, parts in _lines(path):
        if len(parts) != 6:
            raise DataFormatError(f"{path}:{number}: expected 6 fields in run line, got {len(parts)}")
        qid, _, doc_id, rank, score, _tag = parts
        try:
            entry = RunEntry(doc_id, int(rank), float(score))
        except ValueError:
            raise DataFormatError(f"{path}:{number}: bad rank or score") from None
        run.setdefault(qid, []).append(entry)
    for entries in run.values():
        entries.sort(key=lambda e: e.rank)
    return run


def read_corpus(path: PathLike) -> Dict[str, str]:
    """JSONL 语料，每行含 doc_id 与 text"""
    corpus: Dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as f:
        for number, line in enumerate(f, 1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
                corpus[str(record["doc_id"])] = str(record["text"])
            except (json.JSONDecodeError, KeyError, TypeError) as e:
                raise DataFormatError(f"{path}:{number}: bad corpus record ({e})") from None
    return corpus


def write_corpus(path: PathLike, corpus: Mapping[str, str]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for doc_id, text in corpus.items():
            f.write(json.dumps({"doc_id": doc_id, "text": text}, ensure_ascii=False) + "\n")


def read_queries(path: PathLike) -> Dict[str, str]:
    """TSV 查询文件：qid<TAB>text"""
    queries: Dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as f:
        for number, line in enumerate(f, 1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            if "\t" not in line:
                raise DataFormatError(f"{path}:{number}: expected qid<TAB>text")
            qid, text = line.split("\t", 1)
            queries[qid.strip()] = text
    return queries


def write_queries(path: PathLike, queries: Mapping[str, str]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for qid, text in queries.items():
            f.write(f"{qid}\t{text}\n")


def build_candidates(entries: Sequence[RunEntry], corpus: Mapping[str, str], qid: str = "") -> List[Candidate]:
    """一阶段检索 run 中某个查询的候选，initial_rank 为 run 中的名次顺序"""
    missing = [e.doc_id for e in entries if e.doc_id not in corpus]
    if missing:
        raise DataFormatError(f"query {qid}: candidate {missing[0]!r} not found in corpus")
    ordered = sorted(entries, key=lambda e: e.rank)
    return [Candidate(doc_id=e.doc_id, text=corpus[e.doc_id], initial_rank=i) for i, e in enumerate(ordered, 1)]


@dataclass(frozen=True)
class EvaluationReport:
    ks: Tuple[int, ...]
    per_query: Dict[str, Dict[int, float]] = field(default_factory=dict)
    means: Dict[int, float] = field(default_factory=dict)
    skipped: Tuple[str, ...] = ()


def _ranked_ids(entries) -> List[str]:
    entries = list(entries)
    if entries and isinstance(entries[0], RunEntry):
        return [e.doc_id for e in sorted(entries, key=lambda e: e.rank)]
    return [str(e) for e in entries]


def evaluate(run: Mapping[str, Sequence[Union[RunEntry, str]]], qrels: Mapping[str, Mapping[str, int]],
             ks: Iterable[int] = (5, 10, 20)) -> EvaluationReport:
    """
    逐查询 NDCG@k 与算术平均
    :param run: qid -> RunEntry 列表或 doc_id 顺序
    :param qrels: 相关性判断
    :param ks: 截断位置
    :return: EvaluationReport；不在 qrels 中的查询记入 skipped
    """
    ks = tuple(ks)
    if not ks:
        raise InvalidArgument("need at least one cutoff k")
    per_query: Dict[str, Dict[int, float]] = {}
    skipped = []
    for qid, entries in run.items():
        if qid not in qrels:
            skipped.append(qid)
            continue
        ranking = _ranked_ids(entries)
        per_query[qid] = {k: ndcg_at_k(ranking, qrels[qid], k) for k in ks}
    if not per_query:
        raise InvalidArgument("run and qrels share no queries")
    means = {k: sum(scores[k] for scores in per_query.values()) / len(per_query) for k in ks}
    return EvaluationReport(ks=ks, per_query=per_query, means=means, skipped=tuple(skipped))


def points_by_grade(points_table: PointsTable, grades: Mapping[str, int]) -> Dict[int, List[int]]:
    """每个相关性等级下各文档的累计积分（降序）"""
    table: Dict[int, List[int]] = {}
    for doc_id, points in points_table.accumulated.items():
        table.setdefault(grades.get(doc_id, 0), []).append(points)
    return {grade: sorted(values, reverse=True) for grade, values in sorted(table.items(), reverse=True)}


def render_report(report: EvaluationReport, per_query: bool = False) -> Table:
    table = Table(title="NDCG", show_header=True)
    table.add_column("查询", style="cyan")
    for k in report.ks:
        table.add_column(f"NDCG@{k}", style="green", justify="right")
    if per_query:
        for qid, scores in report.per_query.items():
            table.add_row(qid, *(f"{scores[k]:.4f}" for k in report.ks))
    table.add_row(f"[bold]平均 ({len(report.per_query)})[/]", *(f"[bold]{report.means[k]:.4f}[/]" for k in report.ks))
    return table


def cmd_eval(run_path: PathLike, qrels_path: PathLike, ks: Sequence[int], per_query: bool = False,
             as_json: bool = False) -> bool:
    """
    评估 run 文件
    :return: 操作是否成功
    """
    report = evaluate(read_run(run_path), read_qrels(qrels_path), ks)
    if as_json:
        console.print_json(json.dumps({
            "means": {str(k): v for k, v in report.means.items()},
            "per_query": {q: {str(k): v for k, v in s.items()} for q, s in report.per_query.items()},
            "skipped": list(report.skipped),
        }))
        return True
    console.print(render_report(report, per_query))
    if report.skipped:
        console.print(f"[yellow]跳过 {len(report.skipped)} 个没有 qrels 的查询[/]")
    return True
