#!/usr/bin/env python
# -*- coding: utf-8 -*-
"""
合成数据集
生成语料、查询、qrels 和一阶段候选 run，用于桌面规模的验证
"""

from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Sequence, Tuple

import numpy as np

from .console import console, get_logger
from .core import Candidate, InvalidArgument
from .evaluation import RunEntry, RunFile, write_corpus, write_qrels, write_queries, write_run
from .grouping import make_rng

logger = get_logger(__name__)

# roughly TREC-like sparsity: half the pool unjudged/irrelevant
DEFAULT_DISTRIBUTION = (0.5, 0.25, 0.15, 0.10)
INITIAL_MODES = ("noisy", "ideal", "random")

_FILLER = ("river", "engine", "protocol", "harvest", "lattice", "archive", "signal", "meadow", "copper",
           "ledger", "orbit", "canvas", "thermal", "quarry", "beacon", "fabric", "summit", "vector",
           "glacier", "harbor", "pixel", "timber", "monsoon", "cipher")


@dataclass(frozen=True)
class SyntheticDataset:
    corpus: Dict[str, str]
    queries: Dict[str, str]
    qrels: Dict[str, Dict[str, int]]
    candidates: RunFile

    def pool(self, qid: str) -> List[Candidate]:
        return [Candidate(e.doc_id, self.corpus[e.doc_id], e.rank) for e in self.candidates[qid]]


def parse_distribution(text: str) -> Tuple[float, ...]:
    """"0.5,0.25,0.15,0.1" -> 等级 0..3 的概率"""
    try:
        values = tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise InvalidArgument(f"bad grade distribution {text!r}") from None
    if not values or any(v < 0 for v in values) or abs(sum(values) - 1.0) > 1e-6:
        raise InvalidArgument(f"grade distribution must be non-negative and sum to 1, got {text!r}")
    return values


def generate_synthetic(num_queries: int = 50, pool_size: int = 100,
                       distribution: Sequence[float] = DEFAULT_DISTRIBUTION, seed: int = 7,
                       initial: str = "noisy", noise_scale: float = 1.0) -> SyntheticDataset:
    """
    生成确定性的合成数据
    :param num_queries: 查询数
    :param pool_size: 每个查询的候选池大小
    :param distribution: 等级 0..G 的概率
    :param seed: 随机种子
    :param initial: 初始顺序 noisy（等级加高斯噪声，类似 BM25）/ ideal / random
    :param noise_scale: noisy 模式的噪声标准差
    :return: SyntheticDataset
    """
    if num_queries < 1 or pool_size < 1:
        raise InvalidArgument("num_queries and pool_size must be >= 1")
    if initial not in INITIAL_MODES:
        raise InvalidArgument(f"unknown initial order {initial!r}; expected one of {', '.join(INITIAL_MODES)}")
    probabilities = np.asarray(distribution, dtype=float)
    corpus: Dict[str, str] = {}
    queries: Dict[str, str] = {}
    qrels: Dict[str, Dict[str, int]] = {}
    candidates: RunFile = {}
    for q in range(num_queries):
        qid = f"q{q + 1}"
        rng = make_rng(seed, q)
        queries[qid] = f"synthetic query {q + 1} about " + " ".join(rng.choice(_FILLER, size=3))
        grades = rng.choice(len(probabilities), size=pool_size, p=probabilities)
        doc_ids = [f"{qid}d{i + 1}" for i in range(pool_size)]
        for doc_id in doc_ids:
            corpus[doc_id] = f"{doc_id} " + " ".join(rng.choice(_FILLER, size=12))
        qrels[qid] = {d: int(g) for d, g in zip(doc_ids, grades)}

        if initial == "ideal":
            keys = [(-int(g), i) for i, g in enumerate(grades)]
        elif initial == "noisy":
            noisy = grades + rng.normal(0.0, noise_scale, size=pool_size)
            keys = [(-float(s), i) for i, s in enumerate(noisy)]
        else:
            keys = [(int(p), i) for i, p in enumerate(rng.permutation(pool_size))]
        order = [i for _, i in sorted(keys)]
        candidates[qid] = [RunEntry(doc_ids[i], rank, float(pool_size - rank + 1))
                           for rank, i in enumerate(order, 1)]
    return SyntheticDataset(corpus=corpus, queries=queries, qrels=qrels, candidates=candidates)


def write_dataset(dataset: SyntheticDataset, out_dir: Path) -> Dict[str, Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {
        "corpus": out_dir / "corpus.jsonl",
        "queries": out_dir / "queries.tsv",
        "qrels": out_dir / "qrels.txt",
        "candidates": out_dir / "candidates.run",
    }
    write_corpus(paths["corpus"], dataset.corpus)
    write_queries(paths["queries"], dataset.queries)
    write_qrels(paths["qrels"], dataset.qrels)
    write_run(paths["candidates"], dataset.candidates, tag="synthetic")
    return paths


def cmd_synth(num_queries: int, pool_size: int, distribution: Sequence[float], seed: int, out_dir: Path,
              initial: str = "noisy") -> bool:
    """
    写出合成数据集
    :return: 操作是否成功
    """
    dataset = generate_synthetic(num_queries, pool_size, distribution, seed, initial)
    paths = write_dataset(dataset, out_dir)
    logger.info("wrote %d queries x %d docs to %s", num_queries, pool_size, out_dir)
    for name, path in paths.items():
        console.print(f"[green]{name}[/]: {path}")
    return True
