#!/usr/bin/env python
# -*- coding: utf-8 -*-
"""合成数据集的测试"""

from collections import Counter

import pytest

from tourrank.core import InvalidArgument
from tourrank.synth import DEFAULT_DISTRIBUTION, generate_synthetic, parse_distribution, write_dataset


def test_same_seed_same_bytes(tmp_path):
    first = write_dataset(generate_synthetic(5, 100, seed=7), tmp_path / "a")
    second = write_dataset(generate_synthetic(5, 100, seed=7), tmp_path / "b")
    for name in first:
        assert first[name].read_bytes() == second[name].read_bytes()


def test_grade_histogram_matches_distribution():
    dataset = generate_synthetic(num_queries=100, pool_size=100, seed=7)
    counts = Counter(g for grades in dataset.qrels.values() for g in grades.values())
    total = sum(counts.values())
    assert total == 10_000
    for grade, expected in enumerate(DEFAULT_DISTRIBUTION):
        assert abs(counts[grade] / total - expected) < 0.05


def test_qrels_cover_pool():
    dataset = generate_synthetic(num_queries=3, pool_size=40, seed=1)
    for qid, grades in dataset.qrels.items():
        assert len(grades) == 40
        assert {e.doc_id for e in dataset.candidates[qid]} == set(grades)
        pool = dataset.pool(qid)
        assert [c.initial_rank for c in pool] == list(range(1, 41))
        assert all(c.doc_id in c.text for c in pool)


def test_ideal_initial_order():
    dataset = generate_synthetic(num_queries=2, pool_size=50, seed=2, initial="ideal")
    for qid, grades in dataset.qrels.items():
        ordered = [grades[c.doc_id] for c in dataset.pool(qid)]
        assert ordered == sorted(ordered, reverse=True)


def test_bad_arguments():
    with pytest.raises(InvalidArgument):
        generate_synthetic(num_queries=0)
    with pytest.raises(InvalidArgument):
        generate_synthetic(initial="sorted")


def test_parse_distribution():
    assert parse_distribution("0.5,0.5") == (0.5, 0.5)
    with pytest.raises(InvalidArgument):
        parse_distribution("0.5,0.6")
    with pytest.raises(InvalidArgument):
        parse_distribution("a,b")
