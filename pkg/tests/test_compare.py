#!/usr/bin/env python
# -*- coding: utf-8 -*-
"""对比实验驱动的测试（小规模）"""

import pytest

from tourrank.compare import parse_method, report_to_dict, run_comparison, run_trajectories
from tourrank.core import InvalidArgument
from tourrank.rank import QueryTask
from tourrank.utils import RunConfig


@pytest.fixture
def tasks(small_dataset):
    return [QueryTask(qid, small_dataset.queries[qid], small_dataset.pool(qid)) for qid in small_dataset.queries]


def test_parse_method():
    assert parse_method("tourrank-10") == ("tourrank", 10)
    assert parse_method("sliding-window") == ("sliding-window", 0)
    for bad in ("tourrank-0", "tourrank", "rankgpt"):
        with pytest.raises(InvalidArgument):
            parse_method(bad)


def test_empty_methods(small_dataset, tasks):
    with pytest.raises(InvalidArgument, match="no methods"):
        run_comparison(tasks, small_dataset.qrels, RunConfig(seed=1), [])


def test_comparison_table(small_dataset, tasks):
    config = RunConfig(judge="noisy", seed=1)
    methods = ["tourrank-2", "sliding-window", "pointwise"]
    report = run_comparison(tasks, small_dataset.qrels, config, methods, ("keep", "reverse"), ks=(5, 10))
    assert set(report.cells) == {(m, p) for m in methods for p in ("keep", "reverse")}
    assert report.cells[("tourrank-2", "keep")].docs_sent == 370
    assert report.cells[("tourrank-2", "keep")].depth == 5
    assert report.cells[("sliding-window", "reverse")].docs_sent == 180
    assert report.cells[("sliding-window", "reverse")].depth == 9
    assert report.cells[("pointwise", "keep")].docs_sent == 100
    assert report.cells[("pointwise", "keep")].distinct_points is None
    for cell in report.cells.values():
        assert all(0.0 <= v <= 1.0 for v in cell.means.values())
    assert report.spread("tourrank-2", 10) >= 0.0
    assert "tourrank-2" in report.points_by_grade
    data = report_to_dict(report)
    assert len(data["cells"]) == 6


def test_trajectories_docs_match(small_dataset, tasks):
    report = run_trajectories(tasks, small_dataset.qrels, RunConfig(judge="noisy", seed=2), iterations=3)
    assert [p.step for p in report.points] == [1, 2, 3]
    assert [p.sliding_docs for p in report.points] == [180, 360, 540]
    assert [p.tourrank_docs for p in report.points] == [185, 370, 555]
