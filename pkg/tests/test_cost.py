#!/usr/bin/env python
# -*- coding: utf-8 -*-
"""成本台账与解析模型的测试"""

import numpy as np
import pytest

from tourrank import cost
from tourrank.baselines import OracleScorer, WindowSpec, pointwise_rerank, sliding_window_rerank
from tourrank.core import InvalidArgument, default_schedule
from tourrank.cost import (
    METHODS, PARALLEL, SEQUENTIAL, CostLedger, analytic_cost, cmd_cost, ledger_audit, ledger_merge, merge_all,
)
from tourrank.engine import run_tourrank
from tourrank.judge import OracleJudge


def test_parallel_merge():
    merged = ledger_merge(CostLedger(5, 50, 1), CostLedger(5, 50, 1), PARALLEL)
    assert (merged.invocations, merged.docs_sent, merged.depth) == (10, 100, 1)


def test_sequential_merge():
    assert ledger_merge(CostLedger(2, 10, 2), CostLedger(3, 10, 3), SEQUENTIAL).depth == 5


def test_merge_unknown_mode():
    with pytest.raises(InvalidArgument):
        ledger_merge(CostLedger(), CostLedger(), "diagonal")


def test_ledger_invariants():
    with pytest.raises(InvalidArgument):
        CostLedger(invocations=1, depth=2)
    with pytest.raises(InvalidArgument):
        CostLedger(docs_sent=-1)


@pytest.mark.parametrize("mode", [PARALLEL, SEQUENTIAL])
def test_merge_is_associative(mode):
    rng = np.random.default_rng(1)
    for _ in range(200):
        a, b, c = (CostLedger(int(i), int(d), int(min(i, p)), int(r))
                   for i, d, p, r in rng.integers(0, 20, size=(3, 4)))
        left = ledger_merge(ledger_merge(a, b, mode), c, mode)
        right = ledger_merge(a, ledger_merge(b, c, mode), mode)
        assert left == right


def test_analytic_tourrank():
    one = analytic_cost("tourrank", 100, rounds=1)
    assert (one.docs_sent, one.depth) == (185, 5)
    assert one.approx_docs == 200
    two = analytic_cost("tourrank", 100, rounds=2)
    assert (two.docs_sent, two.depth) == (370, 5)


def test_analytic_tourrank_round_width():
    assert analytic_cost("tourrank", 100, rounds=3, round_width=1).depth == 15
    assert analytic_cost("tourrank", 100, rounds=3, round_width=2).depth == 10
    assert analytic_cost("tourrank", 100, rounds=3, round_width=8).depth == 5
    assert analytic_cost("tourrank", 100, rounds=10, round_width=8).docs_sent == 1850
    with pytest.raises(InvalidArgument):
        analytic_cost("tourrank", 100, rounds=3, round_width=0)


def test_analytic_baselines():
    assert analytic_cost("prp_allpair", 100).docs_sent == 9900
    setwise = analytic_cost("setwise_bubblesort", 100, k=10, c=3)
    assert (setwise.docs_sent, setwise.depth) == (1500, 500)
    window = analytic_cost("sliding_window", 100, window=20, step=10)
    assert (window.docs_sent, window.depth) == (180, 9)
    assert window.closed_form_docs == 160
    assert window.approx_docs == 200
    point = analytic_cost("pointwise", 100)
    assert (point.docs_sent, point.depth) == (100, 1)


def test_analytic_errors():
    with pytest.raises(InvalidArgument, match="unknown method"):
        analytic_cost("bogus", 100)
    with pytest.raises(InvalidArgument, match="requires"):
        analytic_cost("setwise_bubblesort", 100, k=10)
    with pytest.raises(InvalidArgument):
        analytic_cost("tourrank", 80)


def test_measured_ledgers_match_models(ideal_pool):
    candidates, grades = ideal_pool
    judge = OracleJudge(grades)
    for rounds in (1, 4):
        result = run_tourrank("q", candidates, default_schedule(rounds), judge, run_seed=rounds)
        assert ledger_audit(result.cost, analytic_cost("tourrank", 100, rounds=rounds)).ok
    window = sliding_window_rerank("q", candidates, WindowSpec(20, 10), judge)
    assert ledger_audit(window.cost, analytic_cost("sliding_window", 100, window=20, step=10)).ok
    point = pointwise_rerank("q", candidates, OracleScorer(grades))
    assert ledger_audit(point.cost, analytic_cost("pointwise", 100)).ok


def test_audit_reports_delta():
    report = ledger_audit(CostLedger(13, 180, 5), analytic_cost("tourrank", 100, rounds=1))
    assert not report.ok
    assert report.docs_delta == -5


def test_cmd_cost_all(capsys):
    params = {"k": 10, "c": 3, "window": 20, "step": 10, "rounds": 2, "schedule": default_schedule()}
    assert cmd_cost("all", 100, params)
    assert cmd_cost("tourrank", 100, params, as_json=True)
    assert "370" in capsys.readouterr().out


def test_merge_all_empty_and_sequence():
    assert merge_all([]) == CostLedger()
    chain = merge_all([CostLedger.call(20), CostLedger.call(20, retries=2)], SEQUENTIAL)
    assert (chain.invocations, chain.docs_sent, chain.depth, chain.retries) == (2, 40, 2, 2)


def test_cmd_cost_all_skips_mismatched_schedule(capsys, monkeypatch):
    shown = []
    monkeypatch.setattr(cost, "render_cost_table", lambda estimates: shown.extend(estimates) or "")
    params = {"k": 10, "c": 3, "window": 20, "step": 10, "rounds": 1, "schedule": default_schedule()}
    assert cmd_cost("all", 50, params)
    assert "跳过 tourrank" in capsys.readouterr().out
    assert [e.method for e in shown] == [m for m in METHODS if m != "tourrank"]
    with pytest.raises(InvalidArgument):
        cmd_cost("tourrank", 50, params)
