#!/usr/bin/env python
# -*- coding: utf-8 -*-
"""LLM 评审走本地 chat-completions 桩服务器的端到端测试"""

import threading

import pytest

from tourrank.baselines import Graded, LLMGradeScorer, ScorerError, pointwise_rerank
from tourrank.core import Candidate, JudgeAuthError, JudgeUnavailable, TournamentSchedule, make_stage
from tourrank.engine import EngineOptions, run_tourrank
from tourrank.judge import Judge, JudgeRequest, LLMJudge, OrderingJudgeRequest, llm_select


def request_of(n, m):
    return JudgeRequest.from_docs("what is tea", [Candidate(f"d{i}", f"passage {i}", i) for i in range(1, n + 1)], m)


class RecordingJudge(Judge):
    def __init__(self, inner: Judge):
        self.inner = inner
        self.selections = []
        self._lock = threading.Lock()

    def select(self, request):
        selection = self.inner.select(request)
        with self._lock:
            self.selections.append(selection)
        return selection

    def order(self, request):
        return self.inner.order(request)


def test_well_formed_reply(stub_server, stub_client):
    stub_server.script = ["Document 2"]
    selection = LLMJudge(stub_client).select(request_of(3, 1))
    assert selection.chosen_labels == (2,)
    assert not selection.repair_applied
    assert selection.retries == 0
    sent = stub_server.requests[0]
    assert sent["model"] == "stub-model"
    assert sent["temperature"] == 0
    assert len(sent["messages"]) == 2 * 3 + 4


def test_one_shot_select(stub_server, stub_client):
    stub_server.script = ["Document 1, Document 3"]
    selection = llm_select(request_of(4, 2), stub_client.endpoint)
    assert selection.chosen_labels == (1, 3)
    assert len(stub_server.requests) == 1


def test_malformed_reply_is_repaired(stub_server, stub_client):
    stub_server.script = ["I would go with the third one, maybe Document 7"]
    selection = LLMJudge(stub_client).select(request_of(3, 1))
    assert selection.chosen_labels == (1,)
    assert selection.repair_applied


def test_timeouts_then_answer(stub_server, stub_client):
    stub_server.script = ["timeout", "timeout", "Document 3"]
    selection = LLMJudge(stub_client).select(request_of(3, 1))
    assert selection.chosen_labels == (3,)
    assert selection.retries == 2
    assert stub_client.sleeps == [0.5, 1.0]


def test_server_errors_then_answer(stub_server, stub_client):
    stub_server.script = [503, 429, "Document 1, Document 2"]
    selection = LLMJudge(stub_client).select(request_of(4, 2))
    assert selection.chosen_labels == (1, 2)
    assert selection.retries == 2


def test_retry_cap(stub_server, stub_client):
    stub_server.script = [503] * 5
    with pytest.raises(JudgeUnavailable, match="after 3 retries"):
        LLMJudge(stub_client).select(request_of(3, 1))
    assert len(stub_server.requests) == 4


def test_rejected_credentials(stub_server, stub_client):
    stub_server.script = [401]
    with pytest.raises(JudgeAuthError):
        LLMJudge(stub_client).select(request_of(3, 1))


def test_ordering_request(stub_server, stub_client):
    docs = [Candidate(f"d{i}", f"passage {i}", i) for i in range(1, 5)]
    selection = LLMJudge(stub_client).order(OrderingJudgeRequest.from_docs("q", docs))
    assert selection.chosen_labels == (4, 3, 2, 1)


def test_grade_scorer(stub_server, stub_client):
    stub_server.script = ["Relevance: 7", "no idea", "42"]
    scorer = LLMGradeScorer(stub_client)
    candidate = Candidate("d1", "passage", 1)
    assert scorer("q", candidate) == Graded(7.0)
    with pytest.raises(ScorerError):
        scorer("q", candidate)
    assert scorer("q", candidate) == Graded(10.0)


def test_pointwise_ledger_counts_retries(stub_server, stub_client):
    stub_server.script = [503, "5"]
    candidates = [Candidate("d1", "passage 1", 1), Candidate("d2", "passage 2", 2)]
    result = pointwise_rerank("q", candidates, LLMGradeScorer(stub_client), parallelism=1)
    assert result.ranking[0] == "d1"
    assert (result.cost.invocations, result.cost.docs_sent, result.cost.retries) == (2, 2, 1)
    assert len(stub_server.requests) == 3


def test_twenty_doc_schedule_end_to_end(stub_server, stub_client):
    schedule = TournamentSchedule((make_stage(20, 10, 2), make_stage(10, 4, 2), make_stage(4, 2, 1)), rounds=2)
    candidates = [Candidate(f"d{i}", f"passage {i}", i) for i in range(1, 21)]
    stub_server.script = [503, "nothing useful here"]
    judge = RecordingJudge(LLMJudge(stub_client))
    result = run_tourrank("what is tea", candidates, schedule, judge, run_seed=3, options=EngineOptions(parallelism=4))
    assert result.rounds_effective == 2
    assert result.cost.invocations == 10
    assert result.cost.docs_sent == 68
    assert result.cost.depth == 3
    assert result.cost.retries == 1
    assert sum(s.repair_applied for s in judge.selections) == 1
    assert sum(s.retries for s in judge.selections) == 1
    for r in (1, 2):
        assert result.points_table.histogram(r) == {3: 2, 2: 2, 1: 6, 0: 10}
    assert len(stub_server.requests) == 11
