#!/usr/bin/env python
# -*- coding: utf-8 -*-
"""
评审（judge）模块
"从 n 篇文档中选出最相关的 m 篇" 的抽象，以及三种实现：
真值评审（oracle）、带噪评审（noisy oracle）和对话式 LLM 评审
"""

import hashlib
import os
import re
import threading
import time
from abc import ABC, abstractmethod
from dataclasses import dataclass, replace
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple

import openai

from .console import get_logger
from .core import Candidate, InvalidArgument, JudgeAuthError, JudgeUnavailable
from .grouping import make_rng

logger = get_logger(__name__)

Message = Dict[str, str]


class _Presented:
    """按呈现顺序编号的文档列表；标签从 1 开始"""

    presented: Tuple[Tuple[int, Candidate], ...]

    @property
    def n(self) -> int:
        return len(self.presented)

    @property
    def docs(self) -> List[Candidate]:
        return [doc for _, doc in self.presented]

    def doc_for(self, label: int) -> Candidate:
        return self.presented[label - 1][1]


@dataclass(frozen=True)
class JudgeRequest(_Presented):
    """一次组内选择任务；标签 1..n 按呈现顺序"""
    query: str
    presented: Tuple[Tuple[int, Candidate], ...]
    m: int

    @classmethod
    def from_docs(cls, query: str, docs: Sequence[Candidate], m: int) -> "JudgeRequest":
        request = cls(query=query, presented=tuple((i, doc) for i, doc in enumerate(docs, 1)), m=m)
        request.validate()
        return request

    def validate(self) -> None:
        if [label for label, _ in self.presented] != list(range(1, self.n + 1)):
            raise InvalidArgument("labels must be 1..n in presentation order")
        if not 1 <= self.m < self.n:
            raise InvalidArgument(f"m={self.m} must satisfy 1 <= m < n={self.n}")


@dataclass(frozen=True)
class OrderingJudgeRequest(_Presented):
    """滑动窗口基线用：对窗口内 ω 篇文档给出完整排序"""
    query: str
    presented: Tuple[Tuple[int, Candidate], ...]

    @classmethod
    def from_docs(cls, query: str, docs: Sequence[Candidate]) -> "OrderingJudgeRequest":
        if not docs:
            raise InvalidArgument("ordering request needs at least one document")
        return cls(query=query, presented=tuple((i, doc) for i, doc in enumerate(docs, 1)))


@dataclass(frozen=True)
class JudgeSelection:
    chosen_labels: Tuple[int, ...]
    repair_applied: bool = False
    raw_response: Optional[str] = None
    retries: int = 0

    def chosen_doc_ids(self, request) -> List[str]:
        return [request.presented[label - 1][1].doc_id for label in self.chosen_labels]


@dataclass(frozen=True)
class NoiseSpec:
    epsilon: float
    seed: int

    def __post_init__(self):
        if not 0.0 <= self.epsilon <= 1.0:
            raise InvalidArgument(f"epsilon={self.epsilon} must be within [0, 1]")


class Judge(ABC):
    """所有评审实现的统一接口"""

    name = "judge"

    @abstractmethod
    def select(self, request: JudgeRequest) -> JudgeSelection:
        """选出 m 个标签"""

    @abstractmethod
    def order(self, request: OrderingJudgeRequest) -> JudgeSelection:
        """给出全部 n 个标签的排序（m = n）"""

    def __repr__(self) -> str:
        return f"{self.__class__.__name__}()"


def judge_select(judge: Judge, request: JudgeRequest) -> JudgeSelection:
    """
    接口契约：请求合法，返回的选择恰好 m 个互不相同且在范围内的标签
    """
    request.validate()
    selection = judge.select(request)
    labels = selection.chosen_labels
    if len(labels) != request.m or len(set(labels)) != request.m or not all(1 <= x <= request.n for x in labels):
        raise InvalidArgument(f"{judge!r} returned an invalid selection {labels}")
    return selection


def _grade_key(label: int, doc: Candidate, grades: Mapping[str, int]) -> Tuple[int, int, int]:
    return (-grades.get(doc.doc_id, 0), doc.initial_rank, label)


def _oracle_labels(presented, grades: Mapping[str, int]) -> List[int]:
    return [label for label, doc in sorted(presented, key=lambda p: _grade_key(p[0], p[1], grades))]


def oracle_select(request: JudgeRequest, grades: Mapping[str, int]) -> JudgeSelection:
    """等级最高的 m 个；同分按 initial_rank，再按标签；缺失等级视为 0"""
    return JudgeSelection(chosen_labels=tuple(_oracle_labels(request.presented, grades)[:request.m]))


def oracle_order(request: OrderingJudgeRequest, grades: Mapping[str, int]) -> JudgeSelection:
    return JudgeSelection(chosen_labels=tuple(_oracle_labels(request.presented, grades)))


def request_fingerprint(query: str, docs: Sequence[Candidate], m: int) -> int:
    """与呈现内容绑定的 63 位指纹，保证带噪评审在并发下也可复现"""
    digest = hashlib.sha256()
    digest.update(query.encode("utf-8"))
    for doc in docs:
        digest.update(b"\x00" + doc.doc_id.encode("utf-8"))
    digest.update(f"\x01{m}".encode("ascii"))
    return int.from_bytes(digest.digest()[:8], "big") >> 1


def noisy_select(request: JudgeRequest, grades: Mapping[str, int], noise: NoiseSpec) -> JudgeSelection:
    """
    从真值选择出发，每个入选位置以概率 epsilon 与一个随机的未入选标签交换
    :param request: 选择请求
    :param grades: 文档等级
    :param noise: 噪声参数
    :return: JudgeSelection
    """
    oracle = _oracle_labels(request.presented, grades)
    chosen, pool = oracle[:request.m], oracle[request.m:]
    if noise.epsilon <= 0.0:
        return JudgeSelection(chosen_labels=tuple(chosen))
    pool.sort()
    rng = make_rng(noise.seed, request_fingerprint(request.query, request.docs, request.m))
    for slot in range(len(chosen)):
        if rng.random() < noise.epsilon:
            j = int(rng.integers(len(pool)))
            chosen[slot], pool[j] = pool[j], chosen[slot]
    return JudgeSelection(chosen_labels=tuple(chosen))


def noisy_order(request: OrderingJudgeRequest, grades: Mapping[str, int], noise: NoiseSpec) -> JudgeSelection:
    """真值排序后，每个位置以概率 epsilon 与另一个随机位置交换"""
    order = _oracle_labels(request.presented, grades)
    if noise.epsilon <= 0.0 or len(order) < 2:
        return JudgeSelection(chosen_labels=tuple(order))
    rng = make_rng(noise.seed, request_fingerprint(request.query, request.docs, request.n))
    for i in range(len(order)):
        if rng.random() < noise.epsilon:
            j = int(rng.integers(len(order) - 1))
            j += j >= i
            order[i], order[j] = order[j], order[i]
    return JudgeSelection(chosen_labels=tuple(order))


class OracleJudge(Judge):
    """依据 qrels 等级的确定性评审"""

    name = "oracle"

    def __init__(self, grades: Mapping[str, int]):
        self.grades = dict(grades)

    def select(self, request: JudgeRequest) -> JudgeSelection:
        return oracle_select(request, self.grades)

    def order(self, request: OrderingJudgeRequest) -> JudgeSelection:
        return oracle_order(request, self.grades)


class NoisyJudge(Judge):
    name = "noisy"

    def __init__(self, grades: Mapping[str, int], noise: NoiseSpec):
        self.grades = dict(grades)
        self.noise = noise

    def select(self, request: JudgeRequest) -> JudgeSelection:
        return noisy_select(request, self.grades, self.noise)

    def order(self, request: OrderingJudgeRequest) -> JudgeSelection:
        return noisy_order(request, self.grades, self.noise)

    def __repr__(self) -> str:
        return f"NoisyJudge(epsilon={self.noise.epsilon})"


class ThrottledJudge(Judge):
    """用一个共享信号量限制全局同时进行的评审调用数"""

    def __init__(self, inner: Judge, limiter: threading.BoundedSemaphore):
        self.inner = inner
        self.limiter = limiter
        self.name = inner.name

    def select(self, request: JudgeRequest) -> JudgeSelection:
        with self.limiter:
            return self.inner.select(request)

    def order(self, request: OrderingJudgeRequest) -> JudgeSelection:
        with self.limiter:
            return self.inner.order(request)

    def __repr__(self) -> str:
        return f"Throttled({self.inner!r})"


# ---------------------------------------------------------------- prompts

SYSTEM_PROMPT = ("You are an intelligent assistant that can compare multiple documents "
                 "based on their relevancy to the given query.")
ACK_START = "Okay, please provide the documents."


def _conversation(preamble: str, docs: Sequence[Candidate], final: str) -> List[Message]:
    messages = [
        {"role": "system", "content": SYSTEM_PROMPT},
        {"role": "user", "content": preamble},
        {"role": "assistant", "content": ACK_START},
    ]
    for i, doc in enumerate(docs, 1):
        messages.append({"role": "user", "content": f"Document {i}: {doc.text}"})
        messages.append({"role": "assistant", "content": f"Received Document {i}."})
    messages.append({"role": "user", "content": final})
    return messages


def build_prompt(query: str, docs: Sequence[Candidate], n: int, m: int) -> List[Message]:
    """
    组内选择的对话式提示词，文档编号按呈现顺序
    :param query: 查询
    :param docs: 按呈现顺序排列的文档
    :param n: 文档数
    :param m: 需要选出的数量
    :return: (role, content) 消息列表
    """
    if len(docs) != n:
        raise InvalidArgument(f"expected {n} documents, got {len(docs)}")
    preamble = (f"I will provide you with the given query and {n} documents. Consider the content of all "
                f"the documents comprehensively and select the {m} documents that are most relevant to "
                f"the given query: {query}.")
    final = (f"The Query is: {query}. Now, you must output the top {m} documents that are most relevant "
             f"to the Query using the following format strictly, and nothing else. Don't output any "
             f"explanation, just the following format:\nDocument 3, ..., Document 1")
    return _conversation(preamble, docs, final)


def build_ordering_prompt(query: str, docs: Sequence[Candidate]) -> List[Message]:
    """滑动窗口基线的排序提示词：同样的对话骨架，但要求输出全部 n 篇的顺序"""
    n = len(docs)
    preamble = (f"I will provide you with the given query and {n} documents. Consider the content of all "
                f"the documents comprehensively and rank all {n} documents by their relevance to the "
                f"given query: {query}.")
    final = (f"The Query is: {query}. Now, you must output all {n} documents in descending order of "
             f"relevance to the Query using the following format strictly, and nothing else. Don't "
             f"output any explanation, just the following format:\nDocument 3, ..., Document 1")
    return _conversation(preamble, docs, final)


_DOC_TOKEN = re.compile(r"document\s*(\d+)", re.IGNORECASE)


def parse_selection(raw: Optional[str], n: int, m: int,
                    presentation: Optional[Sequence[int]] = None) -> JudgeSelection:
    """
    容错解析：从左到右扫描 "Document <整数>"，保留首次出现、丢弃越界、截断到 m，
    不足 m 个时按呈现顺序补齐
    :param raw: 模型原始输出（可以是任意文本）
    :param n: 标签范围 1..n
    :param m: 需要的标签数
    :param presentation: 补齐时使用的标签顺序，默认 1..n
    :return: JudgeSelection，repair_applied 表示发生了丢弃或补齐
    """
    if not 1 <= m <= n:
        raise InvalidArgument(f"m={m} must satisfy 1 <= m <= n={n}")
    chosen: List[int] = []
    repaired = False
    for match in _DOC_TOKEN.finditer(raw or ""):
        digits = match.group(1)
        label = int(digits) if len(digits) <= 9 else -1
        if label < 1 or label > n or label in chosen:
            repaired = True
            continue
        if len(chosen) == m:
            repaired = True
            continue
        chosen.append(label)
    if len(chosen) < m:
        repaired = True
        for label in presentation if presentation is not None else range(1, n + 1):
            if len(chosen) == m:
                break
            if label not in chosen:
                chosen.append(label)
    return JudgeSelection(chosen_labels=tuple(chosen), repair_applied=repaired, raw_response=raw)


# ---------------------------------------------------------------- live endpoint

@dataclass(frozen=True)
class ChatEndpoint:
    """chat-completions 兼容端点的配置；API key 只从环境变量读取"""
    base_url: Optional[str] = None
    model: str = "gpt-3.5-turbo"
    api_key_env: str = "OPENAI_API_KEY"
    temperature: float = 0.0
    timeout: float = 60.0
    max_retries: int = 3
    backoff_base: float = 1.0
    backoff_cap: float = 30.0
    max_in_flight: int = 8


_TRANSIENT = (openai.APIConnectionError, openai.RateLimitError, openai.InternalServerError)
_AUTH = (openai.AuthenticationError, openai.PermissionDeniedError)


class ChatClient:
    """
    OpenAI SDK 的薄封装：自己做指数退避重试（SDK 内置重试关闭），
    限制同时在途的请求数，区分认证失败与传输失败
    """

    def __init__(self, endpoint: ChatEndpoint, client: Optional[openai.OpenAI] = None,
                 sleep: Callable[[float], None] = time.sleep):
        self.endpoint = endpoint
        self._sleep = sleep
        self._in_flight = threading.BoundedSemaphore(max(1, endpoint.max_in_flight))
        if client is None:
            api_key = os.getenv(endpoint.api_key_env, "").strip()
            if not api_key:
                raise JudgeAuthError(f"missing API key: set the {endpoint.api_key_env} environment variable")
            client = openai.OpenAI(api_key=api_key, base_url=endpoint.base_url or None,
                                   timeout=endpoint.timeout, max_retries=0)
        self.client = client

    def complete(self, messages: List[Message]) -> Tuple[str, int]:
        """
        发送消息，返回 (回复内容, 重试次数)
        """
        retries = 0
        while True:
            try:
                with self._in_flight:
                    response = self.client.chat.completions.create(
                        model=self.endpoint.model,
                        messages=messages,
                        temperature=self.endpoint.temperature,
                    )
                content = response.choices[0].message.content if response.choices else None
                return content or "", retries
            except _AUTH as e:
                raise JudgeAuthError(f"endpoint rejected credentials: {e}") from e
            except _TRANSIENT as e:
                if retries >= self.endpoint.max_retries:
                    raise JudgeUnavailable(f"judge unavailable after {retries} retries: {e}") from e
                delay = min(self.endpoint.backoff_cap, self.endpoint.backoff_base * (2 ** retries))
                retries += 1
                logger.warning("chat request failed (%s), retry %d/%d in %.2fs",
                               type(e).__name__, retries, self.endpoint.max_retries, delay)
                self._sleep(delay)
            except openai.APIError as e:
                raise JudgeUnavailable(f"chat request failed: {e}") from e


class LLMJudge(Judge):
    """对话式 LLM 评审"""

    name = "llm"

    def __init__(self, client: ChatClient):
        self.client = client

    def select(self, request: JudgeRequest) -> JudgeSelection:
        messages = build_prompt(request.query, request.docs, request.n, request.m)
        logger.debug("selection request: n=%d m=%d", request.n, request.m)
        content, retries = self.client.complete(messages)
        selection = parse_selection(content, request.n, request.m)
        if selection.repair_applied:
            logger.debug("repaired malformed selection %r", content[:200])
        return replace(selection, retries=retries)

    def order(self, request: OrderingJudgeRequest) -> JudgeSelection:
        messages = build_ordering_prompt(request.query, request.docs)
        content, retries = self.client.complete(messages)
        return replace(parse_selection(content, request.n, request.n), retries=retries)

    def __repr__(self) -> str:
        return f"LLMJudge(model={self.client.endpoint.model!r})"


def llm_select(request: JudgeRequest, endpoint: ChatEndpoint) -> JudgeSelection:
    """一次性调用：构造客户端、发送提示词、解析回复"""
    return LLMJudge(ChatClient(endpoint)).select(request)
