#!/usr/bin/env python
# -*- coding: utf-8 -*-
"""
成本核算模块
运行时的调用台账（CostLedger）以及五类方法的解析成本模型
"""

import json
import math
from dataclasses import asdict, dataclass
from typing import Any, Dict, Iterable, Optional

from rich.table import Table

from .console import console, get_logger
from .core import InvalidArgument, TournamentSchedule, default_schedule

logger = get_logger(__name__)

PARALLEL = "parallel"
SEQUENTIAL = "sequential"


@dataclass(frozen=True)
class CostLedger:
    """
    invocations: 评审调用次数
    docs_sent: 放进提示词的文档总数
    depth: 关键路径长度（最长的顺序依赖调用链）
    retries: 传输重试次数
    """
    invocations: int = 0
    docs_sent: int = 0
    depth: int = 0
    retries: int = 0

    def __post_init__(self):
        if min(self.invocations, self.docs_sent, self.depth, self.retries) < 0:
            raise InvalidArgument("ledger fields must be >= 0")
        if self.depth > self.invocations:
            raise InvalidArgument("ledger depth cannot exceed invocations")

    @classmethod
    def call(cls, docs: int, retries: int = 0) -> "CostLedger":
        """一次评审调用"""
        return cls(invocations=1, docs_sent=docs, depth=1, retries=retries)

    def to_dict(self) -> Dict[str, int]:
        return asdict(self)


def ledger_merge(a: CostLedger, b: CostLedger, mode: str = PARALLEL) -> CostLedger:
    """
    合并两个台账：计数相加；并行取 depth 最大值，串行 depth 相加
    """
    if mode == PARALLEL:
        depth = max(a.depth, b.depth)
    elif mode == SEQUENTIAL:
        depth = a.depth + b.depth
    else:
        raise InvalidArgument(f"unknown merge mode {mode!r}")
    return CostLedger(invocations=a.invocations + b.invocations, docs_sent=a.docs_sent + b.docs_sent,
                      depth=depth, retries=a.retries + b.retries)


def merge_all(ledgers: Iterable[CostLedger], mode: str = PARALLEL) -> CostLedger:
    total = CostLedger()
    for ledger in ledgers:
        total = ledger_merge(total, ledger, mode)
    return total


METHODS = ("pointwise", "prp_allpair", "setwise_bubblesort", "sliding_window", "tourrank")


@dataclass(frozen=True)
class CostEstimate:
    """
    docs_sent / depth 为精确计数；closed_form_* 为连续形式的闭式公式，
    approx_* 为常用的粗略近似（例如 2N）
    """
    method: str
    n: int
    docs_sent: int
    depth: int
    closed_form_docs: Optional[float] = None
    closed_form_depth: Optional[float] = None
    approx_docs: Optional[float] = None
    approx_depth: Optional[float] = None

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def window_count(n: int, window: int, step: int) -> int:
    """ceil((N - ω) / s) + 1"""
    return math.ceil((n - window) / step) + 1


def analytic_cost(method: str, n: int, **params: Any) -> CostEstimate:
    """
    解析成本模型
    :param method: pointwise / prp_allpair / setwise_bubblesort / sliding_window / tourrank
    :param n: 候选文档数 N
    :param params: setwise 需要 k, c；sliding_window 需要 window, step；tourrank 需要 schedule 和/或 rounds，
                   可选 round_width（同时进行的轮次数，缺省为全部并行）
    :return: CostEstimate
    """
    if n < 1:
        raise InvalidArgument(f"N must be >= 1, got {n}")
    if method == "pointwise":
        return CostEstimate(method, n, docs_sent=n, depth=1, closed_form_docs=n, closed_form_depth=1,
                            approx_docs=n, approx_depth=1)
    if method == "prp_allpair":
        docs = n * n - n
        return CostEstimate(method, n, docs_sent=docs, depth=1, closed_form_docs=docs, closed_form_depth=1,
                            approx_docs=docs, approx_depth=1)
    if method == "setwise_bubblesort":
        k, c = _need(params, method, "k", "c")
        if c < 2 or not 1 <= k <= n:
            raise InvalidArgument("setwise needs c >= 2 and 1 <= k <= N")
        passes = k * math.ceil(n / (c - 1))
        return CostEstimate(method, n, docs_sent=passes * c, depth=passes,
                            closed_form_docs=k * n / (c - 1) * c, closed_form_depth=k * n / (c - 1),
                            approx_docs=1.5 * k * n, approx_depth=0.5 * k * n)
    if method == "sliding_window":
        window, step = _need(params, method, "window", "step")
        if not 1 <= step <= window <= n:
            raise InvalidArgument(f"need 1 <= step <= window <= N, got step={step} window={window} N={n}")
        windows = window_count(n, window, step)
        return CostEstimate(method, n, docs_sent=window * windows, depth=windows,
                            closed_form_docs=window * (n - window) / step,
                            closed_form_depth=(n - window) / step,
                            approx_docs=2 * n, approx_depth=n / 10)
    if method == "tourrank":
        schedule = params.get("schedule")
        if schedule is None:
            schedule = default_schedule()
        if not isinstance(schedule, TournamentSchedule):
            raise InvalidArgument("tourrank needs a TournamentSchedule")
        rounds = params.get("rounds")
        rounds = schedule.rounds if rounds is None else int(rounds)
        if rounds < 1:
            raise InvalidArgument(f"rounds must be >= 1, got {rounds}")
        width = params.get("round_width")
        width = rounds if width is None else min(rounds, int(width))
        if width < 1:
            raise InvalidArgument(f"round_width must be >= 1, got {width}")
        if schedule.head != n:
            raise InvalidArgument(f"schedule expects N={schedule.head}, got N={n}")
        stages = schedule.selection_stages
        waves = math.ceil(rounds / width)
        halving = sum(n / 2 ** k for k in range(stages))
        return CostEstimate(method, n, docs_sent=rounds * schedule.docs_per_tournament(), depth=waves * stages,
                            closed_form_docs=halving * rounds, closed_form_depth=waves * stages,
                            approx_docs=2 * rounds * n, approx_depth=stages)
    raise InvalidArgument(f"unknown method {method!r}; expected one of {', '.join(METHODS)}")


def _need(params: Dict[str, Any], method: str, *names: str):
    missing = [name for name in names if params.get(name) is None]
    if missing:
        raise InvalidArgument(f"{method} requires parameters: {', '.join(missing)}")
    return tuple(int(params[name]) for name in names)


@dataclass(frozen=True)
class AuditReport:
    docs_delta: int
    depth_delta: int

    @property
    def ok(self) -> bool:
        return self.docs_delta == 0 and self.depth_delta == 0


def ledger_audit(measured: CostLedger, predicted: CostEstimate) -> AuditReport:
    """实测台账与解析模型的差值（实测减预测）"""
    return AuditReport(docs_delta=measured.docs_sent - predicted.docs_sent,
                       depth_delta=measured.depth - predicted.depth)


def format_number(value: Optional[float]) -> str:
    if value is None:
        return "-"
    if float(value).is_integer():
        return f"{int(value):,}"
    return f"{value:,.2f}"


def render_cost_table(estimates: Iterable[CostEstimate], title: str = "解析成本") -> Table:
    table = Table(title=title, show_header=True)
    table.add_column("方法", style="cyan")
    table.add_column("N", justify="right")
    table.add_column("文档数(精确)", style="green", justify="right")
    table.add_column("闭式公式", justify="right")
    table.add_column("近似", style="dim", justify="right")
    table.add_column("深度(精确)", style="green", justify="right")
    table.add_column("深度闭式", justify="right")
    for est in estimates:
        table.add_row(est.method, str(est.n), format_number(est.docs_sent), format_number(est.closed_form_docs),
                      format_number(est.approx_docs), format_number(est.depth),
                      format_number(est.closed_form_depth))
    return table


def cmd_cost(method: str, n: int, params: Dict[str, Any], as_json: bool = False) -> bool:
    """
    打印解析成本表
    :param method: 方法名，"all" 表示全部五种（参数与 N 不匹配的方法跳过并提示）
    :param n: 候选文档数
    :param params: 方法参数
    :param as_json: 以 JSON 输出
    :return: 操作是否成功
    """
    if method != "all":
        estimates = [analytic_cost(method, n, **params)]
    else:
        estimates = []
        for name in METHODS:
            try:
                estimates.append(analytic_cost(name, n, **params))
            except InvalidArgument as e:
                logger.warning("skipping %s for N=%d: %s", name, n, e)
                if not as_json:
                    console.print(f"[yellow]跳过 {name}: {e}[/]")
    if as_json:
        console.print_json(json.dumps([e.to_dict() for e in estimates]))
    else:
        console.print(render_cost_table(estimates))
    return True
