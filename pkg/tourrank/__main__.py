#!/usr/bin/env python
# -*- coding: utf-8 -*-
"""
TourRank 重排序工具 - 主入口
集成 rank、compare、cost、eval、synth 五个子命令
"""

import argparse
import sys
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence

from rich.markdown import Markdown
from rich.panel import Panel

from .console import console, init_console
from .core import JudgeAuthError, TourRankError

EXIT_AUTH = 2


def print_version():
    """打印版本信息"""
    from tourrank import __version__
    console.print(f"TourRank v{__version__}", style="bold green")


def print_help():
    """打印帮助信息"""
    help_text = """
# TourRank 使用帮助

## 子命令

- `rank`: 对查询集合运行 TourRank，写出 TREC run 文件和 `<output>.cost.json`
- `compare`: 方法 × 初始顺序扰动的对比实验（`--serial` 输出串行迭代轨迹）
- `cost`: 打印各方法的解析成本
- `eval`: 按 qrels 计算 run 文件的 NDCG@k
- `synth`: 生成合成语料、查询、qrels 和候选 run

## 评审

- `--judge oracle`: 按 qrels 等级选择（需要 `--qrels`）
- `--judge noisy --epsilon 0.2`: 带噪的 oracle
- `--judge llm --endpoint URL --model NAME`: OpenAI 兼容接口，
  API key 只从环境变量读取（默认 `OPENAI_API_KEY`）

## 配置优先级

命令行 > `--config` 文件 > `TOURRANK_*` 环境变量（支持 `.env`）> 默认值。
每次运行都会打印有效配置和一行复现命令。

## 示例

```
tourrank synth --out data --queries 50
tourrank rank --corpus data/corpus.jsonl --queries data/queries.tsv \\
    --candidates data/candidates.run --qrels data/qrels.txt --output tr.run --seed 1
tourrank compare ... --methods tourrank-10,sliding-window --judge noisy
tourrank cost --method all --n 100
```
"""
    md = Markdown(help_text)
    console.print(Panel(md, title="TourRank 帮助", border_style="green"))


def _csv(text: str) -> List[str]:
    return [part.strip() for part in text.split(",") if part.strip()]


def _ks(text: str) -> List[int]:
    try:
        return [int(k) for k in _csv(text)]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad cutoff list {text!r}") from None


def _add_run_options(parser: argparse.ArgumentParser):
    """rank / compare 共用的运行参数；默认值为 None，交给配置合并处理"""
    parser.add_argument("--corpus", type=Path, required=True, help="JSONL 语料（doc_id, text）")
    parser.add_argument("--queries", type=Path, required=True, help="TSV 查询文件")
    parser.add_argument("--candidates", type=Path, required=True, help="一阶段候选 run 文件")
    parser.add_argument("--config", type=Path, help="JSON 配置文件")
    parser.add_argument("--judge", choices=("oracle", "noisy", "llm"), help="评审类型")
    parser.add_argument("--epsilon", type=float, help="带噪评审的扰动概率")
    parser.add_argument("--endpoint", help="OpenAI 兼容接口的 base URL")
    parser.add_argument("--model", help="模型名")
    parser.add_argument("--schedule", help="default 或赛程 JSON 文件")
    parser.add_argument("--rounds", type=int, help="锦标赛轮数 R")
    parser.add_argument("--seed", type=int, help="运行种子，缺省时随机抽取并打印")
    parser.add_argument("--parallelism", type=int, help="同时在途的评审调用上限")
    parser.add_argument("--perturb", choices=("keep", "shuffle", "reverse"), help="初始顺序扰动")
    parser.add_argument("--window", type=int, help="滑动窗口大小")
    parser.add_argument("--step", type=int, help="滑动窗口步长")
    parser.add_argument("--iterations", type=int, help="串行迭代次数")
    strict = parser.add_mutually_exclusive_group()
    strict.add_argument("--lenient", dest="lenient", action="store_true", default=None,
                        help="丢弃评审失败的轮次，只用剩余轮次的积分")
    strict.add_argument("--strict", dest="lenient", action="store_false", help="任何轮次失败即中止（默认）")
    parser.add_argument("--serial-rounds", action="store_true", default=None, help="各轮依次运行")
    parser.add_argument("--redeal-groups", action="store_true", default=None, help="每轮重新随机分组")
    parser.add_argument("--copy-replay", action="store_true", help="把复现命令复制到剪贴板")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tourrank", description="TourRank 锦标赛式文档重排序", add_help=False)
    parser.add_argument("--version", "-V", action="store_true", help="显示版本信息")
    parser.add_argument("--help", "-h", action="store_true", help="显示帮助信息")
    parser.add_argument("--verbose", "-v", action="store_true", help="输出调试日志")
    parser.add_argument("--quiet", "-q", action="store_true", help="只输出警告和错误")

    subparsers = parser.add_subparsers(dest="command", help="子命令")

    # rank 命令
    rank_parser = subparsers.add_parser("rank", help="运行 TourRank 并写出 run 文件")
    _add_run_options(rank_parser)
    rank_parser.add_argument("--output", "-o", type=Path, required=True, help="输出 run 文件")
    rank_parser.add_argument("--qrels", type=Path, help="qrels 文件（oracle / noisy 评审必需）")
    rank_parser.add_argument("--cost", type=Path, help="成本报告路径，默认 <output>.cost.json")
    rank_parser.add_argument("--tag", default="tourrank", help="run 文件标签")

    # compare 命令
    compare_parser = subparsers.add_parser("compare", help="方法 × 初始顺序扰动的对比实验")
    _add_run_options(compare_parser)
    compare_parser.add_argument("--qrels", type=Path, required=True, help="qrels 文件")
    compare_parser.add_argument("--methods", default="tourrank-10,sliding-window",
                                help="逗号分隔：tourrank-<r>, sliding-window, pointwise")
    compare_parser.add_argument("--perturbations", default="keep,shuffle,reverse", help="逗号分隔的扰动模式")
    compare_parser.add_argument("--k", type=_ks, default=[10], help="NDCG 截断，逗号分隔")
    compare_parser.add_argument("--serial", action="store_true", help="输出串行迭代轨迹")
    compare_parser.add_argument("--granularity", action="store_true", help="输出累计积分粒度表")
    compare_parser.add_argument("--json", type=Path, dest="json_path", help="把结果写成 JSON")

    # cost 命令
    cost_parser = subparsers.add_parser("cost", help="打印解析成本")
    cost_parser.add_argument("--method", default="all", help="方法名或 all")
    cost_parser.add_argument("--n", type=int, default=100, help="候选文档数 N")
    cost_parser.add_argument("--rounds", type=int, default=10, help="TourRank 轮数")
    cost_parser.add_argument("--schedule", default="default", help="default 或赛程 JSON 文件")
    cost_parser.add_argument("--window", type=int, default=20, help="滑动窗口大小")
    cost_parser.add_argument("--step", type=int, default=10, help="滑动窗口步长")
    cost_parser.add_argument("--top-k", type=int, default=10, dest="k", help="setwise 需要的 top-k")
    cost_parser.add_argument("--set-size", type=int, default=3, dest="c", help="setwise 每次比较的文档数")
    cost_parser.add_argument("--json", action="store_true", dest="as_json", help="以 JSON 输出")

    # eval 命令
    eval_parser = subparsers.add_parser("eval", help="计算 run 文件的 NDCG@k")
    eval_parser.add_argument("run", type=Path, help="TREC run 文件")
    eval_parser.add_argument("qrels", type=Path, help="TREC qrels 文件")
    eval_parser.add_argument("--k", type=_ks, default=[5, 10, 20], help="截断位置，逗号分隔")
    eval_parser.add_argument("--per-query", action="store_true", help="显示逐查询结果")
    eval_parser.add_argument("--json", action="store_true", dest="as_json", help="以 JSON 输出")

    # synth 命令
    synth_parser = subparsers.add_parser("synth", help="生成合成数据集")
    synth_parser.add_argument("--out", type=Path, required=True, help="输出目录")
    synth_parser.add_argument("--queries", type=int, default=50, dest="num_queries", help="查询数")
    synth_parser.add_argument("--pool-size", type=int, default=100, help="每个查询的候选数")
    synth_parser.add_argument("--distribution", default="0.5,0.25,0.15,0.1", help="等级 0..3 的概率")
    synth_parser.add_argument("--seed", type=int, default=7, help="随机种子")
    synth_parser.add_argument("--initial", choices=("noisy", "ideal", "random"), default="noisy",
                              help="一阶段候选的初始顺序")
    return parser


_CONFIG_KEYS = ("judge", "epsilon", "endpoint", "model", "schedule", "rounds", "seed", "parallelism", "perturb",
                "window", "step", "iterations", "lenient", "serial_rounds", "redeal_groups")


def _flags(args: argparse.Namespace) -> Dict[str, Any]:
    return {key: getattr(args, key, None) for key in _CONFIG_KEYS}


def dispatch(args: argparse.Namespace) -> bool:
    """执行子命令，返回操作是否成功"""
    if args.command in ("rank", "compare"):
        from tourrank.utils import resolve_config
        config = resolve_config(_flags(args), args.config)
        if args.command == "rank":
            from tourrank.rank import cmd_rank
            return cmd_rank(config, args.corpus, args.queries, args.candidates, args.output, args.qrels,
                            args.cost, args.tag, args.copy_replay)
        from tourrank.compare import cmd_compare
        return cmd_compare(config, args.corpus, args.queries, args.candidates, args.qrels, _csv(args.methods),
                           _csv(args.perturbations), args.k, args.serial, args.granularity, args.json_path,
                           args.copy_replay)
    if args.command == "cost":
        from tourrank.cost import cmd_cost
        from tourrank.utils import load_schedule
        params = {"k": args.k, "c": args.c, "window": args.window, "step": args.step, "rounds": args.rounds}
        if args.method in ("tourrank", "all"):
            params["schedule"] = load_schedule(args.schedule, args.rounds)
        return cmd_cost(args.method, args.n, params, args.as_json)
    if args.command == "eval":
        from tourrank.evaluation import cmd_eval
        return cmd_eval(args.run, args.qrels, args.k, args.per_query, args.as_json)
    if args.command == "synth":
        from tourrank.synth import cmd_synth, parse_distribution
        return cmd_synth(args.num_queries, args.pool_size, parse_distribution(args.distribution), args.seed,
                         args.out, args.initial)
    console.print("[bold red]错误:[/] 未知命令")
    print_help()
    return False


def main(argv: Optional[Sequence[str]] = None) -> int:
    """主函数，返回进程退出码"""
    parser = build_parser()
    args = parser.parse_args(argv)

    if args.version:
        print_version()
        return 0
    if args.help or not args.command:
        print_help()
        return 0

    init_console(verbose=args.verbose, quiet=args.quiet)
    try:
        return 0 if dispatch(args) else 1
    except JudgeAuthError as e:
        console.print(f"[bold red]认证错误:[/] {e}")
        return EXIT_AUTH
    except TourRankError as e:
        console.print(f"[bold red]错误:[/] {e}")
        return 1
    except OSError as e:
        console.print(f"[bold red]文件错误:[/] {e}")
        return 1


def run(main_fn: Callable[[], int] = main):
    try:
        sys.exit(main_fn())
    except KeyboardInterrupt:
        console.print("\n[yellow]操作已取消[/]")
        sys.exit(1)


if __name__ == "__main__":
    run()
