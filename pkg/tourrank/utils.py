#!/usr/bin/env python
# -*- coding: utf-8 -*-
"""
通用工具函数模块
配置加载与合并、赛程文件、复现命令行、稳定哈希
"""

import hashlib
import json
import os
import shlex
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Sequence

import numpy as np
from dotenv import load_dotenv
from rich.table import Table

try:
    import pyperclip  # 用于复制内容到剪贴板
except ImportError:
    pyperclip = None

from .console import console, get_logger
from .core import InvalidArgument, TournamentSchedule, default_schedule
from .evaluation import PERTURBATIONS
from .judge import ChatEndpoint

logger = get_logger(__name__)

ENV_PREFIX = "TOURRANK_"
JUDGE_KINDS = ("oracle", "noisy", "llm")


@dataclass(frozen=True)
class RunConfig:
    """一次运行的有效配置；API key 本身永远不在这里，只记录环境变量名"""
    judge: str = "oracle"
    epsilon: float = 0.2
    endpoint: Optional[str] = None
    model: str = "gpt-3.5-turbo"
    api_key_env: str = "OPENAI_API_KEY"
    temperature: float = 0.0
    timeout: float = 60.0
    max_retries: int = 3
    backoff_base: float = 1.0
    max_in_flight: int = 8
    schedule: str = "default"
    rounds: int = 10
    parallelism: int = 8
    seed: Optional[int] = None
    lenient: bool = False
    serial_rounds: bool = False
    redeal_groups: bool = False
    perturb: str = "keep"
    window: int = 20
    step: int = 10
    iterations: int = 10

    def __post_init__(self):
        if self.judge not in JUDGE_KINDS:
            raise InvalidArgument(f"judge must be one of {', '.join(JUDGE_KINDS)}, got {self.judge!r}")
        if self.rounds < 1:
            raise InvalidArgument(f"rounds must be >= 1, got {self.rounds}")
        if self.parallelism < 1:
            raise InvalidArgument(f"parallelism must be >= 1, got {self.parallelism}")
        if not 0.0 <= self.epsilon <= 1.0:
            raise InvalidArgument(f"epsilon must be within [0, 1], got {self.epsilon}")
        if self.perturb not in PERTURBATIONS:
            raise InvalidArgument(f"perturb must be one of {', '.join(PERTURBATIONS)}, got {self.perturb!r}")

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    def endpoint_config(self) -> ChatEndpoint:
        return ChatEndpoint(base_url=self.endpoint, model=self.model, api_key_env=self.api_key_env,
                            temperature=self.temperature, timeout=self.timeout, max_retries=self.max_retries,
                            backoff_base=self.backoff_base, max_in_flight=self.max_in_flight)


_TYPES = {f.name: f.type for f in fields(RunConfig)}


def get_config_dir() -> Path:
    """获取配置文件目录"""
    return Path(__file__).resolve().parent


def get_config_path() -> Path:
    """获取默认配置文件路径"""
    return get_config_dir() / "tourrank_config.json"


def _read_json(path: Path) -> Dict[str, Any]:
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise InvalidArgument(f"cannot read config file {path}: {e}") from e
    if not isinstance(data, dict):
        raise InvalidArgument(f"config file {path} must hold a JSON object")
    unknown = set(data) - set(_TYPES)
    if unknown:
        raise InvalidArgument(f"unknown config keys in {path}: {', '.join(sorted(unknown))}")
    return data


def load_config(path: Optional[Path] = None) -> Dict[str, Any]:
    """
    加载配置文件
    :param path: 用户配置文件，None 时只读包内默认配置
    :return: 配置字典（用户配置覆盖默认）
    """
    config = _read_json(get_config_path())
    if path is not None:
        config.update(_read_json(Path(path)))
    return config


def _coerce(name: str, raw: str) -> Any:
    kind = str(_TYPES[name])
    if "bool" in kind:
        return raw.strip().lower() in ("1", "true", "yes", "on")
    if "int" in kind:
        return int(raw)
    if "float" in kind:
        return float(raw)
    return raw


def env_overrides(environ: Optional[Mapping[str, str]] = None) -> Dict[str, Any]:
    """读取 TOURRANK_* 环境变量，例如 TOURRANK_ROUNDS=5"""
    environ = os.environ if environ is None else environ
    found = {}
    for name in _TYPES:
        raw = environ.get(ENV_PREFIX + name.upper())
        if raw is None or raw == "":
            continue
        try:
            found[name] = _coerce(name, raw)
        except ValueError:
            raise InvalidArgument(f"bad value for {ENV_PREFIX}{name.upper()}: {raw!r}") from None
    return found


def draw_seed() -> int:
    return int(np.random.SeedSequence().entropy) & ((1 << 63) - 1)


def resolve_config(flags: Mapping[str, Any], config_path: Optional[Path] = None,
                   environ: Optional[Mapping[str, str]] = None) -> RunConfig:
    """
    合并配置，优先级：命令行 > 配置文件 > 环境变量 > 默认值；未给种子时随机抽取
    :param flags: 命令行参数（值为 None 的视为未指定）
    :param config_path: 用户配置文件
    :param environ: 环境变量，None 时读取 os.environ（先加载 .env）
    :return: RunConfig
    """
    if environ is None:
        load_dotenv()
    merged = _read_json(get_config_path())
    merged.update(env_overrides(environ))
    if config_path is not None:
        merged.update(_read_json(Path(config_path)))
    merged.update({k: v for k, v in flags.items() if k in _TYPES and v is not None})
    if merged.get("seed") is None:
        merged["seed"] = draw_seed()
        logger.info("no seed given, drew %d", merged["seed"])
    return RunConfig(**merged)


def load_schedule(spec: str, rounds: int) -> TournamentSchedule:
    """
    :param spec: "default" 或 JSON 文件路径
    :param rounds: 轮数 R（覆盖文件中的值）
    """
    if spec == "default":
        return default_schedule(rounds)
    path = Path(spec)
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise InvalidArgument(f"cannot read schedule file {path}: {e}") from e
    return TournamentSchedule.from_dict(data).with_rounds(rounds)


def stable_hash(text: str) -> int:
    """与 PYTHONHASHSEED 无关的 63 位哈希"""
    return int.from_bytes(hashlib.sha256(text.encode("utf-8")).digest()[:8], "big") >> 1


_FLAG_NAMES = {
    "judge": "--judge", "epsilon": "--epsilon", "endpoint": "--endpoint", "model": "--model",
    "schedule": "--schedule", "rounds": "--rounds", "parallelism": "--parallelism", "seed": "--seed",
    "perturb": "--perturb", "window": "--window", "step": "--step", "iterations": "--iterations",
}


def replay_line(command: str, config: RunConfig, extra: Sequence[str] = ()) -> str:
    """能复现本次运行的一行命令"""
    parts = ["tourrank", command, *extra]
    for name, flag in _FLAG_NAMES.items():
        value = getattr(config, name)
        if value is not None:
            parts += [flag, str(value)]
    parts.append("--lenient" if config.lenient else "--strict")
    if config.serial_rounds:
        parts.append("--serial-rounds")
    if config.redeal_groups:
        parts.append("--redeal-groups")
    return " ".join(shlex.quote(p) for p in parts)


def echo_config(command: str, config: RunConfig, extra: Sequence[str] = ()) -> str:
    """打印有效配置和复现命令，返回复现命令"""
    table = Table(title="有效配置", show_header=False, box=None, pad_edge=False)
    table.add_column("键", style="bold cyan")
    table.add_column("值")
    for key, value in config.to_dict().items():
        table.add_row(key, str(value))
    console.print(table)
    line = replay_line(command, config, extra)
    console.print(f"[bold]复现:[/] {line}", soft_wrap=True)
    return line


def copy_to_clipboard(text: str) -> bool:
    """
    复制文本到剪贴板
    :param text: 要复制的文本
    :return: 是否成功复制
    """
    if pyperclip is None:
        logger.warning("pyperclip is not installed, cannot copy to clipboard")
        return False
    try:
        pyperclip.copy(text)
        return True
    except Exception as e:  # pyperclip raises its own exception types per platform
        logger.warning("copy to clipboard failed: %s", e)
        return False
