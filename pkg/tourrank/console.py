#!/usr/bin/env python
# -*- coding: utf-8 -*-
"""
控制台单例模块
提供全局共享的Rich控制台实例和日志配置
"""

import logging

from rich.console import Console
from rich.logging import RichHandler

# 创建全局单例的Rich控制台对象
console = Console()

_ROOT = "tourrank"


def init_console(verbose: bool = False, quiet: bool = False) -> logging.Logger:
    """
    初始化日志：tourrank 日志统一经 RichHandler 输出到共享控制台
    :param verbose: DEBUG 级别
    :param quiet: 只显示 WARNING 及以上
    :return: 根 logger
    """
    logger = logging.getLogger(_ROOT)
    level = logging.DEBUG if verbose else logging.WARNING if quiet else logging.INFO
    logger.setLevel(level)
    if not any(isinstance(h, RichHandler) for h in logger.handlers):
        handler = RichHandler(console=console, show_path=False, rich_tracebacks=True)
        handler.setFormatter(logging.Formatter("%(message)s"))
        logger.addHandler(handler)
        logger.propagate = False
    return logger


def get_logger(name: str) -> logging.Logger:
    """库模块用 get_logger(__name__)，只记录日志不打印"""
    if name != _ROOT and not name.startswith(_ROOT + "."):
        name = f"{_ROOT}.{name}"
    return logging.getLogger(name)
