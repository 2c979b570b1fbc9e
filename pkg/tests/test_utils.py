#!/usr/bin/env python
# -*- coding: utf-8 -*-
"""配置合并、赛程文件与复现命令的测试"""

import json

import pytest

from tourrank import utils
from tourrank.core import InvalidArgument, default_schedule
from tourrank.utils import (
    RunConfig, env_overrides, load_config, load_schedule, replay_line, resolve_config, stable_hash,
)


def test_packaged_defaults():
    config = load_config()
    assert config["rounds"] == 10
    assert config["judge"] == "oracle"
    assert "api_key" not in config


def test_precedence(tmp_path):
    file = tmp_path / "cfg.json"
    file.write_text(json.dumps({"rounds": 4}), encoding="utf-8")
    environ = {"TOURRANK_ROUNDS": "3", "TOURRANK_LENIENT": "true", "TOURRANK_SEED": "11"}
    assert resolve_config({"rounds": None}, environ=environ).rounds == 3
    assert resolve_config({"rounds": None}, file, environ=environ).rounds == 4
    config = resolve_config({"rounds": 5}, file, environ=environ)
    assert config.rounds == 5
    assert config.lenient is True
    assert config.seed == 11


def test_seed_drawn_when_missing():
    config = resolve_config({}, environ={})
    assert isinstance(config.seed, int)
    assert config.seed >= 0


def test_unknown_config_key(tmp_path):
    file = tmp_path / "cfg.json"
    file.write_text(json.dumps({"api_key": "secret"}), encoding="utf-8")
    with pytest.raises(InvalidArgument, match="api_key"):
        resolve_config({}, file, environ={})


def test_bad_env_value():
    with pytest.raises(InvalidArgument, match="TOURRANK_ROUNDS"):
        env_overrides({"TOURRANK_ROUNDS": "many"})


@pytest.mark.parametrize("field, value", [("judge", "gpt"), ("rounds", 0), ("epsilon", 1.5),
                                          ("parallelism", 0), ("perturb", "sideways")])
def test_run_config_validation(field, value):
    with pytest.raises(InvalidArgument):
        RunConfig(**{field: value})


def test_endpoint_config_carries_key_name_only():
    endpoint = RunConfig(judge="llm", model="m1", api_key_env="MY_KEY", endpoint="http://x/v1").endpoint_config()
    assert (endpoint.model, endpoint.api_key_env, endpoint.base_url) == ("m1", "MY_KEY", "http://x/v1")


def test_load_schedule_file(tmp_path):
    path = tmp_path / "schedule.json"
    path.write_text(json.dumps(default_schedule(7).to_dict()), encoding="utf-8")
    schedule = load_schedule(str(path), 3)
    assert schedule.rounds == 3
    assert schedule.stages == default_schedule().stages
    assert load_schedule("default", 2) == default_schedule(2)
    with pytest.raises(InvalidArgument):
        load_schedule(str(tmp_path / "missing.json"), 1)


def test_replay_line():
    line = replay_line("rank", RunConfig(seed=5, lenient=True, serial_rounds=True), ["--output", "out run"])
    assert line.startswith("tourrank rank --output 'out run'")
    assert "--seed 5" in line
    assert "--lenient" in line
    assert "--serial-rounds" in line
    assert "--redeal-groups" not in line
    assert "--strict" in replay_line("rank", RunConfig(seed=1))


def test_stable_hash():
    assert stable_hash("q1") == stable_hash("q1")
    assert stable_hash("q1") != stable_hash("q2")
    assert 0 <= stable_hash("anything") < 2 ** 63


def test_copy_to_clipboard(monkeypatch):
    copied = []

    class Clipboard:
        @staticmethod
        def copy(text):
            copied.append(text)

    class Broken:
        @staticmethod
        def copy(text):
            raise RuntimeError("no display")

    monkeypatch.setattr(utils, "pyperclip", Clipboard)
    assert utils.copy_to_clipboard("hello")
    assert copied == ["hello"]
    monkeypatch.setattr(utils, "pyperclip", Broken)
    assert not utils.copy_to_clipboard("hello")
    monkeypatch.setattr(utils, "pyperclip", None)
    assert not utils.copy_to_clipboard("hello")
