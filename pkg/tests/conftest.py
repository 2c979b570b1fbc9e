#!/usr/bin/env python
# -*- coding: utf-8 -*-
"""
测试共用夹具
合成候选池，以及一个按脚本回复的 chat-completions 桩服务器
"""

import json
import re
import threading
import time
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import pytest

from tourrank.core import Candidate
from tourrank.judge import ChatClient, ChatEndpoint
from tourrank.synth import generate_synthetic

# 脚本步骤：int 为 HTTP 错误码，"timeout" 为超时不回复，其余字符串为回复内容
Step = Union[int, str]

_TOP_M = re.compile(r"output the top (\d+) documents")
_ALL_N = re.compile(r"output all (\d+) documents")


def make_pool(n: int = 100, grades: Optional[Sequence[int]] = None) -> Tuple[List[Candidate], Dict[str, int]]:
    """n 篇候选，默认等级互不相同且与初始顺序一致（第 1 名等级最高）"""
    grades = list(grades) if grades is not None else list(range(n - 1, -1, -1))
    candidates = [Candidate(f"d{i}", f"text of d{i}", i) for i in range(1, n + 1)]
    return candidates, {c.doc_id: g for c, g in zip(candidates, grades)}


@pytest.fixture
def pool_factory():
    return make_pool


@pytest.fixture
def ideal_pool():
    return make_pool(100)


@pytest.fixture(scope="session")
def small_dataset():
    return generate_synthetic(num_queries=4, pool_size=100, seed=11)


def default_reply(messages: List[Dict[str, str]]) -> str:
    """格式正确的回复：倒序列出所需数量的标签"""
    final = messages[-1]["content"]
    match = _TOP_M.search(final) or _ALL_N.search(final)
    count = int(match.group(1)) if match else 1
    return ", ".join(f"Document {i}" for i in range(count, 0, -1))


class StubChatServer:
    """
    本地 chat-completions 桩服务器
    先按顺序消费 script，用完后调用 responder 生成回复
    """

    def __init__(self, responder: Callable[[List[Dict[str, str]]], str] = default_reply,
                 timeout_delay: float = 1.0):
        self.script: List[Step] = []
        self.responder = responder
        self.timeout_delay = timeout_delay
        self.requests: List[Dict] = []
        self._lock = threading.Lock()
        self._server = ThreadingHTTPServer(("127.0.0.1", 0), self._handler())
        self._server.daemon_threads = True
        self._server.block_on_close = False
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)

    @property
    def base_url(self) -> str:
        host, port = self._server.server_address[:2]
        return f"http://{host}:{port}/v1"

    def next_step(self, body: Dict) -> Step:
        with self._lock:
            self.requests.append(body)
            if self.script:
                return self.script.pop(0)
        return self.responder(body.get("messages", []))

    def _handler(self):
        stub = self

        class Handler(BaseHTTPRequestHandler):
            def log_message(self, format, *args):
                pass

            def _send(self, status: int, payload: Dict):
                data = json.dumps(payload).encode("utf-8")
                try:
                    self.send_response(status)
                    self.send_header("Content-Type", "application/json")
                    self.send_header("Content-Length", str(len(data)))
                    self.end_headers()
                    self.wfile.write(data)
                except (BrokenPipeError, ConnectionResetError):
                    pass

            def do_POST(self):
                length = int(self.headers.get("Content-Length", 0))
                body = json.loads(self.rfile.read(length) or b"{}")
                step = stub.next_step(body)
                if step == "timeout":
                    time.sleep(stub.timeout_delay)
                    return self._send(200, _completion(body, "Document 1"))
                if isinstance(step, int):
                    return self._send(step, {"error": {"message": f"scripted {step}", "type": "stub_error",
                                                       "code": str(step)}})
                return self._send(200, _completion(body, step))

        return Handler

    def start(self) -> "StubChatServer":
        self._thread.start()
        return self

    def stop(self):
        self._server.shutdown()
        self._server.server_close()


def _completion(body: Dict, content: str) -> Dict:
    return {
        "id": "chatcmpl-stub",
        "object": "chat.completion",
        "created": int(time.time()),
        "model": body.get("model", "stub"),
        "choices": [{"index": 0, "message": {"role": "assistant", "content": content},
                     "finish_reason": "stop", "logprobs": None}],
        "usage": {"prompt_tokens": 1, "completion_tokens": 1, "total_tokens": 2},
    }


@pytest.fixture
def stub_server():
    server = StubChatServer().start()
    yield server
    server.stop()


@pytest.fixture
def stub_client(stub_server, monkeypatch):
    """指向桩服务器的 ChatClient，退避等待只记录不真正睡眠"""
    monkeypatch.setenv("STUB_API_KEY", "test-key")
    sleeps: List[float] = []
    endpoint = ChatEndpoint(base_url=stub_server.base_url, model="stub-model", api_key_env="STUB_API_KEY",
                            timeout=0.3, max_retries=3, backoff_base=0.5)
    client = ChatClient(endpoint, sleep=sleeps.append)
    client.sleeps = sleeps
    return client
