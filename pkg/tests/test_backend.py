import json
import threading

import httpx
import pytest

from rephrase_agents.backend import (
    ChatMessage,
    CompletionRequest,
    LiveBackend,
    RetryPolicy,
    ScriptedBackend,
    load_script,
    scripted_backend,
)
from rephrase_agents.errors import AuthFailure, BackendFailure, MalformedResponse, ScriptExhausted


def req(tag="broker/p1"):
    return CompletionRequest((ChatMessage("system", "sys"), ChatMessage("user", "hi")), tag=tag)


def ok_body(text="fine"):
    return {"choices": [{"message": {"role": "assistant", "content": text}}],
            "usage": {"prompt_tokens": 11, "completion_tokens": 7}}


class Server:
    """Serves a fixed sequence of (status, body) responses and records requests."""

    def __init__(self, responses):
        self.responses = list(responses)
        self.requests = []

    def __call__(self, request):
        self.requests.append(request)
        status, body = self.responses.pop(0)
        if isinstance(body, Exception):
            raise body
        if isinstance(body, str):
            return httpx.Response(status, text=body)
        return httpx.Response(status, json=body)


def live(server, sleeps, **kw):
    return LiveBackend("test-model", base_url="http://llm.local", api_key="k3y",
                       transport=httpx.MockTransport(server), sleep=sleeps.append, **kw)


def test_request_validation():
    with pytest.raises(ValueError):
        CompletionRequest((ChatMessage("user", "x"),))
    with pytest.raises(ValueError):
        ChatMessage("system", "  ")
    with pytest.raises(ValueError):
        CompletionRequest((ChatMessage("system", "x"),), temperature=-1)
    with pytest.raises(ValueError):
        RetryPolicy(max_attempts=0)


def test_wire_format():
    server, sleeps = Server([(200, ok_body("X"))]), []
    resp = live(server, sleeps).complete(req())
    assert resp.content == "X" and resp.input_tokens == 11 and resp.output_tokens == 7
    sent = server.requests[0]
    assert str(sent.url) == "http://llm.local/v1/chat/completions"
    assert sent.headers["authorization"] == "Bearer k3y"
    payload = json.loads(sent.content)
    assert payload["model"] == "test-model"
    assert payload["temperature"] == 0.2
    assert payload["messages"] == [{"role": "system", "content": "sys"}, {"role": "user", "content": "hi"}]


def test_env_configuration(monkeypatch):
    monkeypatch.setenv("REPHRASE_API_KEY", "from-env")
    monkeypatch.setenv("REPHRASE_API_BASE", "http://env.local/")
    server = Server([(200, ok_body())])
    b = LiveBackend("m", transport=httpx.MockTransport(server))
    b.complete(req())
    assert str(server.requests[0].url) == "http://env.local/v1/chat/completions"
    assert server.requests[0].headers["authorization"] == "Bearer from-env"


def test_rate_limit_then_success():
    server, sleeps = Server([(429, {}), (429, {}), (200, ok_body("done"))]), []
    assert live(server, sleeps).complete(req()).content == "done"
    assert len(server.requests) == 3
    assert sleeps == [1.0, 2.0]


def test_auth_failure_not_retried():
    server, sleeps = Server([(401, {}), (200, ok_body())]), []
    with pytest.raises(AuthFailure):
        live(server, sleeps).complete(req())
    assert len(server.requests) == 1 and sleeps == []


def test_exhausted_retries():
    server, sleeps = Server([(503, {}), (500, {}), (502, {})]), []
    with pytest.raises(BackendFailure) as err:
        live(server, sleeps).complete(req())
    assert err.value.attempts == 3
    assert "502" in str(err.value.last_cause)
    assert sleeps == [1.0, 2.0]


def test_timeout_is_transient():
    server, sleeps = Server([(0, httpx.ReadTimeout("slow")), (200, ok_body("ok"))]), []
    assert live(server, sleeps).complete(req()).content == "ok"
    assert sleeps == [1.0]


def test_client_error_not_retried():
    server, sleeps = Server([(400, {"error": "bad"}), (200, ok_body())]), []
    with pytest.raises(BackendFailure) as err:
        live(server, sleeps).complete(req())
    assert err.value.attempts == 1 and len(server.requests) == 1


def test_malformed_response():
    server, sleeps = Server([(200, {"nope": 1})]), []
    with pytest.raises(MalformedResponse):
        live(server, sleeps).complete(req())
    server = Server([(200, "<html>")])
    with pytest.raises(MalformedResponse):
        live(server, sleeps).complete(req())


def test_custom_policy_backoff():
    p = RetryPolicy(max_attempts=4, base_backoff_ms=100, backoff_factor=3.0)
    assert [p.backoff_ms(i) for i in (1, 2, 3)] == [100, 300, 900]


# --- scripted ----------------------------------------------------------------


def test_scripted_pass_through():
    b = scripted_backend({("broker", 1): "X"})
    assert b.complete(req("broker")).content == "X"


def test_scripted_consumed_once():
    b = scripted_backend({("broker", 1): "verdict..."})
    assert b.complete(req("broker")).content == "verdict..."
    with pytest.raises(ScriptExhausted) as err:
        b.complete(req("broker"))
    assert err.value.key == ("broker", 2)


def test_scripted_wrong_role_names_key():
    b = scripted_backend({("asserting", 1): "x"})
    with pytest.raises(ScriptExhausted) as err:
        b.complete(req("arguing/p9"))
    assert err.value.key == ("arguing/p9", 1)
    assert "arguing/p9" in str(err.value)


def test_scripted_role_entries_serve_each_pair_once():
    b = scripted_backend({("broker", 1): "shared", ("broker/p2", 1): "special"})
    assert b.complete(req("broker/p1")).content == "shared"
    assert b.complete(req("broker/p3")).content == "shared"
    assert b.complete(req("broker/p2")).content == "special"
    with pytest.raises(ScriptExhausted):
        b.complete(req("broker/p1"))


def test_scripted_pinned_tag_has_no_fallback():
    b = scripted_backend({("broker", 1): "shared", ("broker/p2", 0): ""})
    with pytest.raises(ScriptExhausted):
        b.complete(req("broker/p2"))


def test_scripted_empty_script():
    with pytest.raises(ValueError):
        ScriptedBackend({})


def test_scripted_concurrent_ordinals():
    script = {(f"asserting/p{i}", n): f"{i}-{n}" for i in range(20) for n in (1, 2, 3)}
    b = ScriptedBackend(script)
    out = {}

    def worker(i):
        out[i] = [b.complete(req(f"asserting/p{i}")).content for _ in range(3)]

    threads = [threading.Thread(target=worker, args=(i,)) for i in range(20)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert out == {i: [f"{i}-1", f"{i}-2", f"{i}-3"] for i in range(20)}


def test_load_script(tmp_path):
    path = tmp_path / "s.json"
    path.write_text(json.dumps({"broker": ["a", "b"], "asserting/p1": "c", "broker/p9": []}))
    script = load_script(path)
    assert script[("broker", 2)] == "b"
    assert script[("asserting/p1", 1)] == "c"
    b = ScriptedBackend(script)
    with pytest.raises(ScriptExhausted):
        b.complete(req("broker/p9"))
