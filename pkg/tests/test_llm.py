"""Completion client: mock transport scripting, retry schedule, HTTP wire format."""
from __future__ import annotations

import pytest

from elmrace.llm import (
    DEFAULT_MAX_TOKENS,
    DEFAULT_TEMPERATURE,
    ENV_KEY,
    ENV_MODEL,
    ENV_URL,
    HttpTransport,
    LlmClient,
    LlmRequest,
    MockTransport,
    TransportError,
    client_from_env,
)


def make_client(transport, delays=(1.0, 2.0, 4.0)):
    sleeps: list[float] = []
    client = LlmClient(transport, retry_delays=delays, sleep=sleeps.append)
    return client, sleeps


def test_mock_transport_list_script_pops_in_order():
    transport = MockTransport(["first", "second", "third"])
    client, _ = make_client(transport)
    assert client.complete("p1").completions == ["first"]
    assert client.complete("p2", n=2).completions == ["second", "third"]
    assert [c.prompt for c in transport.calls] == ["p1", "p2"]
    assert transport.calls[1].n == 2


def test_mock_transport_callable_script_sees_prompt():
    transport = MockTransport(lambda prompt: prompt.upper())
    client, _ = make_client(transport)
    assert client.complete("abc", n=3).completions == ["ABC", "ABC", "ABC"]


def test_request_validation():
    with pytest.raises(ValueError):
        LlmRequest("p", n=0)
    req = LlmRequest("p")
    assert req.temperature == DEFAULT_TEMPERATURE
    assert req.max_tokens == DEFAULT_MAX_TOKENS


def test_retry_schedule_then_success():
    attempts = []

    class Flaky:
        def complete(self, request):
            attempts.append(request.prompt)
            if len(attempts) < 3:
                raise TransportError("down")
            return MockTransport(["ok"]).complete(request)

    client, sleeps = make_client(Flaky())
    assert client.complete("p").completions == ["ok"]
    assert len(attempts) == 3
    assert sleeps == [1.0, 2.0]


def test_gives_up_after_initial_plus_three_retries():
    attempts = []

    class Dead:
        def complete(self, request):
            attempts.append(1)
            raise TransportError("down")

    client, sleeps = make_client(Dead())
    with pytest.raises(TransportError):
        client.complete("p")
    assert len(attempts) == 4
    assert sleeps == [1.0, 2.0, 4.0]


class FakeResponse:
    def __init__(self, payload, status_ok=True):
        self._payload = payload
        self._ok = status_ok

    def raise_for_status(self):
        if not self._ok:
            import requests
            raise requests.HTTPError("500 server error")

    def json(self):
        if self._payload is None:
            raise ValueError("no json")
        return self._payload


class FakeSession:
    def __init__(self, response):
        self.response = response
        self.posts = []

    def post(self, url, json=None, headers=None, timeout=None):
        self.posts.append({"url": url, "json": json, "headers": headers, "timeout": timeout})
        return self.response


def test_http_transport_wire_format():
    session = FakeSession(FakeResponse({"choices": [{"text": "hi"}], "usage": {"total_tokens": 5}}))
    transport = HttpTransport(base_url="http://llm.example/v1/", model="m-1",
                              api_key="sekrit", session=session)
    response = transport.complete(LlmRequest("the prompt", n=1, temperature=0.8, max_tokens=1024))
    assert response.completions == ["hi"]
    assert response.usage == {"total_tokens": 5}
    post = session.posts[0]
    assert post["url"] == "http://llm.example/v1/completions"
    assert post["json"] == {"model": "m-1", "prompt": "the prompt", "n": 1,
                            "temperature": 0.8, "max_tokens": 1024}
    assert post["headers"]["Authorization"] == "Bearer sekrit"
    assert post["timeout"] == 60.0


def test_http_transport_no_key_no_auth_header():
    session = FakeSession(FakeResponse({"choices": []}))
    transport = HttpTransport(base_url="http://llm.example", model="m", session=session)
    transport.complete(LlmRequest("p"))
    assert "Authorization" not in session.posts[0]["headers"]


@pytest.mark.parametrize("payload", [None, {"nope": 1}, {"choices": [{"wrong": "x"}]}, {"choices": 3}])
def test_http_transport_malformed_payload(payload):
    session = FakeSession(FakeResponse(payload))
    transport = HttpTransport(base_url="http://llm.example", model="m", session=session)
    with pytest.raises(TransportError):
        transport.complete(LlmRequest("p"))


def test_http_transport_http_error():
    session = FakeSession(FakeResponse({"choices": []}, status_ok=False))
    transport = HttpTransport(base_url="http://llm.example", model="m", session=session)
    with pytest.raises(TransportError):
        transport.complete(LlmRequest("p"))


def test_env_configuration(monkeypatch):
    monkeypatch.setenv(ENV_URL, "http://env.example/api/")
    monkeypatch.setenv(ENV_MODEL, "env-model")
    monkeypatch.setenv(ENV_KEY, "env-key")
    transport = HttpTransport()
    assert transport.base_url == "http://env.example/api"
    assert transport.model == "env-model"
    assert transport.api_key == "env-key"
    client = client_from_env()
    assert isinstance(client.transport, HttpTransport)


def test_missing_url_rejected(monkeypatch):
    monkeypatch.delenv(ENV_URL, raising=False)
    with pytest.raises(TransportError):
        HttpTransport()
