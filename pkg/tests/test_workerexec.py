"""Worker-protocol client against scripted stand-in workers.

Every stand-in is a tiny self-contained interpreter invocation, so these
tests pin the client's half of the wire contract (handshake checking, id
matching, status validation, respawn-on-death) without needing any real
worker implementation installed.
"""
from __future__ import annotations

import sys

import pytest

from elmrace.workerexec import WorkerError, WorkerPoolExecutor

ECHO_WORKER = """
import json, sys
print(json.dumps({"format": "genotype-worker-protocol", "version": 1}), flush=True)
for line in sys.stdin:
    req = json.loads(line)
    walker = json.dumps({
        "joints": [[float(len(req["source"])), float(req["timeout_ms"])]],
        "muscles": [],
    })
    print(json.dumps({"id": req["id"], "status": "ok", "walker": walker}), flush=True)
"""

ONE_SHOT_WORKER = """
import json, sys
print(json.dumps({"format": "genotype-worker-protocol", "version": 1}), flush=True)
line = sys.stdin.readline()
req = json.loads(line)
walker = json.dumps({"joints": [[1.0, 2.0]], "muscles": []})
print(json.dumps({"id": req["id"], "status": "ok", "walker": walker}), flush=True)
"""

RESPONSE_TEMPLATE = """
import json, sys
print(json.dumps({"format": "genotype-worker-protocol", "version": 1}), flush=True)
for line in sys.stdin:
    req = json.loads(line)
    print(json.dumps(%s), flush=True)
"""


def _cmd(body: str) -> tuple[str, ...]:
    return (sys.executable, "-c", body)


def _template_cmd(response_expr: str) -> tuple[str, ...]:
    return _cmd(RESPONSE_TEMPLATE % response_expr)


def test_run_round_trip_carries_request_fields():
    with WorkerPoolExecutor(cmd=_cmd(ECHO_WORKER), timeout_ms=1234) as executor:
        outcome = executor.run("abc")
    assert outcome.ok
    joint = outcome.spec.joints[0]
    assert (joint.x, joint.y) == (3.0, 1234.0)


def test_run_batch_preserves_order_across_workers():
    sources = ["a" * n for n in range(1, 8)]
    with WorkerPoolExecutor(cmd=_cmd(ECHO_WORKER), workers=3) as executor:
        outcomes = executor.run_batch(sources)
    assert [o.spec.joints[0].x for o in outcomes] == [float(n) for n in range(1, 8)]


def test_run_batch_empty_is_empty():
    with WorkerPoolExecutor(cmd=_cmd(ECHO_WORKER)) as executor:
        assert executor.run_batch([]) == []


def test_wrong_handshake_format_is_rejected():
    body = RESPONSE_TEMPLATE.replace("genotype-worker-protocol", "other-protocol") % "{}"
    with pytest.raises(WorkerError, match="incompatible"):
        WorkerPoolExecutor(cmd=_cmd(body))


def test_wrong_handshake_version_is_rejected():
    body = RESPONSE_TEMPLATE.replace('"version": 1', '"version": 2') % "{}"
    with pytest.raises(WorkerError, match="incompatible"):
        WorkerPoolExecutor(cmd=_cmd(body))


def test_garbage_handshake_is_rejected():
    with pytest.raises(WorkerError, match="handshake"):
        WorkerPoolExecutor(cmd=_cmd('print("hello there", flush=True)\nimport time\ntime.sleep(5)'))


def test_immediate_exit_is_rejected():
    with pytest.raises(WorkerError, match="handshake"):
        WorkerPoolExecutor(cmd=_cmd("pass"))


def test_mismatched_response_id_maps_to_runtime_error():
    cmd = _template_cmd('{"id": "someone-else", "status": "ok", "walker": "{}"}')
    with WorkerPoolExecutor(cmd=cmd) as executor:
        outcome = executor.run("x")
    assert outcome.status == "runtime_error"
    assert "someone-else" in outcome.error


def test_unknown_status_maps_to_runtime_error():
    cmd = _template_cmd('{"id": req["id"], "status": "confused"}')
    with WorkerPoolExecutor(cmd=cmd) as executor:
        outcome = executor.run("x")
    assert outcome.status == "runtime_error"
    assert "confused" in outcome.error


@pytest.mark.parametrize("status", ["syntax_error", "runtime_error", "timeout", "resource", "invalid_walker"])
def test_error_statuses_pass_through(status):
    cmd = _template_cmd('{"id": req["id"], "status": %r, "error": "detail"}' % status)
    with WorkerPoolExecutor(cmd=cmd) as executor:
        outcome = executor.run("x")
    assert outcome.status == status
    assert outcome.error == "detail"
    assert outcome.spec is None


def test_unparsable_walker_text_maps_to_runtime_error():
    cmd = _template_cmd('{"id": req["id"], "status": "ok", "walker": "not a walker"}')
    with WorkerPoolExecutor(cmd=cmd) as executor:
        outcome = executor.run("x")
    assert outcome.status == "runtime_error"
    assert "unparsable" in outcome.error


def test_dead_worker_is_respawned_for_the_next_request():
    with WorkerPoolExecutor(cmd=_cmd(ONE_SHOT_WORKER)) as executor:
        first = executor.run("x")
        second = executor.run("x")
        third = executor.run("x")
    assert first.ok
    assert second.status == "runtime_error"
    assert "worker died" in second.error
    assert third.ok


def test_zero_workers_rejected():
    with pytest.raises(WorkerError):
        WorkerPoolExecutor(cmd=_cmd(ECHO_WORKER), workers=0)


def test_close_terminates_worker_processes():
    executor = WorkerPoolExecutor(cmd=_cmd(ECHO_WORKER), workers=2)
    procs = [w.proc for w in executor._workers]
    executor.close()
    assert all(p.poll() is not None for p in procs)
