"""Newline-delimited JSON execution service over stdio.

On startup the server prints one handshake line:

    {"format": "genotype-worker-protocol", "version": 1}

and then answers exactly one response per request line, in order:

    -> {"id": "...", "source": "...", "entrypoint": "make_walker",
        "timeout_ms": 10000, "memory_mb": 512}
    <- {"id": "...", "status": "ok", "walker": "<canonical spec text>"}
    <- {"id": "...", "status": "runtime_error", "error": "..."}

Statuses are ok, syntax_error, runtime_error, timeout, resource, and
invalid_walker; a response carries either ``walker`` (ok) or ``error``.  A
line that is not a JSON object gets an error response with a null id and the
loop keeps serving.  EOF on stdin shuts the executor child down and exits 0.
"""
from __future__ import annotations

import argparse
import json
import sys
from typing import TextIO

from .runtime import DEFAULT_ENTRYPOINT, STATUS_OK, STATUS_RUNTIME
from .sandbox import CandidateRunner

PROTOCOL_FORMAT = "genotype-worker-protocol"
PROTOCOL_VERSION = 1

DEFAULT_TIMEOUT_MS = 10_000
DEFAULT_MEMORY_MB = 512


def _error_response(request_id: object, message: str) -> dict:
    return {"id": request_id, "status": STATUS_RUNTIME, "error": message}


def _positive_int(payload: dict, field: str, default: int) -> int:
    value = payload.get(field, default)
    if isinstance(value, bool) or not isinstance(value, int) or value < 1:
        raise ValueError(f"request field {field!r} must be a positive integer, got {value!r}")
    return value


def _job_fields(payload: dict) -> tuple[str, str, int, int]:
    source = payload.get("source")
    if not isinstance(source, str):
        raise ValueError(f"request field 'source' must be a string, got {type(source).__name__}")
    entrypoint = payload.get("entrypoint", DEFAULT_ENTRYPOINT)
    if not isinstance(entrypoint, str):
        raise ValueError(
            f"request field 'entrypoint' must be a string, got {type(entrypoint).__name__}"
        )
    timeout_ms = _positive_int(payload, "timeout_ms", DEFAULT_TIMEOUT_MS)
    memory_mb = _positive_int(payload, "memory_mb", DEFAULT_MEMORY_MB)
    return source, entrypoint, timeout_ms, memory_mb


def serve(stdin: TextIO, stdout: TextIO, runner: CandidateRunner | None = None) -> int:
    """Serve requests until EOF; always returns 0 after an orderly drain."""
    runner = runner if runner is not None else CandidateRunner()
    stdout.write(json.dumps({"format": PROTOCOL_FORMAT, "version": PROTOCOL_VERSION}) + "\n")
    stdout.flush()
    try:
        for line in stdin:
            try:
                payload = json.loads(line)
            except json.JSONDecodeError as exc:
                response = _error_response(None, f"malformed request line: {exc}")
            else:
                if not isinstance(payload, dict):
                    response = _error_response(None, "request must be a JSON object")
                else:
                    request_id = payload.get("id")
                    try:
                        source, entrypoint, timeout_ms, memory_mb = _job_fields(payload)
                    except ValueError as exc:
                        response = _error_response(request_id, str(exc))
                    else:
                        result = runner.execute(source, entrypoint, timeout_ms, memory_mb)
                        if result.get("status") == STATUS_OK:
                            response = {
                                "id": request_id,
                                "status": STATUS_OK,
                                "walker": result["walker"],
                            }
                        else:
                            response = {
                                "id": request_id,
                                "status": result.get("status", STATUS_RUNTIME),
                                "error": str(result.get("error", "")),
                            }
            stdout.write(json.dumps(response) + "\n")
            stdout.flush()
    finally:
        runner.close()
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="sodaworker",
        description="Serve the genotype-worker stdio protocol: JSON execution "
        "requests in on stdin, walker text or error statuses out on stdout.",
    )
    parser.parse_args(argv)
    return serve(sys.stdin, sys.stdout)
