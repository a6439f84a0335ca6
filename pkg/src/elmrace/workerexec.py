"""Client for external genotype-executor worker processes.

Workers speak newline-delimited JSON over stdio.  On startup a worker
prints one handshake line:

    {"format": "genotype-worker-protocol", "version": 1}

then answers one response per request, in order:

    -> {"id": "...", "source": "...", "entrypoint": "make_walker",
        "timeout_ms": 10000, "memory_mb": 512}
    <- {"id": "...", "status": "ok", "walker": "<canonical spec text>"}
    <- {"id": "...", "status": "runtime_error", "error": "..."}

Statuses match the in-process executor exactly (ok, syntax_error,
runtime_error, timeout, resource, invalid_walker), so this class is a
drop-in for the engine's executor slot.  A worker that dies mid-request is
respawned; the affected request reports runtime_error.
"""
from __future__ import annotations

import json
import subprocess
from concurrent.futures import ThreadPoolExecutor

from .programs import DEFAULT_ENTRYPOINT, ExecOutcome, STATUS_OK, STATUS_RUNTIME
from .walker import WalkerError, parse

PROTOCOL_FORMAT = "genotype-worker-protocol"
PROTOCOL_VERSION = 1
DEFAULT_WORKER_CMD = ("python3", "-m", "sodaworker")

VALID_STATUSES = {"ok", "syntax_error", "runtime_error", "timeout", "resource",
                  "invalid_walker"}


class WorkerError(Exception):
    pass


class _Worker:
    """One worker subprocess; strictly request/response."""

    def __init__(self, cmd: tuple[str, ...]) -> None:
        self.cmd = cmd
        self.proc = subprocess.Popen(
            list(cmd), stdin=subprocess.PIPE, stdout=subprocess.PIPE, text=True)
        line = self.proc.stdout.readline()
        try:
            hello = json.loads(line)
        except json.JSONDecodeError as exc:
            self.stop()
            raise WorkerError(f"bad worker handshake line {line!r}") from exc
        if hello.get("format") != PROTOCOL_FORMAT or hello.get("version") != PROTOCOL_VERSION:
            self.stop()
            raise WorkerError(
                f"incompatible worker: format={hello.get('format')!r} "
                f"version={hello.get('version')!r}")

    def request(self, payload: dict) -> dict:
        self.proc.stdin.write(json.dumps(payload) + "\n")
        self.proc.stdin.flush()
        line = self.proc.stdout.readline()
        if not line:
            raise WorkerError("worker closed its stdout mid-session")
        return json.loads(line)

    def alive(self) -> bool:
        return self.proc.poll() is None

    def stop(self) -> None:
        for stream in (self.proc.stdin, self.proc.stdout):
            try:
                if stream:
                    stream.close()
            except OSError:
                pass
        try:
            self.proc.wait(timeout=5)
        except subprocess.TimeoutExpired:
            self.proc.kill()
            self.proc.wait()


class WorkerPoolExecutor:
    """Executor running candidate programs in external worker processes."""

    def __init__(self, cmd: tuple[str, ...] | None = None, workers: int = 1,
                 timeout_ms: int = 10_000, memory_mb: int = 512) -> None:
        if workers < 1:
            raise WorkerError("need at least one worker")
        self.cmd = tuple(cmd) if cmd else DEFAULT_WORKER_CMD
        self.timeout_ms = timeout_ms
        self.memory_mb = memory_mb
        self._workers = [_Worker(self.cmd) for _ in range(workers)]
        self._next_id = 0

    def _fresh_id(self) -> str:
        self._next_id += 1
        return f"x{self._next_id:08d}"

    def _execute_on(self, worker_idx: int, source: str, entrypoint: str) -> ExecOutcome:
        request_id = self._fresh_id()
        payload = {
            "id": request_id,
            "source": source,
            "entrypoint": entrypoint,
            "timeout_ms": self.timeout_ms,
            "memory_mb": self.memory_mb,
        }
        worker = self._workers[worker_idx]
        try:
            response = worker.request(payload)
        except (WorkerError, OSError, json.JSONDecodeError) as exc:
            worker.stop()
            self._workers[worker_idx] = _Worker(self.cmd)
            return ExecOutcome(STATUS_RUNTIME, error=f"worker died: {exc}")
        if response.get("id") != request_id:
            return ExecOutcome(
                STATUS_RUNTIME,
                error=f"response id {response.get('id')!r} != request id {request_id!r}")
        status = response.get("status")
        if status not in VALID_STATUSES:
            return ExecOutcome(STATUS_RUNTIME, error=f"unknown worker status {status!r}")
        if status != STATUS_OK:
            return ExecOutcome(status, error=str(response.get("error", "")))
        try:
            spec = parse(response.get("walker", ""))
        except WalkerError as exc:
            return ExecOutcome(STATUS_RUNTIME, error=f"unparsable walker text: {exc}")
        return ExecOutcome(STATUS_OK, spec=spec)

    def run(self, source: str, entrypoint: str = DEFAULT_ENTRYPOINT) -> ExecOutcome:
        return self._execute_on(0, source, entrypoint)

    def run_batch(self, sources: list[str],
                  entrypoint: str = DEFAULT_ENTRYPOINT) -> list[ExecOutcome]:
        if not sources:
            return []
        results: list[ExecOutcome | None] = [None] * len(sources)
        n = len(self._workers)

        def drain(worker_idx: int) -> None:
            for i in range(worker_idx, len(sources), n):
                results[i] = self._execute_on(worker_idx, sources[i], entrypoint)

        if n == 1:
            drain(0)
        else:
            with ThreadPoolExecutor(max_workers=n) as pool:
                list(pool.map(drain, range(n)))
        return results  # type: ignore[return-value]

    def close(self) -> None:
        for worker in self._workers:
            worker.stop()

    def __enter__(self) -> "WorkerPoolExecutor":
        return self

    def __exit__(self, *_exc) -> None:
        self.close()
