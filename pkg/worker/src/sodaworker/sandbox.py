"""Process isolation around the candidate runtime.

``CandidateRunner`` keeps one forked executor child and feeds it jobs over a
pipe pair, strictly request/response.  The child applies a per-job address-
space rlimit before running the candidate and reports MemoryError as the
``resource`` status; the parent enforces the wall-clock budget with a hard
SIGKILL (no cooperative cancellation), answering ``timeout`` and forking a
fresh child for the next job.  Healthy children are retired and replaced
after ``RECYCLE_AFTER`` jobs so leaked candidate state cannot accumulate.

A killed or crashed child never takes the calling process down: every exit
path is mapped to a status dict.
"""
from __future__ import annotations

import json
import os
import resource
import signal
import select
import sys
import time

from .runtime import STATUS_RESOURCE, STATUS_RUNTIME, STATUS_TIMEOUT, run_candidate

RECYCLE_AFTER = 500
_MB = 1024 * 1024
_GRACE_S = 2.0  # patience for a retiring child to exit on its own


def _write_all(fd: int, data: bytes) -> None:
    view = memoryview(data)
    while view:
        written = os.write(fd, view)
        view = view[written:]


def _cap_memory(memory_mb: int) -> None:
    _, hard = resource.getrlimit(resource.RLIMIT_AS)
    soft = memory_mb * _MB
    if hard != resource.RLIM_INFINITY:
        soft = min(soft, hard)
    try:
        resource.setrlimit(resource.RLIMIT_AS, (soft, hard))
    except (ValueError, OSError):
        pass  # caps below current usage can be unsettable; candidate then runs unlimited


def _uncap_memory() -> None:
    _, hard = resource.getrlimit(resource.RLIMIT_AS)
    try:
        resource.setrlimit(resource.RLIMIT_AS, (hard, hard))
    except (ValueError, OSError):
        pass


def _child_main(job_fd: int, result_fd: int) -> None:
    """Executor child loop: read a job line, run it, write a result line.

    Never returns; exits 0 on job-pipe EOF.  The server's stdio is replaced
    with /dev/null first so candidate code (or an interpreter message) can
    never corrupt the wire protocol.
    """
    devnull = os.open(os.devnull, os.O_RDWR)
    os.dup2(devnull, 0)
    os.dup2(devnull, 1)
    os.close(devnull)
    jobs = os.fdopen(job_fd, "rb")
    try:
        while True:
            line = jobs.readline()
            if not line:
                break
            job = json.loads(line)
            _cap_memory(job["memory_mb"])
            try:
                result = run_candidate(job["source"], job["entrypoint"])
            finally:
                _uncap_memory()
            _write_all(result_fd, json.dumps(result).encode("ascii") + b"\n")
    finally:
        os._exit(0)


class _Child:
    def __init__(self, pid: int, job_fd: int, result_fd: int) -> None:
        self.pid = pid
        self.job_fd = job_fd
        self.result_fd = result_fd
        self.pending = bytearray()


class CandidateRunner:
    """Run candidate jobs in a disposable executor child."""

    def __init__(self, recycle_after: int = RECYCLE_AFTER) -> None:
        if recycle_after < 1:
            raise ValueError("recycle_after must be positive")
        self._recycle_after = recycle_after
        self._child: _Child | None = None
        self._served = 0

    # -- child lifecycle ----------------------------------------------------

    def _spawn(self) -> _Child:
        job_r, job_w = os.pipe()
        result_r, result_w = os.pipe()
        sys.stdout.flush()
        sys.stderr.flush()
        pid = os.fork()
        if pid == 0:
            os.close(job_w)
            os.close(result_r)
            _child_main(job_r, result_w)
            os._exit(0)  # unreachable; _child_main never returns
        os.close(job_r)
        os.close(result_w)
        self._served = 0
        return _Child(pid, job_w, result_r)

    def _forget(self) -> None:
        child = self._child
        if child is None:
            return
        for fd in (child.job_fd, child.result_fd):
            try:
                os.close(fd)
            except OSError:
                pass
        self._child = None
        self._served = 0

    def _kill(self) -> None:
        child = self._child
        if child is None:
            return
        try:
            os.kill(child.pid, signal.SIGKILL)
        except ProcessLookupError:
            pass
        self._reap(child.pid, block=True)
        self._forget()

    def _retire(self) -> None:
        """Close the job pipe and let the (idle) child exit on its own."""
        child = self._child
        if child is None:
            return
        try:
            os.close(child.job_fd)
        except OSError:
            pass
        child.job_fd = -1
        deadline = time.monotonic() + _GRACE_S
        while time.monotonic() < deadline:
            if self._reap(child.pid, block=False):
                try:
                    os.close(child.result_fd)
                except OSError:
                    pass
                self._child = None
                self._served = 0
                return
            time.sleep(0.01)
        try:
            os.kill(child.pid, signal.SIGKILL)
        except ProcessLookupError:
            pass
        self._reap(child.pid, block=True)
        try:
            os.close(child.result_fd)
        except OSError:
            pass
        self._child = None
        self._served = 0

    @staticmethod
    def _reap(pid: int, block: bool) -> bool:
        try:
            done, _ = os.waitpid(pid, 0 if block else os.WNOHANG)
        except ChildProcessError:
            return True
        return done == pid

    def close(self) -> None:
        self._retire()

    def __enter__(self) -> "CandidateRunner":
        return self

    def __exit__(self, *_exc) -> None:
        self.close()

    # -- job execution ------------------------------------------------------

    def execute(self, source: str, entrypoint: str, timeout_ms: int, memory_mb: int) -> dict:
        if self._child is not None and self._served >= self._recycle_after:
            self._retire()
        if self._child is None:
            self._child = self._spawn()
        child = self._child
        job = json.dumps(
            {"source": source, "entrypoint": entrypoint, "memory_mb": memory_mb}
        ).encode("ascii") + b"\n"
        deadline = time.monotonic() + timeout_ms / 1000.0
        try:
            _write_all(child.job_fd, job)
        except OSError:
            self._kill()
            return {"status": STATUS_RESOURCE, "error": "executor child died before the job was sent"}
        line = self._read_result_line(child, deadline)
        if line is None:
            self._kill()
            return {"status": STATUS_TIMEOUT, "error": f"execution exceeded {timeout_ms} ms"}
        if line == b"":
            self._kill()
            return {
                "status": STATUS_RESOURCE,
                "error": "executor child died mid-job (out of memory or crashed)",
            }
        try:
            result = json.loads(line)
        except json.JSONDecodeError:
            self._kill()
            return {"status": STATUS_RUNTIME, "error": "executor child wrote an unreadable result"}
        self._served += 1
        return result

    @staticmethod
    def _read_result_line(child: _Child, deadline: float) -> bytes | None:
        """One result line; None on deadline, b"" if the child hung up."""
        while b"\n" not in child.pending:
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                return None
            ready, _, _ = select.select([child.result_fd], [], [], remaining)
            if not ready:
                return None
            chunk = os.read(child.result_fd, 65536)
            if not chunk:
                return b""
            child.pending.extend(chunk)
        line, _, rest = bytes(child.pending).partition(b"\n")
        child.pending = bytearray(rest)
        return line
