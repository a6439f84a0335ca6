"""Sandboxed stdio worker for walker-building genotype programs.

The worker reads newline-delimited JSON execution requests on stdin, runs
each candidate program in a resource-limited child process, and answers with
the walker's canonical single-line JSON text (or an error status).  The
builder semantics are pinned to a shared conformance fixture suite so that
walker text produced here is byte-identical to the engine's own builder.
"""

from .builder import BuildError, WalkerBuilder, canonical_text, validate_doc
from .runtime import run_candidate
from .sandbox import CandidateRunner
from .server import PROTOCOL_FORMAT, PROTOCOL_VERSION, serve

__all__ = [
    "BuildError",
    "CandidateRunner",
    "PROTOCOL_FORMAT",
    "PROTOCOL_VERSION",
    "WalkerBuilder",
    "canonical_text",
    "run_candidate",
    "serve",
    "validate_doc",
]
