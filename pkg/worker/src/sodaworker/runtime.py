"""Execute one candidate program and report a status plus walker text.

Candidate sources are Python programs defining a zero-argument entrypoint
(default ``make_walker``) that builds a walker through the ``walker_creator``
facade.  Each run gets a fresh namespace exposing only ``walker_creator``,
``query_cppn``, the ``math`` module, and an ``np`` shim providing ``sign``
(also importable as ``numpy``); a restricted builtins table and an import
allowlist keep file and network access out of candidate code.  Process-level
limits (memory, wall clock) are the sandbox module's job, not ours.

Like the engine-side executor, the facade departs from the raw builder in one
way: self-muscle attempts return False (like duplicates) instead of raising,
because merge-on-add routinely aliases joint handles in generated programs.
"""
from __future__ import annotations

import builtins as _py_builtins
import math

from .builder import WalkerBuilder, canonical_text, validate_doc

STATUS_OK = "ok"
STATUS_SYNTAX = "syntax_error"
STATUS_RUNTIME = "runtime_error"
STATUS_INVALID = "invalid_walker"
STATUS_TIMEOUT = "timeout"
STATUS_RESOURCE = "resource"

DEFAULT_ENTRYPOINT = "make_walker"


class Walker:
    """Opaque product of walker_creator.get_walker(); wraps the canonical doc."""

    __slots__ = ("doc",)

    def __init__(self, doc: dict) -> None:
        self.doc = doc


class walker_creator:  # noqa: N801 — candidate programs use this exact name
    def __init__(self) -> None:
        self._builder = WalkerBuilder()

    def add_joint(self, x: float, y: float) -> int:
        return self._builder.add_joint(x, y)

    def add_muscle(
        self,
        a: int,
        b: int,
        passive: object = True,
        amplitude: float = 0.0,
        phase: float = 0.0,
    ) -> bool:
        if isinstance(a, int) and isinstance(b, int) and a == b:
            return False
        return self._builder.add_muscle(a, b, passive, amplitude, phase)

    def get_walker(self) -> Walker:
        return Walker(self._builder.doc())


def query_cppn(wc, xgrid, ygrid, scale, connect_func, amp_func, phase_func):
    """Grid the plane and connect points functionally.

    Joints sit at (x*scale, y*scale) for x < xgrid, y < ygrid; for every index
    pair with x2 >= x1 and y2 >= y1 (skipping pairs where x1 == y1 and
    x2 == y2), an oscillating muscle is added where connect_func holds, with
    amp_func/phase_func supplying the parameters.
    """
    if xgrid < 1 or ygrid < 1:
        raise ValueError("query_cppn needs positive grid dimensions")
    joints = {}
    for x in range(xgrid):
        for y in range(ygrid):
            joints[(x, y)] = wc.add_joint(x * scale, y * scale)
    for x1 in range(xgrid):
        for y1 in range(ygrid):
            for x2 in range(x1, xgrid):
                for y2 in range(y1, ygrid):
                    if x1 == y1 and x2 == y2:
                        continue
                    if connect_func(x1, y1, x2, y2):
                        amp = amp_func(x1, y1, x2, y2)
                        phase = phase_func(x1, y1, x2, y2)
                        wc.add_muscle(joints[(x1, y1)], joints[(x2, y2)], False, amp, phase)
    return joints


class _NpShim:
    """Tiny stand-in for the numeric module candidate programs import as np."""

    @staticmethod
    def sign(value):
        v = float(value)
        if v > 0.0:
            return 1.0
        if v < 0.0:
            return -1.0
        return 0.0

    pi = math.pi

    @staticmethod
    def sqrt(value):
        return math.sqrt(value)

    @staticmethod
    def abs(value):  # noqa: A003 — mirrors the numpy name
        return abs(value)


_ALLOWED_IMPORTS = {"math": math, "numpy": _NpShim(), "np": _NpShim()}

_SAFE_BUILTIN_NAMES = [
    "abs", "all", "any", "bool", "callable", "chr", "dict", "divmod",
    "enumerate", "filter", "float", "frozenset", "getattr", "hasattr", "hash",
    "int", "isinstance", "issubclass", "iter", "len", "list", "map", "max",
    "min", "next", "object", "ord", "pow", "range", "repr", "reversed",
    "round", "set", "setattr", "slice", "sorted", "str", "sum", "tuple",
    "type", "zip",
    # exception types so except clauses and raises keep working
    "ArithmeticError", "AssertionError", "AttributeError", "BaseException",
    "Exception", "IndexError", "KeyError", "LookupError", "NameError",
    "NotImplementedError", "OverflowError", "RecursionError", "RuntimeError",
    "StopIteration", "TypeError", "ValueError", "ZeroDivisionError",
]


def _restricted_import(name, globals=None, locals=None, fromlist=(), level=0):
    if level == 0 and name in _ALLOWED_IMPORTS:
        return _ALLOWED_IMPORTS[name]
    raise ImportError(f"import of {name!r} is not allowed in genotype programs")


def _sink_print(*args, **kwargs) -> None:
    return None


def build_namespace() -> dict:
    """Fresh globals for one candidate execution."""
    safe = {name: getattr(_py_builtins, name) for name in _SAFE_BUILTIN_NAMES}
    safe["__import__"] = _restricted_import
    safe["__build_class__"] = _py_builtins.__build_class__
    safe["print"] = _sink_print
    safe["True"] = True
    safe["False"] = False
    safe["None"] = None
    return {
        "__builtins__": safe,
        "__name__": "genotype",
        "walker_creator": walker_creator,
        "query_cppn": query_cppn,
        "math": math,
        "np": _NpShim(),
    }


def _summarize(exc: BaseException) -> str:
    return f"{type(exc).__name__}: {exc}"


def run_candidate(source: str, entrypoint: str = DEFAULT_ENTRYPOINT) -> dict:
    """Compile, run, unwrap, validate; always returns a status dict.

    ``{"status": "ok", "walker": <canonical text>}`` on success, otherwise
    ``{"status": ..., "error": ...}``.  MemoryError anywhere in execution maps
    to ``resource`` (this runtime is meant to run under a memory rlimit).
    """
    try:
        code = compile(source, "<genotype>", "exec")
    except SyntaxError as exc:
        return {"status": STATUS_SYNTAX, "error": _summarize(exc)}
    except (ValueError, MemoryError, RecursionError) as exc:
        return {"status": STATUS_SYNTAX, "error": _summarize(exc)}
    ns = build_namespace()
    try:
        exec(code, ns)
        fn = ns.get(entrypoint)
        if not callable(fn):
            return {
                "status": STATUS_RUNTIME,
                "error": f"entrypoint {entrypoint!r} not defined or not callable",
            }
        product = fn()
    except MemoryError as exc:
        return {"status": STATUS_RESOURCE, "error": _summarize(exc)}
    except BaseException as exc:  # candidate code can raise anything at all
        return {"status": STATUS_RUNTIME, "error": _summarize(exc)}
    if isinstance(product, Walker):
        doc = product.doc
    elif isinstance(product, walker_creator):
        doc = product.get_walker().doc
    else:
        return {
            "status": STATUS_INVALID,
            "error": f"entrypoint returned {type(product).__name__}, not a walker",
        }
    violations = validate_doc(doc)
    if violations:
        rules = ", ".join(sorted({rule for rule, _ in violations}))
        return {"status": STATUS_INVALID, "error": "walker fails validation: " + rules}
    return {"status": STATUS_OK, "walker": canonical_text(doc)}
