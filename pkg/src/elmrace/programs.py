"""Run genotype programs in-process, and render specs back into programs.

Candidate sources are Python programs that define a zero-argument entrypoint
(default ``make_walker``) building a walker through the ``walker_creator``
facade.  The execution namespace is fresh per run and exposes only:
``walker_creator``, ``query_cppn``, the ``math`` module, and an ``np`` shim
providing ``sign`` (importable as ``numpy``).  A restricted builtins table
plus an import allowlist keeps accidental I/O out of candidates; this
executor offers no process isolation or time/memory limits — use the worker
protocol client for that.

The facade differs from `WalkerBuilder` in one deliberate way: self-muscle
attempts are skipped silently (returning False, like duplicates) instead of
raising.  Generated programs routinely alias joint handles through the
merge-on-add rule, and treating the resulting self-connections as fatal would
reject otherwise fine walkers.
"""
from __future__ import annotations

import builtins as _py_builtins
import math
from dataclasses import dataclass

from .walker import BuildError, WalkerBuilder, WalkerSpec, canonical_serialize, validate

STATUS_OK = "ok"
STATUS_SYNTAX = "syntax_error"
STATUS_RUNTIME = "runtime_error"
STATUS_INVALID = "invalid_walker"
STATUS_TIMEOUT = "timeout"       # produced by the subprocess executor only
STATUS_RESOURCE = "resource"     # produced by the subprocess executor only

DEFAULT_ENTRYPOINT = "make_walker"


class Walker:
    """Opaque product of walker_creator.get_walker()."""

    __slots__ = ("spec",)

    def __init__(self, spec: WalkerSpec) -> None:
        self.spec = spec


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
        return Walker(self._builder.to_spec())


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


@dataclass
class ExecOutcome:
    status: str
    spec: WalkerSpec | None = None
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.status == STATUS_OK

    @property
    def walker_text(self) -> str | None:
        return canonical_serialize(self.spec) if self.spec is not None else None


def _summarize(exc: BaseException) -> str:
    return f"{type(exc).__name__}: {exc}"


def execute_source(source: str, entrypoint: str = DEFAULT_ENTRYPOINT) -> ExecOutcome:
    try:
        code = compile(source, "<genotype>", "exec")
    except SyntaxError as exc:
        return ExecOutcome(STATUS_SYNTAX, error=_summarize(exc))
    except (ValueError, MemoryError, RecursionError) as exc:
        return ExecOutcome(STATUS_SYNTAX, error=_summarize(exc))
    ns = build_namespace()
    try:
        exec(code, ns)
        fn = ns.get(entrypoint)
        if not callable(fn):
            return ExecOutcome(
                STATUS_RUNTIME, error=f"entrypoint {entrypoint!r} not defined or not callable"
            )
        product = fn()
    except BaseException as exc:  # candidate code can raise anything at all
        return ExecOutcome(STATUS_RUNTIME, error=_summarize(exc))
    if isinstance(product, Walker):
        spec = product.spec
    elif isinstance(product, walker_creator):
        spec = product.get_walker().spec
    else:
        return ExecOutcome(
            STATUS_INVALID, error=f"entrypoint returned {type(product).__name__}, not a walker"
        )
    report = validate(spec)
    if not report.ok:
        return ExecOutcome(
            STATUS_INVALID, error="walker fails validation: " + ", ".join(sorted(report.rules()))
        )
    return ExecOutcome(STATUS_OK, spec=spec)


class InProcessExecutor:
    """Executor protocol implementation running candidates in this interpreter."""

    def run(self, source: str, entrypoint: str = DEFAULT_ENTRYPOINT) -> ExecOutcome:
        return execute_source(source, entrypoint)

    def run_batch(self, sources: list[str], entrypoint: str = DEFAULT_ENTRYPOINT) -> list[ExecOutcome]:
        return [execute_source(s, entrypoint) for s in sources]

    def close(self) -> None:
        return None


# ---------------------------------------------------------------------------
# spec -> program


def render_program(spec: WalkerSpec, entrypoint: str = DEFAULT_ENTRYPOINT) -> str:
    """Deterministic program whose execution rebuilds exactly `spec`.

    Valid specs survive the builder untouched (joints are >= d_min apart, so
    nothing merges; stored amplitudes already respect the clamp), which makes
    execute(render(spec)) an identity on validated specs.
    """
    lines = [f"def {entrypoint}():", "    wc = walker_creator()"]
    for i, j in enumerate(spec.joints):
        lines.append(f"    j{i} = wc.add_joint({j.x!r}, {j.y!r})")
    for m in spec.muscles:
        if m.oscillating:
            lines.append(
                f"    wc.add_muscle(j{m.a}, j{m.b}, False, {m.amplitude!r}, {m.phase!r})"
            )
        else:
            lines.append(f"    wc.add_muscle(j{m.a}, j{m.b})")
    lines.append("    return wc.get_walker()")
    return "\n".join(lines) + "\n"
