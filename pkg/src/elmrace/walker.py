"""Walker specs: the intermediate representation between programs and physics.

A walker is a set of 2D point-mass joints connected by muscles.  A muscle is
either a rigid-ish "distance" rod or an oscillating spring whose rest length
cycles sinusoidally.  `WalkerBuilder` is the safe construction interface: it
merges near-coincident joints, caps per-joint muscle counts, clamps
oscillation amplitudes, and wraps phases, so that anything it produces passes
`validate`.

The canonical text form is a single-line JSON document with fixed key order:

    {"joints": [[x, y], ...], "muscles": [[a, b, {"type": ...}], ...]}

`parse` also accepts the equivalent Python-literal dialect (tuples, trailing
commas) so hand-written spec text round-trips.
"""
from __future__ import annotations

import ast
import json
import math
from dataclasses import dataclass

# Builder safety constants.  Distances are in world units, masses in unit
# masses per joint.
D_MIN = 0.1          # joints closer than this merge into the nearest existing one
M_MAX = 10           # max muscles attached to any single joint
AMP_CAP_RATIO = 0.3  # oscillation amplitude is clamped to this fraction of rest length
COORD_BOUND = 1e6    # |x|, |y| must stay within this
UNIT_MASS = 1.0

KIND_DISTANCE = "distance"
KIND_OSCILLATING = "muscle"   # canonical type tag for oscillating springs


class WalkerError(Exception):
    """Base class for walker construction/parsing errors."""


class BuildError(WalkerError):
    """A builder call was rejected outright (bad index, self-muscle, bad number)."""


class ParseError(WalkerError):
    """Spec text could not be parsed; `location` describes where."""

    def __init__(self, message: str, location: str = "") -> None:
        super().__init__(f"{message} (at {location})" if location else message)
        self.location = location


@dataclass(frozen=True)
class Joint:
    x: float
    y: float


@dataclass(frozen=True)
class Muscle:
    a: int
    b: int
    kind: str
    amplitude: float | None = None
    phase: float | None = None

    @property
    def oscillating(self) -> bool:
        return self.kind == KIND_OSCILLATING


@dataclass(frozen=True)
class WalkerSpec:
    joints: tuple[Joint, ...]
    muscles: tuple[Muscle, ...]


@dataclass(frozen=True)
class BehaviorDescriptor:
    height: float
    width: float
    mass: float

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.height, self.width, self.mass)


@dataclass
class ValidationReport:
    ok: bool
    violations: list[tuple[str, str]]  # (rule name, human-readable detail)

    def rules(self) -> set[str]:
        return {rule for rule, _ in self.violations}


def _require_finite(value: float, what: str) -> float:
    v = float(value)
    if not math.isfinite(v):
        raise BuildError(f"{what} must be finite, got {value!r}")
    return v


def rest_length(ja: Joint, jb: Joint) -> float:
    # Pinned formula: sqrt of explicit squares.  Keep in sync with the worker's
    # builder so canonical text is byte-identical across processes.
    dx = jb.x - ja.x
    dy = jb.y - ja.y
    return math.sqrt(dx * dx + dy * dy)


class WalkerBuilder:
    """Incremental, safety-enforcing walker constructor.

    Joint merging: `add_joint` within D_MIN of an existing joint returns the
    nearest existing joint's index (first index wins distance ties) and adds
    nothing.  Muscle rules: self-muscles and bad indices raise `BuildError`;
    duplicate undirected pairs and per-joint cap overflows are skipped
    silently (`add_muscle` returns False).
    """

    def __init__(self) -> None:
        self._joints: list[Joint] = []
        self._muscles: list[Muscle] = []
        self._pairs: set[tuple[int, int]] = set()
        self._degree: list[int] = []

    def add_joint(self, x: float, y: float) -> int:
        xf = _require_finite(x, "joint x")
        yf = _require_finite(y, "joint y")
        if abs(xf) > COORD_BOUND or abs(yf) > COORD_BOUND:
            raise BuildError(f"joint ({xf}, {yf}) outside coordinate bound {COORD_BOUND:g}")
        best = -1
        best_d2 = D_MIN * D_MIN
        for i, j in enumerate(self._joints):
            dx = xf - j.x
            dy = yf - j.y
            d2 = dx * dx + dy * dy
            if d2 < best_d2:
                best = i
                best_d2 = d2
        if best >= 0:
            return best
        self._joints.append(Joint(xf, yf))
        self._degree.append(0)
        return len(self._joints) - 1

    def add_muscle(
        self,
        a: int,
        b: int,
        passive: object = True,
        amplitude: float = 0.0,
        phase: float = 0.0,
    ) -> bool:
        if not isinstance(a, int) or not isinstance(b, int) or isinstance(a, bool) or isinstance(b, bool):
            raise BuildError(f"muscle endpoints must be joint indices, got {a!r}, {b!r}")
        n = len(self._joints)
        if not (0 <= a < n) or not (0 <= b < n):
            raise BuildError(f"muscle ({a}, {b}) references a missing joint (have {n})")
        if a == b:
            raise BuildError(f"muscle ({a}, {b}) connects a joint to itself")
        key = (a, b) if a < b else (b, a)
        if key in self._pairs:
            return False
        if self._degree[a] >= M_MAX or self._degree[b] >= M_MAX:
            return False
        if passive:
            muscle = Muscle(a, b, KIND_DISTANCE)
        else:
            amp = _require_finite(amplitude, "amplitude")
            ph = _require_finite(phase, "phase")
            cap = AMP_CAP_RATIO * rest_length(self._joints[a], self._joints[b])
            amp = min(max(amp, 0.0), cap)
            ph = ph % 1.0
            if ph >= 1.0:  # float modulo of a tiny negative can round to 1.0
                ph = 0.0
            muscle = Muscle(a, b, KIND_OSCILLATING, amp, ph)
        self._muscles.append(muscle)
        self._pairs.add(key)
        self._degree[a] += 1
        self._degree[b] += 1
        return True

    def to_spec(self) -> WalkerSpec:
        return WalkerSpec(tuple(self._joints), tuple(self._muscles))


# ---------------------------------------------------------------------------
# validation


def validate(spec: WalkerSpec) -> ValidationReport:
    """Check every structural invariant; report all violations, not just the first."""
    bad: list[tuple[str, str]] = []
    joints = spec.joints
    if len(joints) < 1:
        bad.append(("joint-count", "walker needs at least one joint"))
    for i, j in enumerate(joints):
        if not (math.isfinite(j.x) and math.isfinite(j.y)):
            bad.append(("joint-finite", f"joint {i} has non-finite coordinates"))
        elif abs(j.x) > COORD_BOUND or abs(j.y) > COORD_BOUND:
            bad.append(("joint-bound", f"joint {i} outside |coord| <= {COORD_BOUND:g}"))
    for i in range(len(joints)):
        for k in range(i + 1, len(joints)):
            dx = joints[k].x - joints[i].x
            dy = joints[k].y - joints[i].y
            if dx * dx + dy * dy < D_MIN * D_MIN:
                bad.append(("min-distance", f"joints {i} and {k} closer than {D_MIN}"))
    degree = [0] * len(joints)
    seen: set[tuple[int, int]] = set()
    for mi, m in enumerate(spec.muscles):
        if not (0 <= m.a < len(joints)) or not (0 <= m.b < len(joints)):
            bad.append(("muscle-index", f"muscle {mi} references a missing joint"))
            continue
        if m.a == m.b:
            bad.append(("self-muscle", f"muscle {mi} connects joint {m.a} to itself"))
            continue
        key = (m.a, m.b) if m.a < m.b else (m.b, m.a)
        if key in seen:
            bad.append(("duplicate-muscle", f"muscle {mi} repeats pair {key}"))
        seen.add(key)
        degree[m.a] += 1
        degree[m.b] += 1
        if m.kind == KIND_OSCILLATING:
            if m.amplitude is None or not math.isfinite(m.amplitude) or m.amplitude < 0.0:
                bad.append(("amplitude-range", f"muscle {mi} amplitude {m.amplitude!r}"))
            else:
                cap = AMP_CAP_RATIO * rest_length(joints[m.a], joints[m.b])
                if m.amplitude > cap:
                    bad.append(("amplitude-cap", f"muscle {mi} amplitude {m.amplitude} > {cap}"))
            if m.phase is None or not math.isfinite(m.phase) or not (0.0 <= m.phase < 1.0):
                bad.append(("phase-range", f"muscle {mi} phase {m.phase!r}"))
        elif m.kind == KIND_DISTANCE:
            if m.amplitude is not None or m.phase is not None:
                bad.append(("distance-params", f"muscle {mi} carries oscillation parameters"))
        else:
            bad.append(("muscle-kind", f"muscle {mi} has unknown kind {m.kind!r}"))
    for ji, d in enumerate(degree):
        if d > M_MAX:
            bad.append(("muscle-cap", f"joint {ji} has {d} muscles (cap {M_MAX})"))
    return ValidationReport(ok=not bad, violations=bad)


# ---------------------------------------------------------------------------
# canonical text form


def canonical_serialize(spec: WalkerSpec) -> str:
    muscles: list[list[object]] = []
    for m in spec.muscles:
        if m.kind == KIND_OSCILLATING:
            params: dict[str, object] = {
                "type": KIND_OSCILLATING,
                "amplitude": m.amplitude,
                "phase": m.phase,
            }
        else:
            params = {"type": m.kind}
        muscles.append([m.a, m.b, params])
    doc = {
        "joints": [[j.x, j.y] for j in spec.joints],
        "muscles": muscles,
    }
    return json.dumps(doc)


def _num(value: object, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ParseError(f"expected a number, got {value!r}", where)
    v = float(value)
    if not math.isfinite(v):
        raise ParseError(f"non-finite number {value!r}", where)
    return v


def _index(value: object, where: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ParseError(f"expected an integer joint index, got {value!r}", where)
    return value


def parse(text: str) -> WalkerSpec:
    """Parse canonical JSON or the Python-literal dialect into a WalkerSpec.

    Structural/schema problems raise `ParseError` with a location; semantic
    rules (min distance, caps, ...) are left to `validate` so that malformed
    but well-typed specs can still be inspected.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError:
        try:
            doc = ast.literal_eval(text)
        except (ValueError, SyntaxError, MemoryError, RecursionError) as exc:
            raise ParseError(f"not valid JSON or Python literal: {exc}", "document") from exc
    if not isinstance(doc, dict):
        raise ParseError("top level must be a mapping", "document")
    extra = set(doc) - {"joints", "muscles"}
    if extra:
        raise ParseError(f"unknown top-level keys {sorted(extra)}", "document")
    if "joints" not in doc or "muscles" not in doc:
        raise ParseError("missing 'joints' or 'muscles'", "document")
    raw_joints = doc["joints"]
    raw_muscles = doc["muscles"]
    if not isinstance(raw_joints, (list, tuple)):
        raise ParseError("'joints' must be a sequence", "joints")
    if not isinstance(raw_muscles, (list, tuple)):
        raise ParseError("'muscles' must be a sequence", "muscles")

    joints: list[Joint] = []
    for i, item in enumerate(raw_joints):
        where = f"joints[{i}]"
        if not isinstance(item, (list, tuple)) or len(item) != 2:
            raise ParseError("joint must be a pair [x, y]", where)
        joints.append(Joint(_num(item[0], where), _num(item[1], where)))

    muscles: list[Muscle] = []
    for i, item in enumerate(raw_muscles):
        where = f"muscles[{i}]"
        if not isinstance(item, (list, tuple)) or len(item) != 3:
            raise ParseError("muscle must be [a, b, params]", where)
        a = _index(item[0], where)
        b = _index(item[1], where)
        if not (0 <= a < len(joints)) or not (0 <= b < len(joints)):
            raise ParseError(f"joint index out of range ({a}, {b})", where)
        params = item[2]
        if not isinstance(params, dict):
            raise ParseError("muscle params must be a mapping", where)
        kind = params.get("type")
        if kind == KIND_DISTANCE:
            if set(params) != {"type"}:
                raise ParseError(
                    f"distance muscle allows only 'type', got {sorted(params)}", where
                )
            muscles.append(Muscle(a, b, KIND_DISTANCE))
        elif kind == KIND_OSCILLATING:
            if set(params) != {"type", "amplitude", "phase"}:
                raise ParseError(
                    f"oscillating muscle needs exactly type/amplitude/phase, got {sorted(params)}",
                    where,
                )
            muscles.append(
                Muscle(
                    a,
                    b,
                    KIND_OSCILLATING,
                    _num(params["amplitude"], where + ".amplitude"),
                    _num(params["phase"], where + ".phase"),
                )
            )
        else:
            raise ParseError(f"unknown muscle type {kind!r}", where)
    return WalkerSpec(tuple(joints), tuple(muscles))


def behavior_descriptor(spec: WalkerSpec) -> BehaviorDescriptor:
    """Height/width of the joint bounding box plus total mass (unit mass per joint)."""
    if not spec.joints:
        raise WalkerError("behavior descriptor needs at least one joint")
    xs = [j.x for j in spec.joints]
    ys = [j.y for j in spec.joints]
    return BehaviorDescriptor(
        height=max(ys) - min(ys),
        width=max(xs) - min(xs),
        mass=len(spec.joints) * UNIT_MASS,
    )
