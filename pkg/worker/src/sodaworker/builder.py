"""Safety-enforcing walker builder and its canonical text form.

This is an independent implementation of the walker-building contract: the
same merge / dedupe / clamp rules, and byte-identical canonical output, as
the engine that consumes our walker text.  The contract is pinned by the
shared conformance fixtures (builder call sequence -> returned values ->
canonical text); any divergence from the engine's builder is a bug here.

Internally a walker is kept in its canonical document shape — joints as
``[x, y]`` float pairs, muscles as ``[a, b, params]`` triples — so that
serialization is nothing but ``json.dumps`` with default formatting:

    {"joints": [[x, y], ...], "muscles": [[a, b, {"type": ...}], ...]}
"""
from __future__ import annotations

import json
import math

# Safety constants shared with the engine-side builder (world units).
D_MIN = 0.1          # joints closer than this merge into the nearest existing one
M_MAX = 10           # max muscles attached to any single joint
AMP_CAP_RATIO = 0.3  # oscillation amplitude is clamped to this fraction of rest length
COORD_BOUND = 1e6    # |x|, |y| must stay within this

KIND_DISTANCE = "distance"
KIND_OSCILLATING = "muscle"


class BuildError(Exception):
    """A builder call was rejected outright (bad index, self-muscle, bad number)."""


def _finite(value: object, what: str) -> float:
    v = float(value)  # non-numeric input raises here, as the caller's error
    if not math.isfinite(v):
        raise BuildError(f"{what} must be finite, got {value!r}")
    return v


def rest_length(joint_a: list[float], joint_b: list[float]) -> float:
    # Pinned formula: sqrt of explicit squares, so amplitude caps (and thus
    # canonical text) agree bit-for-bit with the engine's builder.
    dx = joint_b[0] - joint_a[0]
    dy = joint_b[1] - joint_a[1]
    return math.sqrt(dx * dx + dy * dy)


class WalkerBuilder:
    """Incremental walker constructor enforcing the structural invariants.

    ``add_joint`` within ``D_MIN`` of an existing joint adds nothing and
    returns the nearest existing index (first index wins distance ties).
    ``add_muscle`` raises ``BuildError`` for self-muscles and bad indices, and
    silently skips (returns False) duplicate undirected pairs and per-joint
    cap overflows.
    """

    def __init__(self) -> None:
        self._joints: list[list[float]] = []
        self._muscles: list[list[object]] = []
        self._pairs: set[tuple[int, int]] = set()
        self._degree: list[int] = []

    def add_joint(self, x: float, y: float) -> int:
        xf = _finite(x, "joint x")
        yf = _finite(y, "joint y")
        if abs(xf) > COORD_BOUND or abs(yf) > COORD_BOUND:
            raise BuildError(f"joint ({xf}, {yf}) outside coordinate bound {COORD_BOUND:g}")
        nearest = -1
        nearest_d2 = D_MIN * D_MIN
        for i, joint in enumerate(self._joints):
            dx = xf - joint[0]
            dy = yf - joint[1]
            d2 = dx * dx + dy * dy
            if d2 < nearest_d2:
                nearest = i
                nearest_d2 = d2
        if nearest >= 0:
            return nearest
        self._joints.append([xf, yf])
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
        pair = (a, b) if a < b else (b, a)
        if pair in self._pairs:
            return False
        if self._degree[a] >= M_MAX or self._degree[b] >= M_MAX:
            return False
        if passive:
            params: dict[str, object] = {"type": KIND_DISTANCE}
        else:
            amp = _finite(amplitude, "amplitude")
            ph = _finite(phase, "phase")
            cap = AMP_CAP_RATIO * rest_length(self._joints[a], self._joints[b])
            amp = min(max(amp, 0.0), cap)
            ph = ph % 1.0
            if ph >= 1.0:  # float modulo of a tiny negative can round to 1.0
                ph = 0.0
            params = {"type": KIND_OSCILLATING, "amplitude": amp, "phase": ph}
        self._muscles.append([a, b, params])
        self._pairs.add(pair)
        self._degree[a] += 1
        self._degree[b] += 1
        return True

    def doc(self) -> dict:
        """Canonical document: deep-copied, safe to hold across further calls."""
        return {
            "joints": [list(j) for j in self._joints],
            "muscles": [[m[0], m[1], dict(m[2])] for m in self._muscles],
        }


def canonical_text(doc: dict) -> str:
    """Single-line canonical JSON; key order is fixed by construction."""
    return json.dumps(doc)


# ---------------------------------------------------------------------------
# validation


def validate_doc(doc: dict) -> list[tuple[str, str]]:
    """All rule violations as (rule name, detail); empty means valid.

    Rule names match the engine's validator so invalid_walker error text is
    comparable across components.
    """
    bad: list[tuple[str, str]] = []
    joints = doc.get("joints", [])
    muscles = doc.get("muscles", [])
    if len(joints) < 1:
        bad.append(("joint-count", "walker needs at least one joint"))
    for i, joint in enumerate(joints):
        x, y = joint
        if not (math.isfinite(x) and math.isfinite(y)):
            bad.append(("joint-finite", f"joint {i} has non-finite coordinates"))
        elif abs(x) > COORD_BOUND or abs(y) > COORD_BOUND:
            bad.append(("joint-bound", f"joint {i} outside |coord| <= {COORD_BOUND:g}"))
    for i in range(len(joints)):
        for k in range(i + 1, len(joints)):
            dx = joints[k][0] - joints[i][0]
            dy = joints[k][1] - joints[i][1]
            if dx * dx + dy * dy < D_MIN * D_MIN:
                bad.append(("min-distance", f"joints {i} and {k} closer than {D_MIN}"))
    degree = [0] * len(joints)
    seen: set[tuple[int, int]] = set()
    for mi, muscle in enumerate(muscles):
        a, b, params = muscle
        if not (0 <= a < len(joints)) or not (0 <= b < len(joints)):
            bad.append(("muscle-index", f"muscle {mi} references a missing joint"))
            continue
        if a == b:
            bad.append(("self-muscle", f"muscle {mi} connects joint {a} to itself"))
            continue
        pair = (a, b) if a < b else (b, a)
        if pair in seen:
            bad.append(("duplicate-muscle", f"muscle {mi} repeats pair {pair}"))
        seen.add(pair)
        degree[a] += 1
        degree[b] += 1
        kind = params.get("type")
        amplitude = params.get("amplitude")
        phase = params.get("phase")
        if kind == KIND_OSCILLATING:
            if amplitude is None or not math.isfinite(amplitude) or amplitude < 0.0:
                bad.append(("amplitude-range", f"muscle {mi} amplitude {amplitude!r}"))
            else:
                cap = AMP_CAP_RATIO * rest_length(joints[a], joints[b])
                if amplitude > cap:
                    bad.append(("amplitude-cap", f"muscle {mi} amplitude {amplitude} > {cap}"))
            if phase is None or not math.isfinite(phase) or not (0.0 <= phase < 1.0):
                bad.append(("phase-range", f"muscle {mi} phase {phase!r}"))
        elif kind == KIND_DISTANCE:
            if amplitude is not None or phase is not None:
                bad.append(("distance-params", f"muscle {mi} carries oscillation parameters"))
        else:
            bad.append(("muscle-kind", f"muscle {mi} has unknown kind {kind!r}"))
    for ji, d in enumerate(degree):
        if d > M_MAX:
            bad.append(("muscle-cap", f"joint {ji} has {d} muscles (cap {M_MAX})"))
    return bad
