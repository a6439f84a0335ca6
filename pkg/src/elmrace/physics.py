"""Deterministic 2D mass-spring simulation over piecewise-linear terrain.

Model: joints are unit point masses; every muscle is a spring (Hooke force on
the length error plus velocity damping along the axis).  Oscillating muscles
modulate their rest length as L(t) = L0 + A*sin(2*pi*(t/T + phase)) with the
shared period T; the builder guarantees A <= 0.3*L0 so lengths stay positive.
Integration is semi-implicit Euler at dt/substeps.  Contacts are resolved by
projection with zero restitution by default: ground uses the local segment
normal and a Coulomb friction budget (tangential speed reduced by at most
mu * |normal speed removed|), walls and ceiling clamp one axis and apply the
same friction rule on the other.  Everything is straight-line float64 code in
one jitted kernel, so identical inputs give bit-identical trajectories.

Fitness is |final COM x - initial COM x|.  Non-finite state or speed beyond
v_max flags the result as diverged and zeroes fitness.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .walker import WalkerSpec, behavior_descriptor, validate

TWO_PI = 2.0 * math.pi
_EXTENT = 1.0e6   # flat terrain span; matches the walker coordinate bound


class PhysicsError(Exception):
    pass


class InvalidSpecError(PhysicsError):
    def __init__(self, rules: list[str]) -> None:
        super().__init__(f"spec fails validation: {', '.join(sorted(set(rules)))}")
        self.rules = rules


@dataclass
class TerrainProfile:
    """Ground heightfield + optional walls and ceiling segment."""

    ground_x: np.ndarray          # strictly increasing breakpoints
    ground_y: np.ndarray
    walls: tuple[tuple[float, int], ...] = ()   # (x, dir): +1 solid for x>pos, -1 for x<pos
    ceiling_x: np.ndarray | None = None         # covers [ceiling_x[0], ceiling_x[-1]]
    ceiling_y: np.ndarray | None = None
    start_x: float = 0.0
    kind: str = "custom"

    def __post_init__(self) -> None:
        self.ground_x = np.asarray(self.ground_x, dtype=np.float64)
        self.ground_y = np.asarray(self.ground_y, dtype=np.float64)
        if self.ground_x.ndim != 1 or self.ground_x.shape != self.ground_y.shape:
            raise PhysicsError("ground breakpoints and heights must be 1D and equal length")
        if len(self.ground_x) < 2 or not np.all(np.diff(self.ground_x) > 0):
            raise PhysicsError("ground breakpoints must be strictly increasing")
        if (self.ceiling_x is None) != (self.ceiling_y is None):
            raise PhysicsError("ceiling needs both x and y arrays")
        if self.ceiling_x is not None:
            self.ceiling_x = np.asarray(self.ceiling_x, dtype=np.float64)
            self.ceiling_y = np.asarray(self.ceiling_y, dtype=np.float64)
            if len(self.ceiling_x) < 2 or not np.all(np.diff(self.ceiling_x) > 0):
                raise PhysicsError("ceiling breakpoints must be strictly increasing")
            for cx, cy in zip(self.ceiling_x, self.ceiling_y):
                if cy <= ground_height(self, float(cx)):
                    raise PhysicsError("ceiling must sit strictly above the ground")


@dataclass(frozen=True)
class SimConfig:
    dt: float = 1.0 / 60.0
    duration: float = 10.0
    gravity: float = 9.8
    period: float = 2.0          # shared oscillation period for every muscle
    stiffness: float = 80.0
    damping: float = 4.0
    friction: float = 0.8
    restitution: float = 0.0
    substeps: int = 4
    v_max: float = 1.0e3
    spawn_clearance: float = 0.01

    def __post_init__(self) -> None:
        if self.dt <= 0 or self.duration < self.dt:
            raise PhysicsError("need dt > 0 and duration >= dt")
        if self.period <= 0 or self.substeps < 1:
            raise PhysicsError("need period > 0 and substeps >= 1")

    @property
    def frames(self) -> int:
        return int(round(self.duration / self.dt))


@dataclass(frozen=True)
class SimFlags:
    diverged: bool = False
    fell_through: bool = False
    wall_contact: bool = False


@dataclass
class SimResult:
    fitness: float
    com_trajectory: np.ndarray    # shape (frames+1, 2): COM after each frame, row 0 initial
    flags: SimFlags

    def trajectory_rows(self, dt: float) -> list[tuple[float, float, float]]:
        return [
            (i * dt, float(cx), float(cy))
            for i, (cx, cy) in enumerate(self.com_trajectory)
        ]


@dataclass
class SimState:
    """Explicit integrator state; `step` advances it by one frame."""

    t: float
    x: np.ndarray
    y: np.ndarray
    vx: np.ndarray
    vy: np.ndarray
    muscle_a: np.ndarray
    muscle_b: np.ndarray
    rest: np.ndarray
    amplitude: np.ndarray
    phase: np.ndarray

    def copy(self) -> "SimState":
        return SimState(
            self.t,
            self.x.copy(), self.y.copy(), self.vx.copy(), self.vy.copy(),
            self.muscle_a, self.muscle_b, self.rest, self.amplitude, self.phase,
        )


# ---------------------------------------------------------------------------
# terrain


def make_terrain(kind: str, **params: float) -> TerrainProfile:
    """Build one of the named terrains; unknown keys or bad dimensions raise."""

    def flat_ground() -> tuple[np.ndarray, np.ndarray]:
        return np.array([-_EXTENT, _EXTENT]), np.array([0.0, 0.0])

    def reject_unknown(allowed: set[str]) -> None:
        extra = set(params) - allowed
        if extra:
            raise PhysicsError(f"unknown parameters for terrain {kind!r}: {sorted(extra)}")

    start_x = float(params.pop("start_x", 0.0))
    if kind == "flat":
        reject_unknown(set())
        gx, gy = flat_ground()
        return TerrainProfile(gx, gy, start_x=start_x, kind=kind)
    if kind in ("left_wall", "right_wall"):
        reject_unknown({"wall_dist"})
        d = float(params.get("wall_dist", 15.0))
        if d <= 0:
            raise PhysicsError("wall_dist must be positive")
        gx, gy = flat_ground()
        if kind == "right_wall":
            walls = ((start_x + d, 1),)
        else:
            walls = ((start_x - d, -1),)
        return TerrainProfile(gx, gy, walls=walls, start_x=start_x, kind=kind)
    if kind == "tunnel":
        reject_unknown({"h_tunnel", "tunnel_start", "tunnel_end"})
        h = float(params.get("h_tunnel", 4.0))
        t0 = float(params.get("tunnel_start", start_x + 5.0))
        t1 = float(params.get("tunnel_end", start_x + 25.0))
        if h <= 0 or t1 <= t0:
            raise PhysicsError("tunnel needs h_tunnel > 0 and tunnel_end > tunnel_start")
        gx, gy = flat_ground()
        return TerrainProfile(
            gx, gy,
            ceiling_x=np.array([t0, t1]), ceiling_y=np.array([h, h]),
            start_x=start_x, kind=kind,
        )
    if kind == "bumpy":
        reject_unknown({"amplitude", "wavelength", "span"})
        amp = float(params.get("amplitude", 1.0))
        wavelength = float(params.get("wavelength", 8.0))
        span = float(params.get("span", 400.0))
        if amp <= 0 or wavelength <= 0 or span <= 0:
            raise PhysicsError("bumpy needs positive amplitude, wavelength and span")
        samples_per_wave = 16
        n = max(2, int(span / wavelength * samples_per_wave) + 1)
        gx = np.linspace(start_x - span / 2.0, start_x + span / 2.0, n)
        gy = amp * np.sin(TWO_PI * (gx - start_x) / wavelength)
        return TerrainProfile(gx, gy, start_x=start_x, kind=kind)
    raise PhysicsError(f"unknown terrain kind {kind!r}")


def ground_height(terrain: TerrainProfile, x: float) -> float:
    return float(_interp_clamped(terrain.ground_x, terrain.ground_y, x))


# ---------------------------------------------------------------------------
# jitted kernel


@njit(cache=True)
def _interp_clamped(bx, by, x):
    n = bx.shape[0]
    if x <= bx[0]:
        return by[0]
    if x >= bx[n - 1]:
        return by[n - 1]
    lo = 0
    hi = n - 1
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if bx[mid] <= x:
            lo = mid
        else:
            hi = mid
    f = (x - bx[lo]) / (bx[lo + 1] - bx[lo])
    return by[lo] + f * (by[lo + 1] - by[lo])


@njit(cache=True)
def _ground_tangent(bx, by, x):
    """Unit tangent (pointing +x) of the ground segment under x."""
    n = bx.shape[0]
    if x <= bx[0] or x >= bx[n - 1]:
        return 1.0, 0.0
    lo = 0
    hi = n - 1
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if bx[mid] <= x:
            lo = mid
        else:
            hi = mid
    dx = bx[lo + 1] - bx[lo]
    dy = by[lo + 1] - by[lo]
    d = math.sqrt(dx * dx + dy * dy)
    return dx / d, dy / d


@njit(cache=True)
def _advance(
    x, y, vx, vy, ma, mb, rest, amp, phase,
    t0, nframes,
    dt, substeps, gravity, period, stiffness, damping, friction, restitution, v_max,
    gx, gy, wall_x, wall_dir, has_ceiling, cx, cy,
    com_x, com_y, record_offset,
):
    n = x.shape[0]
    m = ma.shape[0]
    h = dt / substeps
    t = t0
    diverged = False
    fell_through = False
    wall_contact = False
    fx = np.zeros(n)
    fy = np.zeros(n)
    frames_done = 0
    for frame in range(nframes):
        for _ in range(substeps):
            for i in range(n):
                fx[i] = 0.0
                fy[i] = 0.0
            for k in range(m):
                a = ma[k]
                b = mb[k]
                dxv = x[b] - x[a]
                dyv = y[b] - y[a]
                d = math.sqrt(dxv * dxv + dyv * dyv)
                if d < 1.0e-9:
                    continue
                target = rest[k]
                if amp[k] > 0.0:
                    target = rest[k] + amp[k] * math.sin(TWO_PI * (t / period + phase[k]))
                ux = dxv / d
                uy = dyv / d
                rel = (vx[b] - vx[a]) * ux + (vy[b] - vy[a]) * uy
                f = stiffness * (d - target) + damping * rel
                fx[a] += f * ux
                fy[a] += f * uy
                fx[b] -= f * ux
                fy[b] -= f * uy
            for i in range(n):
                vx[i] += fx[i] * h
                vy[i] += (fy[i] - gravity) * h
                x[i] += vx[i] * h
                y[i] += vy[i] * h
            for i in range(n):
                for wi in range(wall_x.shape[0]):
                    if wall_dir[wi] > 0 and x[i] > wall_x[wi]:
                        x[i] = wall_x[wi]
                        wall_contact = True
                        if vx[i] > 0.0:
                            vn = vx[i]
                            vx[i] = -restitution * vn
                            if vy[i] > 0.0:
                                vy[i] = max(0.0, vy[i] - friction * vn)
                            else:
                                vy[i] = min(0.0, vy[i] + friction * vn)
                    elif wall_dir[wi] < 0 and x[i] < wall_x[wi]:
                        x[i] = wall_x[wi]
                        wall_contact = True
                        if vx[i] < 0.0:
                            vn = -vx[i]
                            vx[i] = restitution * vn
                            if vy[i] > 0.0:
                                vy[i] = max(0.0, vy[i] - friction * vn)
                            else:
                                vy[i] = min(0.0, vy[i] + friction * vn)
                gh = _interp_clamped(gx, gy, x[i])
                if y[i] < gh:
                    y[i] = gh
                    tx, ty = _ground_tangent(gx, gy, x[i])
                    nx = -ty
                    ny = tx
                    vn = vx[i] * nx + vy[i] * ny
                    if vn < 0.0:
                        vt = vx[i] * tx + vy[i] * ty
                        budget = friction * (-vn)
                        if vt > 0.0:
                            vt = max(0.0, vt - budget)
                        else:
                            vt = min(0.0, vt + budget)
                        bounce = -restitution * vn
                        vx[i] = vt * tx + bounce * nx
                        vy[i] = vt * ty + bounce * ny
                if has_ceiling and cx[0] <= x[i] <= cx[-1]:
                    ch = _interp_clamped(cx, cy, x[i])
                    if y[i] > ch:
                        y[i] = ch
                        if vy[i] > 0.0:
                            vn = vy[i]
                            vy[i] = -restitution * vn
                            if vx[i] > 0.0:
                                vx[i] = max(0.0, vx[i] - friction * vn)
                            else:
                                vx[i] = min(0.0, vx[i] + friction * vn)
            t += h
        sx = 0.0
        sy = 0.0
        for i in range(n):
            sx += x[i]
            sy += y[i]
            if not (
                math.isfinite(x[i]) and math.isfinite(y[i])
                and math.isfinite(vx[i]) and math.isfinite(vy[i])
            ):
                diverged = True
            elif vx[i] * vx[i] + vy[i] * vy[i] > v_max * v_max:
                diverged = True
            if math.isfinite(x[i]) and y[i] < _interp_clamped(gx, gy, x[i]) - 1.0e-3:
                fell_through = True
        com_x[record_offset + frame] = sx / n
        com_y[record_offset + frame] = sy / n
        frames_done = frame + 1
        if diverged:
            break
    return frames_done, t, diverged, fell_through, wall_contact


# ---------------------------------------------------------------------------
# python-level API


def _spawn_state(spec: WalkerSpec, terrain: TerrainProfile, config: SimConfig) -> SimState:
    xs = np.array([j.x for j in spec.joints], dtype=np.float64)
    ys = np.array([j.y for j in spec.joints], dtype=np.float64)
    # center the bounding box on start_x, rest the lowest joint just above ground
    shift_x = terrain.start_x - (xs.min() + xs.max()) / 2.0
    shift_y = ground_height(terrain, terrain.start_x) + config.spawn_clearance - ys.min()
    xs += shift_x
    ys += shift_y
    m = len(spec.muscles)
    ma = np.zeros(m, dtype=np.int64)
    mb = np.zeros(m, dtype=np.int64)
    rest = np.zeros(m, dtype=np.float64)
    amp = np.zeros(m, dtype=np.float64)
    phase = np.zeros(m, dtype=np.float64)
    for k, muscle in enumerate(spec.muscles):
        ma[k] = muscle.a
        mb[k] = muscle.b
        dx = xs[muscle.b] - xs[muscle.a]
        dy = ys[muscle.b] - ys[muscle.a]
        rest[k] = math.sqrt(dx * dx + dy * dy)
        if muscle.oscillating:
            amp[k] = muscle.amplitude
            phase[k] = muscle.phase
    return SimState(
        0.0, xs, ys, np.zeros_like(xs), np.zeros_like(ys), ma, mb, rest, amp, phase
    )


def _terrain_arrays(terrain: TerrainProfile):
    wall_x = np.array([w[0] for w in terrain.walls], dtype=np.float64)
    wall_dir = np.array([w[1] for w in terrain.walls], dtype=np.int64)
    has_ceiling = terrain.ceiling_x is not None
    cx = terrain.ceiling_x if has_ceiling else np.zeros(2, dtype=np.float64)
    cy = terrain.ceiling_y if has_ceiling else np.zeros(2, dtype=np.float64)
    return wall_x, wall_dir, has_ceiling, cx, cy


def step(state: SimState, terrain: TerrainProfile, config: SimConfig) -> SimState:
    """Advance one dt frame (all substeps); returns a new state, input untouched."""
    out = state.copy()
    wall_x, wall_dir, has_ceiling, cx, cy = _terrain_arrays(terrain)
    com_x = np.zeros(1)
    com_y = np.zeros(1)
    _, t, _, _, _ = _advance(
        out.x, out.y, out.vx, out.vy, out.muscle_a, out.muscle_b,
        out.rest, out.amplitude, out.phase,
        out.t, 1,
        config.dt, config.substeps, config.gravity, config.period,
        config.stiffness, config.damping, config.friction, config.restitution,
        config.v_max,
        terrain.ground_x, terrain.ground_y, wall_x, wall_dir, has_ceiling, cx, cy,
        com_x, com_y, 0,
    )
    out.t = t
    return out


def initial_state(spec: WalkerSpec, terrain: TerrainProfile, config: SimConfig) -> SimState:
    """Spawned state exactly as `simulate` would start from (for step-level tests)."""
    report = validate(spec)
    if not report.ok:
        raise InvalidSpecError([rule for rule, _ in report.violations])
    return _spawn_state(spec, terrain, config)


def simulate(spec: WalkerSpec, terrain: TerrainProfile, config: SimConfig | None = None) -> SimResult:
    config = config or SimConfig()
    report = validate(spec)
    if not report.ok:
        raise InvalidSpecError([rule for rule, _ in report.violations])
    state = _spawn_state(spec, terrain, config)
    frames = config.frames
    com_x = np.zeros(frames + 1)
    com_y = np.zeros(frames + 1)
    com_x[0] = state.x.mean()
    com_y[0] = state.y.mean()
    wall_x, wall_dir, has_ceiling, cx, cy = _terrain_arrays(terrain)
    done, _, diverged, fell_through, wall_contact = _advance(
        state.x, state.y, state.vx, state.vy,
        state.muscle_a, state.muscle_b, state.rest, state.amplitude, state.phase,
        state.t, frames,
        config.dt, config.substeps, config.gravity, config.period,
        config.stiffness, config.damping, config.friction, config.restitution,
        config.v_max,
        terrain.ground_x, terrain.ground_y, wall_x, wall_dir, has_ceiling, cx, cy,
        com_x, com_y, 1,
    )
    trajectory = np.stack([com_x[: done + 1], com_y[: done + 1]], axis=1)
    fitness = 0.0 if diverged else abs(float(com_x[done] - com_x[0]))
    return SimResult(
        fitness=fitness,
        com_trajectory=trajectory,
        flags=SimFlags(diverged, fell_through, wall_contact),
    )


def evaluate(spec: WalkerSpec, terrain: TerrainProfile, config: SimConfig | None = None):
    """(fitness, descriptor); the descriptor comes from the spec as written, not the final pose."""
    result = simulate(spec, terrain, config)
    return result.fitness, behavior_descriptor(spec)
