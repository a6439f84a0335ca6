"""MAP-Elites archive over walker behavior space, with batched evolution.

The map is a dense-bounds, clamp-at-edges grid over (height, width, mass).
Each filled niche keeps its champion genotype, the champion's walker spec,
and the full admission history (every genotype ever admitted with its
fitness) — histories feed dataset distillation later.  All randomness flows
through one numpy Generator stored on the map, and every iteration-order
dependence (parent selection, QD summation, insertion) is pinned to sorted
niche coordinates or candidate index, so runs are reproducible and resumable
bit for bit.

`evolve` runs iterations of `batch_size` candidate slots.  Every slot counts
as one evaluation whether or not the operator produced anything (budget
accounting is exact); per-iteration validity (candidate formed) and
runnability (executor produced a walker) percentages are logged in the
RunLog.  With jobs > 1, physics evaluations fan out to a process pool while
insertion stays in candidate-index order, making parallel runs equal
sequential ones exactly.
"""
from __future__ import annotations

import csv
import enum
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Protocol

import numpy as np

from .physics import PhysicsError, SimConfig, TerrainProfile, evaluate
from .programs import ExecOutcome, InProcessExecutor
from .walker import BehaviorDescriptor, WalkerSpec, canonical_serialize, parse

SNAPSHOT_FORMAT = "walker-map-snapshot"
SNAPSHOT_VERSION = 1


class EngineError(Exception):
    pass


@dataclass(frozen=True)
class GridConfig:
    dims: tuple[int, int, int] = (12, 12, 12)
    bounds: tuple[tuple[float, float], ...] = ((0.0, 30.0), (0.0, 30.0), (0.0, 60.0))

    def __post_init__(self) -> None:
        if len(self.dims) != 3 or len(self.bounds) != 3:
            raise EngineError("grid needs 3 dimensions (height, width, mass)")
        for bins in self.dims:
            if bins < 1:
                raise EngineError("each dimension needs at least 1 bin")
        for lo, hi in self.bounds:
            if not hi > lo:
                raise EngineError("each bound needs max > min")

    @property
    def total_niches(self) -> int:
        return self.dims[0] * self.dims[1] * self.dims[2]


@dataclass
class Genotype:
    source: str
    id: str = ""
    parent_id: str | None = None
    operator: str = "seed"
    commit_message: str | None = None
    generation: int = 0
    diff: str | None = None   # unified diff that produced this source, if any

    def __post_init__(self) -> None:
        if not self.source:
            raise EngineError("genotype source must be non-empty")

    def to_dict(self) -> dict:
        return {
            "source": self.source,
            "id": self.id,
            "parent_id": self.parent_id,
            "operator": self.operator,
            "commit_message": self.commit_message,
            "generation": self.generation,
            "diff": self.diff,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "Genotype":
        return cls(
            source=doc["source"],
            id=doc["id"],
            parent_id=doc.get("parent_id"),
            operator=doc.get("operator", "seed"),
            commit_message=doc.get("commit_message"),
            generation=int(doc.get("generation", 0)),
            diff=doc.get("diff"),
        )


@dataclass
class AdmittedEntry:
    """Registry row for every genotype ever admitted anywhere in the map."""

    genotype: Genotype
    fitness: float
    descriptor: tuple[float, float, float]


@dataclass
class NicheRecord:
    champion: Genotype
    spec: WalkerSpec
    fitness: float
    descriptor: BehaviorDescriptor
    history: list[tuple[str, float]] = field(default_factory=list)


class InsertOutcome(enum.Enum):
    NEW_NICHE = "new_niche"
    IMPROVED = "improved"
    REJECTED = "rejected"


@dataclass
class MapState:
    grid: GridConfig
    cells: dict[tuple[int, int, int], NicheRecord] = field(default_factory=dict)
    evals: int = 0
    rng: np.random.Generator = field(default_factory=lambda: np.random.default_rng(0))
    admitted: dict[str, AdmittedEntry] = field(default_factory=dict)
    next_id: int = 0
    run_id: str = "run0"
    seed_names: list[str] = field(default_factory=list)

    @classmethod
    def create(cls, grid: GridConfig | None = None, seed: int = 0, run_id: str = "run0") -> "MapState":
        return cls(grid=grid or GridConfig(), rng=np.random.default_rng(seed), run_id=run_id)

    def fresh_id(self) -> str:
        gid = f"g{self.next_id:06d}"
        self.next_id += 1
        return gid


@dataclass
class RunLogRow:
    iteration: int
    evals: int
    niches: int
    qd: float
    max_fitness: float
    valid_pct: float
    runnable_pct: float

    def as_list(self) -> list:
        return [self.iteration, self.evals, self.niches, self.qd,
                self.max_fitness, self.valid_pct, self.runnable_pct]


CSV_HEADER = ["iteration", "evals", "niches", "qd", "max_fitness", "valid_pct", "runnable_pct"]


@dataclass
class RunLog:
    rows: list[RunLogRow] = field(default_factory=list)
    outcomes: list[InsertOutcome] = field(default_factory=list)

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(CSV_HEADER)
            for row in self.rows:
                writer.writerow([repr(v) if isinstance(v, float) else v for v in row.as_list()])

    @classmethod
    def from_csv(cls, path: str | Path) -> "RunLog":
        log = cls()
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header != CSV_HEADER:
                raise EngineError(f"unexpected run log header {header}")
            for raw in reader:
                log.rows.append(RunLogRow(
                    int(raw[0]), int(raw[1]), int(raw[2]), float(raw[3]),
                    float(raw[4]), float(raw[5]), float(raw[6]),
                ))
        return log


# ---------------------------------------------------------------------------
# core operations


def niche_index(descriptor: BehaviorDescriptor, grid: GridConfig) -> tuple[int, int, int]:
    coord = []
    for value, bins, (lo, hi) in zip(descriptor.as_tuple(), grid.dims, grid.bounds):
        if not np.isfinite(value):
            raise EngineError(f"descriptor value {value!r} is not finite")
        width = (hi - lo) / bins
        idx = int(np.floor((value - lo) / width))
        coord.append(min(max(idx, 0), bins - 1))
    return tuple(coord)


def try_insert(
    map_state: MapState,
    genotype: Genotype,
    spec: WalkerSpec,
    fitness: float,
    descriptor: BehaviorDescriptor,
) -> InsertOutcome:
    coord = niche_index(descriptor, map_state.grid)
    incumbent = map_state.cells.get(coord)
    if incumbent is None:
        outcome = InsertOutcome.NEW_NICHE
    elif fitness > incumbent.fitness:
        outcome = InsertOutcome.IMPROVED
    elif fitness == incumbent.fitness and len(genotype.source) < len(incumbent.champion.source):
        outcome = InsertOutcome.IMPROVED   # parsimony: same performance, shorter program
    else:
        return InsertOutcome.REJECTED
    if not genotype.id:
        genotype.id = map_state.fresh_id()
    history = [] if incumbent is None else incumbent.history
    history = history + [(genotype.id, fitness)]
    map_state.cells[coord] = NicheRecord(genotype, spec, fitness, descriptor, history)
    map_state.admitted[genotype.id] = AdmittedEntry(genotype, fitness, descriptor.as_tuple())
    return outcome


def select_parent(map_state: MapState, rng: np.random.Generator | None = None) -> Genotype:
    return _select_record(map_state, rng).champion


def _select_record(map_state: MapState, rng: np.random.Generator | None = None) -> NicheRecord:
    if not map_state.cells:
        raise EngineError("cannot select a parent from an empty map")
    rng = rng if rng is not None else map_state.rng
    coords = sorted(map_state.cells)
    return map_state.cells[coords[int(rng.integers(len(coords)))]]


def qd_score(map_state: MapState) -> float:
    return float(sum(map_state.cells[c].fitness for c in sorted(map_state.cells)))


def niches_filled(map_state: MapState) -> int:
    return len(map_state.cells)


def max_fitness(map_state: MapState) -> float:
    if not map_state.cells:
        return 0.0
    return max(rec.fitness for rec in map_state.cells.values())


# ---------------------------------------------------------------------------
# snapshots


def snapshot(map_state: MapState, runlog: RunLog | None = None) -> dict:
    cells = []
    for coord in sorted(map_state.cells):
        rec = map_state.cells[coord]
        cells.append({
            "coord": list(coord),
            "fitness": rec.fitness,
            "descriptor": list(rec.descriptor.as_tuple()),
            "spec": canonical_serialize(rec.spec),
            "champion": rec.champion.to_dict(),
            "history": [[gid, fit] for gid, fit in rec.history],
        })
    admitted = [
        {"id": gid, "fitness": entry.fitness, "descriptor": list(entry.descriptor),
         "genotype": entry.genotype.to_dict()}
        for gid, entry in sorted(map_state.admitted.items())
    ]
    doc = {
        "format": SNAPSHOT_FORMAT,
        "version": SNAPSHOT_VERSION,
        "run_id": map_state.run_id,
        "seed_names": list(map_state.seed_names),
        "grid": {"dims": list(map_state.grid.dims),
                 "bounds": [list(b) for b in map_state.grid.bounds]},
        "evals": map_state.evals,
        "next_id": map_state.next_id,
        "rng_state": map_state.rng.bit_generator.state,
        "cells": cells,
        "admitted": admitted,
    }
    if runlog is not None:
        doc["runlog"] = [row.as_list() for row in runlog.rows]
        doc["outcomes"] = [o.value for o in runlog.outcomes]
    return doc


def save_snapshot(map_state: MapState, path: str | Path, runlog: RunLog | None = None) -> None:
    Path(path).write_text(json.dumps(snapshot(map_state, runlog)) + "\n")


def restore(doc: dict) -> tuple[MapState, RunLog]:
    try:
        if doc.get("format") != SNAPSHOT_FORMAT or doc.get("version") != SNAPSHOT_VERSION:
            raise EngineError(f"not a recognizable snapshot: format={doc.get('format')!r}")
        grid = GridConfig(
            dims=tuple(doc["grid"]["dims"]),
            bounds=tuple(tuple(b) for b in doc["grid"]["bounds"]),
        )
        rng = np.random.default_rng(0)
        rng.bit_generator.state = doc["rng_state"]
        map_state = MapState(
            grid=grid, evals=int(doc["evals"]), rng=rng,
            next_id=int(doc["next_id"]), run_id=doc.get("run_id", "run0"),
            seed_names=list(doc.get("seed_names", [])),
        )
        for cell in doc["cells"]:
            rec = NicheRecord(
                champion=Genotype.from_dict(cell["champion"]),
                spec=parse(cell["spec"]),
                fitness=float(cell["fitness"]),
                descriptor=BehaviorDescriptor(*cell["descriptor"]),
                history=[(gid, float(fit)) for gid, fit in cell["history"]],
            )
            coord = tuple(int(c) for c in cell["coord"])
            if niche_index(rec.descriptor, grid) != coord:
                raise EngineError(f"descriptor/coordinate mismatch at {coord}")
            map_state.cells[coord] = rec
        for entry in doc["admitted"]:
            map_state.admitted[entry["id"]] = AdmittedEntry(
                Genotype.from_dict(entry["genotype"]),
                float(entry["fitness"]),
                tuple(entry["descriptor"]),
            )
        runlog = RunLog()
        for raw in doc.get("runlog", []):
            runlog.rows.append(RunLogRow(
                int(raw[0]), int(raw[1]), int(raw[2]), float(raw[3]),
                float(raw[4]), float(raw[5]), float(raw[6]),
            ))
        runlog.outcomes = [InsertOutcome(v) for v in doc.get("outcomes", [])]
        return map_state, runlog
    except EngineError:
        raise
    except (KeyError, TypeError, ValueError, AttributeError) as exc:
        raise EngineError(f"corrupted snapshot: {exc}") from exc


def load_snapshot(path: str | Path) -> tuple[MapState, RunLog]:
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise EngineError(f"cannot load snapshot {path}: {exc}") from exc
    return restore(doc)


# ---------------------------------------------------------------------------
# evolution loop


class MutationOperator(Protocol):
    name: str

    def propose(
        self,
        parent: Genotype,
        parent_spec: WalkerSpec,
        message: str,
        rng: np.random.Generator,
    ) -> Genotype | None: ...


def seed_map(
    map_state: MapState,
    seeds: Iterable[tuple[str, str]],
    terrain: TerrainProfile,
    sim_config: SimConfig,
    executor=None,
) -> None:
    """Execute and admit the seed programs; failures are hard errors."""
    executor = executor or InProcessExecutor()
    for name, source in seeds:
        outcome: ExecOutcome = executor.run(source)
        if not outcome.ok:
            raise EngineError(f"seed {name!r} failed to execute: {outcome.status} {outcome.error}")
        fitness, descriptor = evaluate(outcome.spec, terrain, sim_config)
        genotype = Genotype(source=source, operator="seed")
        try_insert(map_state, genotype, outcome.spec, fitness, descriptor)
        map_state.seed_names.append(name)
        map_state.evals += 1


def _evaluate_one(args) -> tuple[float, BehaviorDescriptor]:
    spec, terrain, sim_config = args
    return evaluate(spec, terrain, sim_config)


def evolve(
    map_state: MapState,
    operator: MutationOperator,
    terrain: TerrainProfile,
    sim_config: SimConfig,
    iterations: int,
    batch_size: int,
    message_sampler: Callable[[np.random.Generator], str] | None = None,
    executor=None,
    jobs: int = 1,
    runlog: RunLog | None = None,
    on_iteration: Callable[[int, MapState, RunLog], None] | None = None,
) -> RunLog:
    if iterations < 0 or batch_size < 1:
        raise EngineError("need iterations >= 0 and batch_size >= 1")
    if not map_state.cells:
        raise EngineError("evolve needs a seeded map")
    from .mutation import sample_commit_message  # local import; mutation depends on engine types

    sampler = message_sampler or sample_commit_message
    executor = executor or InProcessExecutor()
    runlog = runlog if runlog is not None else RunLog()
    pool = ProcessPoolExecutor(max_workers=jobs) if jobs > 1 else None
    start_iter = runlog.rows[-1].iteration if runlog.rows else 0
    try:
        for it in range(start_iter + 1, start_iter + iterations + 1):
            # 1) sample (parent, message) pairs and let the operator propose
            candidates: list[Genotype | None] = []
            for _ in range(batch_size):
                record = _select_record(map_state)
                message = sampler(map_state.rng)
                candidates.append(
                    operator.propose(record.champion, record.spec, message, map_state.rng)
                )
            valid_ct = sum(1 for c in candidates if c is not None)

            # 2) execute candidate programs to walker specs
            exec_slots = [i for i, c in enumerate(candidates) if c is not None]
            outcomes = executor.run_batch([candidates[i].source for i in exec_slots])
            runnable: list[tuple[int, Genotype, WalkerSpec]] = []
            for slot, outcome in zip(exec_slots, outcomes):
                if outcome.ok:
                    runnable.append((slot, candidates[slot], outcome.spec))
            runnable_ct = len(runnable)

            # 3) score runnable candidates (possibly in parallel)
            tasks = [(spec, terrain, sim_config) for _, _, spec in runnable]
            if pool is not None and tasks:
                scored = list(pool.map(_evaluate_one, tasks, chunksize=8))
            else:
                scored = [_evaluate_one(t) for t in tasks]

            # 4) insert in candidate-index order
            for (slot, genotype, spec), (fitness, descriptor) in zip(runnable, scored):
                try:
                    outcome = try_insert(map_state, genotype, spec, fitness, descriptor)
                except (EngineError, PhysicsError):
                    continue
                runlog.outcomes.append(outcome)

            map_state.evals += batch_size
            runlog.rows.append(RunLogRow(
                iteration=it,
                evals=map_state.evals,
                niches=niches_filled(map_state),
                qd=qd_score(map_state),
                max_fitness=max_fitness(map_state),
                valid_pct=100.0 * valid_ct / batch_size,
                runnable_pct=100.0 * runnable_ct / batch_size,
            ))
            if on_iteration is not None:
                on_iteration(it, map_state, runlog)
    finally:
        if pool is not None:
            pool.shutdown()
    return runlog
