"""Distill run archives into fine-tuning datasets.

An archive is everything one run ever admitted to its map (loaded from a
map snapshot).  Two distillation methods are provided: threshold keeps every
admission scoring at least ``pct`` of its niche's best fitness across all
runs; final-map keeps only each run's end-of-run champions, with no
cross-run normalization.  Output files are newline-delimited JSON with a
header line, byte-deterministic for identical inputs: archives merge in
run-id order, niches in sorted coordinate order, admissions in history
order.
"""
from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .engine import EngineError, GridConfig, load_snapshot, snapshot as engine_snapshot

DATASET_FORMAT = "distilled-dataset"
DATASET_VERSION = 1
DATASET_FIELDS = ("source", "fitness", "height", "width", "mass", "run", "niche")

Coord = tuple[int, int, int]


class DatasetError(Exception):
    pass


# ---------------------------------------------------------------------------
# archives


@dataclass
class Admission:
    genotype_id: str
    source: str
    fitness: float
    descriptor: tuple[float, float, float]


@dataclass
class RunArchive:
    """Everything one run ever admitted, keyed by niche coordinate."""

    run_id: str
    seed_label: str
    grid: GridConfig
    histories: dict[Coord, list[Admission]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        for coord, history in self.histories.items():
            if not history:
                raise DatasetError(f"archive {self.run_id}: empty history at {coord}")
            fits = [a.fitness for a in history]
            if any(b < a for a, b in zip(fits, fits[1:])):
                raise DatasetError(
                    f"archive {self.run_id}: history at {coord} is not monotone")

    def final(self, coord: Coord) -> Admission:
        return self.histories[coord][-1]


def archive_from_snapshot(doc: dict) -> RunArchive:
    """Build an archive from a map snapshot document."""
    try:
        grid = GridConfig(
            dims=tuple(doc["grid"]["dims"]),
            bounds=tuple(tuple(b) for b in doc["grid"]["bounds"]),
        )
        entries = {
            e["id"]: Admission(
                genotype_id=e["id"],
                source=e["genotype"]["source"],
                fitness=float(e["fitness"]),
                descriptor=tuple(float(v) for v in e["descriptor"]),
            )
            for e in doc["admitted"]
        }
        histories: dict[Coord, list[Admission]] = {}
        for cell in doc["cells"]:
            coord = tuple(int(c) for c in cell["coord"])
            rows = []
            for gid, fitness in cell["history"]:
                if gid not in entries:
                    raise DatasetError(f"history references unknown genotype {gid!r}")
                admission = entries[gid]
                rows.append(Admission(gid, admission.source, float(fitness),
                                      admission.descriptor))
            histories[coord] = rows
        seeds = list(doc.get("seed_names", []))
        seed_label = "+".join(seeds) if seeds else "unknown"
        return RunArchive(run_id=str(doc["run_id"]), seed_label=seed_label,
                          grid=grid, histories=histories)
    except DatasetError:
        raise
    except (KeyError, TypeError, ValueError, EngineError) as exc:
        raise DatasetError(f"cannot build archive from snapshot: {exc}") from exc


def archive_from_map(map_state, runlog=None) -> RunArchive:
    return archive_from_snapshot(engine_snapshot(map_state, runlog))


def load_archive(path: str | Path) -> RunArchive:
    try:
        map_state, _runlog = load_snapshot(path)
    except EngineError as exc:
        raise DatasetError(str(exc)) from exc
    return archive_from_map(map_state)


def load_archives(paths: Sequence[str | Path], jobs: int = 1) -> list[RunArchive]:
    """Load several archives (optionally in parallel) and sort them by run id."""
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            archives = list(pool.map(load_archive, paths))
    else:
        archives = [load_archive(p) for p in paths]
    archives.sort(key=lambda a: a.run_id)
    ids = [a.run_id for a in archives]
    if len(set(ids)) != len(ids):
        raise DatasetError(f"duplicate run ids across archives: {ids}")
    return archives


def filter_archives(archives: Iterable[RunArchive],
                    exclude_seeds: Sequence[str] = ()) -> list[RunArchive]:
    dropped = set(exclude_seeds)
    return [a for a in archives if a.seed_label not in dropped]


# ---------------------------------------------------------------------------
# datasets


@dataclass(frozen=True)
class Example:
    source: str
    fitness: float
    descriptor: tuple[float, float, float]
    run_id: str
    niche: Coord


@dataclass
class DistilledDataset:
    examples: list[Example]
    method: str                      # "threshold" or "final-map"
    threshold: float | None = None
    run_seeds: dict[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        seen: set[tuple[str, str, Coord]] = set()
        for ex in self.examples:
            key = (ex.run_id, ex.source, ex.niche)
            if key in seen:
                raise DatasetError(
                    f"duplicate (source, niche) pair within run {ex.run_id} at {ex.niche}")
            seen.add(key)

    def __len__(self) -> int:
        return len(self.examples)


def _ordered_archives(archives: Sequence[RunArchive]) -> list[RunArchive]:
    if not archives:
        raise DatasetError("need at least one archive")
    return sorted(archives, key=lambda a: a.run_id)


def threshold_distill(archives: Sequence[RunArchive], pct: float) -> DistilledDataset:
    """Keep every admission scoring >= pct of its niche's best across all runs."""
    if not 0.0 < pct <= 1.0:
        raise DatasetError(f"pct must be in (0, 1], got {pct}")
    ordered = _ordered_archives(archives)
    best: dict[Coord, float] = {}
    for archive in ordered:
        for coord, history in archive.histories.items():
            top = history[-1].fitness
            if coord not in best or top > best[coord]:
                best[coord] = top
    examples = []
    for archive in ordered:
        for coord in sorted(archive.histories):
            bar = pct * best[coord]
            for admission in archive.histories[coord]:
                if admission.fitness >= bar:
                    examples.append(Example(admission.source, admission.fitness,
                                            admission.descriptor, archive.run_id, coord))
    return DistilledDataset(examples, "threshold", threshold=pct,
                            run_seeds={a.run_id: a.seed_label for a in ordered})


def final_map_distill(archives: Sequence[RunArchive]) -> DistilledDataset:
    """Keep each run's end-of-run niche champions; no thresholding or normalization."""
    ordered = _ordered_archives(archives)
    examples = []
    for archive in ordered:
        for coord in sorted(archive.histories):
            champion = archive.final(coord)
            examples.append(Example(champion.source, champion.fitness,
                                    champion.descriptor, archive.run_id, coord))
    return DistilledDataset(examples, "final-map",
                            run_seeds={a.run_id: a.seed_label for a in ordered})


def split_holdout(ds: DistilledDataset, fraction: float,
                  seed: int = 0) -> tuple[DistilledDataset, DistilledDataset]:
    """Deterministically split off a holdout slice (floor(fraction * n) examples)."""
    if not 0.0 <= fraction < 1.0:
        raise DatasetError(f"holdout fraction must be in [0, 1), got {fraction}")
    n_holdout = int(fraction * len(ds.examples))
    order = np.random.default_rng(seed).permutation(len(ds.examples))
    held = set(order[:n_holdout].tolist())
    train = [ex for i, ex in enumerate(ds.examples) if i not in held]
    holdout = [ex for i, ex in enumerate(ds.examples) if i in held]
    make = lambda rows: DistilledDataset(rows, ds.method, ds.threshold, dict(ds.run_seeds))
    return make(train), make(holdout)


# ---------------------------------------------------------------------------
# files and statistics


def write_dataset(ds: DistilledDataset, path: str | Path) -> None:
    header = {
        "format": DATASET_FORMAT,
        "version": DATASET_VERSION,
        "method": ds.method,
        "threshold": ds.threshold,
        "fields": list(DATASET_FIELDS),
        "count": len(ds.examples),
        "runs": ds.run_seeds,
    }
    lines = [json.dumps(header, sort_keys=True)]
    for ex in ds.examples:
        record = {
            "source": ex.source,
            "fitness": ex.fitness,
            "height": ex.descriptor[0],
            "width": ex.descriptor[1],
            "mass": ex.descriptor[2],
            "run": ex.run_id,
            "niche": list(ex.niche),
        }
        lines.append(json.dumps(record, sort_keys=True))
    Path(path).write_text("\n".join(lines) + "\n")


def read_dataset(path: str | Path) -> DistilledDataset:
    try:
        lines = Path(path).read_text().splitlines()
        header = json.loads(lines[0])
        if header.get("format") != DATASET_FORMAT or header.get("version") != DATASET_VERSION:
            raise DatasetError(f"not a dataset file: format={header.get('format')!r}")
        if header.get("count") != len(lines) - 1:
            raise DatasetError(
                f"record count mismatch: header says {header.get('count')}, "
                f"found {len(lines) - 1}")
        examples = []
        for line in lines[1:]:
            rec = json.loads(line)
            examples.append(Example(
                source=rec["source"],
                fitness=float(rec["fitness"]),
                descriptor=(float(rec["height"]), float(rec["width"]), float(rec["mass"])),
                run_id=rec["run"],
                niche=tuple(int(c) for c in rec["niche"]),
            ))
        threshold = header.get("threshold")
        return DistilledDataset(
            examples, header["method"],
            threshold=None if threshold is None else float(threshold),
            run_seeds=dict(header.get("runs", {})),
        )
    except DatasetError:
        raise
    except (OSError, IndexError, KeyError, TypeError, ValueError) as exc:
        raise DatasetError(f"cannot read dataset {path}: {exc}") from exc


@dataclass
class DatasetStats:
    count: int
    mean_fitness: float
    per_seed: dict[str, int]
    niche_coverage: int
    cross_run_duplicates: int    # examples whose (source, niche) appears in another run too

    def rows(self) -> list[tuple[str, object]]:
        out: list[tuple[str, object]] = [
            ("count", self.count),
            ("mean_fitness", repr(self.mean_fitness)),
            ("niche_coverage", self.niche_coverage),
            ("cross_run_duplicates", self.cross_run_duplicates),
        ]
        for seed in sorted(self.per_seed):
            out.append((f"seed_count:{seed}", self.per_seed[seed]))
        return out


def dataset_stats(ds: DistilledDataset) -> DatasetStats:
    count = len(ds.examples)
    mean = sum(ex.fitness for ex in ds.examples) / count if count else 0.0
    per_seed: dict[str, int] = {}
    for ex in ds.examples:
        label = ds.run_seeds.get(ex.run_id, ex.run_id)
        per_seed[label] = per_seed.get(label, 0) + 1
    coverage = len({ex.niche for ex in ds.examples})
    pair_counts: dict[tuple[str, Coord], int] = {}
    for ex in ds.examples:
        key = (ex.source, ex.niche)
        pair_counts[key] = pair_counts.get(key, 0) + 1
    duplicates = sum(n for n in pair_counts.values() if n > 1)
    return DatasetStats(count, float(mean), per_seed, coverage, duplicates)


def stats_csv(stats: DatasetStats, path: str | Path) -> None:
    lines = ["metric,value"] + [f"{k},{v}" for k, v in stats.rows()]
    Path(path).write_text("\n".join(lines) + "\n")
