"""Archive distillation: threshold and final-map methods, files, statistics."""
from __future__ import annotations

import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from elmrace.dataset import (
    Admission,
    DatasetError,
    DistilledDataset,
    Example,
    RunArchive,
    archive_from_map,
    dataset_stats,
    filter_archives,
    final_map_distill,
    load_archive,
    load_archives,
    read_dataset,
    split_holdout,
    stats_csv,
    threshold_distill,
    write_dataset,
)
from elmrace.engine import Genotype, GridConfig, MapState, save_snapshot, try_insert
from elmrace.walker import BehaviorDescriptor

from test_engine import square_spec

A, B, C = (0, 0, 0), (1, 1, 1), (2, 2, 2)
DESC = (1.0, 1.0, 1.0)


def history(run_id, coord, fits):
    return [Admission(f"{run_id}-{coord[0]}-{i}", f"src {run_id} {coord} {i}\n", f, DESC)
            for i, f in enumerate(fits)]


def archive(run_id, niches, seed_label="square"):
    return RunArchive(
        run_id=run_id, seed_label=seed_label, grid=GridConfig(),
        histories={coord: history(run_id, coord, fits) for coord, fits in niches.items()},
    )


# ---------------------------------------------------------------------------
# threshold distillation


def test_half_threshold_on_canonical_history():
    ds = threshold_distill([archive("r1", {A: [2.0, 5.0, 10.0]})], 0.5)
    assert [ex.fitness for ex in ds.examples] == [5.0, 10.0]
    assert ds.method == "threshold" and ds.threshold == 0.5


def test_full_threshold_keeps_only_best_with_ties():
    # Equal-fitness re-admissions (shorter program) tie at the top bar.
    arch = RunArchive("r1", "square", GridConfig(), histories={A: [
        Admission("g0", "a long program\n", 2.0, DESC),
        Admission("g1", "long source\n", 5.0, DESC),
        Admission("g2", "short\n", 5.0, DESC),
    ]})
    ds = threshold_distill([arch], 1.0)
    assert [ex.source for ex in ds.examples] == ["long source\n", "short\n"]


def test_bar_is_cross_run():
    runs = [archive("r1", {A: [2.0, 5.0, 10.0]}), archive("r2", {A: [4.0]})]
    ds = threshold_distill(runs, 0.5)
    assert [(ex.run_id, ex.fitness) for ex in ds.examples] == [("r1", 5.0), ("r1", 10.0)]
    assert threshold_distill(runs, 1.0).examples[0].fitness == 10.0
    assert len(threshold_distill(runs, 1.0)) == 1


def test_disjoint_niches_pass_through():
    runs = [archive("r1", {A: [3.0]}), archive("r2", {B: [7.0]})]
    ds = threshold_distill(runs, 0.8)
    assert {(ex.run_id, ex.niche) for ex in ds.examples} == {("r1", A), ("r2", B)}


def test_threshold_bounds():
    runs = [archive("r1", {A: [1.0]})]
    for pct in (0.0, -0.1, 1.2):
        with pytest.raises(DatasetError):
            threshold_distill(runs, pct)
    with pytest.raises(DatasetError):
        threshold_distill([], 0.5)


def archives_strategy():
    fits = st.lists(st.floats(0.1, 100.0), min_size=1, max_size=5).map(sorted)
    niche_hist = st.dictionaries(st.sampled_from([A, B, C, (3, 3, 3)]), fits,
                                 min_size=1, max_size=4)
    return st.lists(niche_hist, min_size=1, max_size=3).map(
        lambda ns: [archive(f"r{i}", n) for i, n in enumerate(ns)])


@settings(max_examples=60, deadline=None)
@given(archives=archives_strategy())
def test_threshold_nesting(archives):
    tight = set(threshold_distill(archives, 0.8).examples)
    loose = set(threshold_distill(archives, 0.5).examples)
    assert tight <= loose


# ---------------------------------------------------------------------------
# final-map distillation


def test_final_map_counts_filled_niches():
    runs = [archive("r1", {A: [1.0, 2.0], B: [4.0]}), archive("r2", {A: [9.0]})]
    ds = final_map_distill(runs)
    assert len(ds) == 3
    assert ds.method == "final-map" and ds.threshold is None
    assert {(ex.run_id, ex.niche, ex.fitness) for ex in ds.examples} == {
        ("r1", A, 2.0), ("r1", B, 4.0), ("r2", A, 9.0)}


def test_single_run_seven_niches():
    seven = {(i, 0, 0): [float(i + 1)] for i in range(7)}
    assert len(final_map_distill([archive("r1", seven)])) == 7


@settings(max_examples=60, deadline=None)
@given(archives=archives_strategy())
def test_final_map_inside_any_threshold_single_run(archives):
    # A run's champions define their own niche bars, so for one archive the
    # final map survives any threshold.  Across runs only the bar-defining
    # (cross-run best) champion per niche is guaranteed to survive.
    final = set(final_map_distill(archives[:1]).examples)
    for pct in (0.5, 1.0):
        assert final <= set(threshold_distill(archives[:1], pct).examples)


@settings(max_examples=60, deadline=None)
@given(archives=archives_strategy())
def test_bar_defining_champions_survive_any_threshold(archives):
    champions = final_map_distill(archives).examples
    best = {}
    for ex in champions:
        if ex.niche not in best or ex.fitness > best[ex.niche].fitness:
            best[ex.niche] = ex
    for pct in (0.5, 1.0):
        kept = set(threshold_distill(archives, pct).examples)
        assert set(best.values()) <= kept


def test_final_map_is_agnostic_to_run_strength():
    # The weak run's champion stays even though it misses the strong run's bar.
    runs = [archive("r1", {A: [100.0]}), archive("r2", {A: [1.0]})]
    assert len(final_map_distill(runs)) == 2


# ---------------------------------------------------------------------------
# archive hygiene


def test_monotone_history_enforced():
    with pytest.raises(DatasetError):
        archive("r1", {A: [5.0, 2.0]})


def test_duplicate_pair_within_run_rejected():
    ex = Example("same\n", 1.0, DESC, "r1", A)
    with pytest.raises(DatasetError):
        DistilledDataset([ex, ex], "threshold", 0.5)


def test_cross_run_duplicates_allowed_and_counted():
    rows = [Example("same\n", 1.0, DESC, "r1", A), Example("same\n", 2.0, DESC, "r2", A)]
    ds = DistilledDataset(rows, "final-map", run_seeds={"r1": "square", "r2": "radial"})
    assert dataset_stats(ds).cross_run_duplicates == 2


def test_filter_archives_by_seed():
    runs = [archive("r1", {A: [1.0]}, seed_label="radial"),
            archive("r2", {A: [1.0]}, seed_label="square")]
    kept = filter_archives(runs, exclude_seeds=("radial",))
    assert [a.run_id for a in kept] == ["r2"]


# ---------------------------------------------------------------------------
# files


def test_write_read_round_trip(tmp_path):
    runs = [archive("r1", {A: [2.0, 5.0], B: [1.0]}), archive("r2", {A: [3.0]})]
    ds = threshold_distill(runs, 0.5)
    path = tmp_path / "ds.jsonl"
    write_dataset(ds, path)
    back = read_dataset(path)
    assert back.examples == ds.examples
    assert (back.method, back.threshold, back.run_seeds) == \
        (ds.method, ds.threshold, ds.run_seeds)


def test_dataset_files_are_byte_deterministic(tmp_path):
    make = lambda: threshold_distill(
        [archive("r2", {A: [3.0]}), archive("r1", {A: [2.0, 5.0]})], 0.5)
    write_dataset(make(), tmp_path / "a.jsonl")
    write_dataset(make(), tmp_path / "b.jsonl")
    assert (tmp_path / "a.jsonl").read_bytes() == (tmp_path / "b.jsonl").read_bytes()


def test_empty_dataset_file_is_header_only(tmp_path):
    ds = DistilledDataset([], "threshold", 0.5)
    path = tmp_path / "empty.jsonl"
    write_dataset(ds, path)
    lines = path.read_text().splitlines()
    assert len(lines) == 1
    header = json.loads(lines[0])
    assert header["format"] == "distilled-dataset" and header["count"] == 0
    assert read_dataset(path).examples == []


def test_truncated_file_rejected(tmp_path):
    ds = final_map_distill([archive("r1", {A: [1.0], B: [2.0]})])
    path = tmp_path / "ds.jsonl"
    write_dataset(ds, path)
    lines = path.read_text().splitlines()
    path.write_text("\n".join(lines[:-1]) + "\n")
    with pytest.raises(DatasetError):
        read_dataset(path)


def test_foreign_file_rejected(tmp_path):
    path = tmp_path / "other.jsonl"
    path.write_text('{"format": "something-else", "version": 1}\n')
    with pytest.raises(DatasetError):
        read_dataset(path)


# ---------------------------------------------------------------------------
# statistics


def test_empty_stats():
    stats = dataset_stats(DistilledDataset([], "threshold", 0.5))
    assert (stats.count, stats.mean_fitness, stats.niche_coverage) == (0, 0.0, 0)
    assert stats.per_seed == {}


def test_stats_values():
    runs = [archive("r1", {A: [2.0], B: [4.0]}, seed_label="square"),
            archive("r2", {A: [6.0]}, seed_label="radial")]
    stats = dataset_stats(final_map_distill(runs))
    assert stats.count == 3
    assert stats.mean_fitness == pytest.approx(4.0)
    assert stats.per_seed == {"square": 2, "radial": 1}
    assert stats.niche_coverage == 2
    assert stats.cross_run_duplicates == 0


def test_stats_csv_layout(tmp_path):
    stats = dataset_stats(final_map_distill([archive("r1", {A: [2.0]})]))
    path = tmp_path / "stats.csv"
    stats_csv(stats, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "metric,value"
    assert lines[1] == "count,1"
    assert any(line.startswith("seed_count:square,") for line in lines)


# ---------------------------------------------------------------------------
# holdout split


def test_holdout_split_sizes_and_determinism():
    rows = [Example(f"s{i}\n", float(i), DESC, "r1", (i, 0, 0)) for i in range(20)]
    ds = DistilledDataset(rows, "final-map")
    train, held = split_holdout(ds, 0.25, seed=7)
    assert (len(train), len(held)) == (15, 5)
    assert sorted(train.examples + held.examples, key=lambda e: e.source) == \
        sorted(rows, key=lambda e: e.source)
    train2, held2 = split_holdout(ds, 0.25, seed=7)
    assert held2.examples == held.examples
    assert split_holdout(ds, 0.0)[1].examples == []
    with pytest.raises(DatasetError):
        split_holdout(ds, 1.0)


# ---------------------------------------------------------------------------
# archives from real maps


def tiny_map(run_id="runA", seed=1):
    ms = MapState.create(seed=seed, run_id=run_id)
    spec = square_spec(10.0)
    for i, fitness in enumerate([1.0, 3.0]):
        g = Genotype(source=f"v = {i}\n", operator="seed")
        try_insert(ms, g, spec, fitness, BehaviorDescriptor(5.0, 5.0, 10.0))
    try_insert(ms, Genotype(source="w = 0\n"), spec, 2.0,
               BehaviorDescriptor(20.0, 5.0, 10.0))
    ms.seed_names.append("square")
    return ms


def test_archive_from_map_histories():
    arch = archive_from_map(tiny_map())
    assert arch.run_id == "runA" and arch.seed_label == "square"
    assert len(arch.histories) == 2
    deep = max(arch.histories.values(), key=len)
    assert [a.fitness for a in deep] == [1.0, 3.0]
    assert deep[0].source == "v = 0\n" and deep[1].source == "v = 1\n"


def test_load_archives_from_snapshot_files(tmp_path):
    for run_id in ("runB", "runA"):
        save_snapshot(tiny_map(run_id), tmp_path / f"{run_id}.json")
    archives = load_archives([tmp_path / "runB.json", tmp_path / "runA.json"])
    assert [a.run_id for a in archives] == ["runA", "runB"]
    ds = final_map_distill(archives)
    assert len(ds) == 4
    assert all(ex.source.startswith(("v", "w")) for ex in ds.examples)


def test_duplicate_run_ids_rejected(tmp_path):
    for name in ("one.json", "two.json"):
        save_snapshot(tiny_map("same"), tmp_path / name)
    with pytest.raises(DatasetError):
        load_archives([tmp_path / "one.json", tmp_path / "two.json"])


def test_load_archive_missing_file(tmp_path):
    with pytest.raises(DatasetError):
        load_archive(tmp_path / "nope.json")
