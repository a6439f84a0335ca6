"""Regenerate the shared builder-conformance fixtures.

Each case is a builder call sequence with the expected per-call results and
the canonical serialization of the finished walker, as computed by this
package.  The worker package replays the same sequences through its own
builder and must agree byte for byte.  Run from the repository root:

    python3 scripts/gen_conformance.py
"""
from __future__ import annotations

import json
import random
from pathlib import Path

from elmrace.programs import execute_source, walker_creator

ROOT = Path(__file__).resolve().parent.parent
OUT = ROOT / "fixtures" / "conformance" / "builder_cases.json"
SQUARE_CANONICAL = ROOT / "fixtures" / "square_canonical.txt"


def curated_cases() -> list[tuple[str, list[list]]]:
    cases: list[tuple[str, list[list]]] = []

    cases.append((
        "square-seed-replay",
        [["add_joint", [0, 0]], ["add_joint", [0, 10]], ["add_joint", [10, 10]],
         ["add_joint", [10, 0]], ["add_joint", [5, 5]],
         ["add_muscle", [0, 1]], ["add_muscle", [1, 2]], ["add_muscle", [2, 3]],
         ["add_muscle", [3, 0]], ["add_muscle", [3, 4]],
         ["add_muscle", [0, 4, False, 5.0, 0.0]],
         ["add_muscle", [1, 4, False, 10.0, 0.0]],
         ["add_muscle", [2, 4, False, 2.0, 0.0]]],
    ))
    cases.append((
        "merge-inside-min-distance",
        [["add_joint", [0, 0]], ["add_joint", [0.05, 0.0]], ["add_joint", [0.0, 0.09]],
         ["add_joint", [1, 1]]],
    ))
    cases.append((
        "merge-picks-nearest",
        [["add_joint", [0, 0]], ["add_joint", [1, 0]], ["add_joint", [0.96, 0.0]],
         ["add_joint", [0.04, 0.0]]],
    ))
    cases.append((
        "exactly-at-min-distance-is-new",
        [["add_joint", [0, 0]], ["add_joint", [0.1, 0.0]], ["add_muscle", [0, 1]]],
    ))
    cases.append((
        "duplicate-pair-skipped",
        [["add_joint", [0, 0]], ["add_joint", [3, 4]],
         ["add_muscle", [0, 1]], ["add_muscle", [1, 0]],
         ["add_muscle", [0, 1, False, 1.0, 0.5]]],
    ))
    cases.append((
        "self-muscle-skipped",
        [["add_joint", [0, 0]], ["add_joint", [2, 2]],
         ["add_muscle", [0, 0]], ["add_muscle", [0, 1]], ["add_muscle", [1, 1, False, 1.0, 0.0]]],
    ))
    cases.append((
        "muscle-cap-at-ten",
        [["add_joint", [0, 0]]]
        + [["add_joint", [float(i), 5.0]] for i in range(12)]
        + [["add_muscle", [0, i]] for i in range(1, 13)],
    ))
    cases.append((
        "amplitude-clamps-to-cap",
        [["add_joint", [0, 0]], ["add_joint", [5, 0]],
         ["add_muscle", [0, 1, False, 100.0, 0.0]]],
    ))
    cases.append((
        "amplitude-below-cap-kept",
        [["add_joint", [0, 0]], ["add_joint", [0, 7]],
         ["add_muscle", [0, 1, False, 0.123456789012345, 0.25]]],
    ))
    cases.append((
        "negative-amplitude-floors-to-zero",
        [["add_joint", [0, 0]], ["add_joint", [4, 3]],
         ["add_muscle", [0, 1, False, -3.5, 0.5]]],
    ))
    cases.append((
        "phase-wraps-mod-one",
        [["add_joint", [0, 0]], ["add_joint", [6, 0]],
         ["add_muscle", [0, 1, False, 1.0, 2.75]]],
    ))
    cases.append((
        "negative-phase-wraps-up",
        [["add_joint", [0, 0]], ["add_joint", [0, 6]],
         ["add_muscle", [0, 1, False, 1.0, -0.25]]],
    ))
    cases.append((
        "zero-amplitude-oscillator",
        [["add_joint", [0, 0]], ["add_joint", [2, 0]],
         ["add_muscle", [0, 1, False, 0.0, 0.0]]],
    ))
    cases.append((
        "truthy-flag-means-distance",
        [["add_joint", [0, 0]], ["add_joint", [3, 0]], ["add_joint", [0, 3]],
         ["add_muscle", [0, 1, True, 9.0, 0.5]], ["add_muscle", [0, 2, 1, 2.0, 0.1]]],
    ))
    cases.append((
        "irrational-coordinates-roundtrip",
        [["add_joint", [0.1, 0.2]], ["add_joint", [1.0 / 3.0, 7.0]],
         ["add_joint", [2.0 ** 0.5, 3.0 ** 0.5]],
         ["add_muscle", [0, 2, False, 0.3333333333333333, 0.6666666666666666]]],
    ))
    cases.append((
        "negative-coordinates",
        [["add_joint", [-5, -5]], ["add_joint", [-5, 5]], ["add_joint", [5, 0]],
         ["add_muscle", [0, 1]], ["add_muscle", [1, 2]], ["add_muscle", [2, 0, False, 2.0, 0.9]]],
    ))
    cases.append((
        "phase-just-below-one",
        [["add_joint", [0, 0]], ["add_joint", [8, 0]],
         ["add_muscle", [0, 1, False, 2.0, 0.999999999999]]],
    ))
    cases.append((
        "chain-of-merges-collapses",
        [["add_joint", [0, 0]], ["add_joint", [0.05, 0]], ["add_joint", [0.09, 0]],
         ["add_joint", [10, 10]], ["add_muscle", [0, 1]]],
    ))
    cases.append((
        "single-joint-no-muscles",
        [["add_joint", [4.5, 9.25]]],
    ))
    cases.append((
        "large-coordinates",
        [["add_joint", [100000.0, 0.0]], ["add_joint", [100010.0, 0.0]],
         ["add_muscle", [0, 1, False, 4.0, 0.125]]],
    ))
    return cases


def random_cases(count: int, seed: int = 20260823) -> list[tuple[str, list[list]]]:
    rng = random.Random(seed)
    cases = []
    for ci in range(count):
        calls: list[list] = []
        n_joints = rng.randint(2, 9)
        for _ in range(n_joints):
            calls.append([
                "add_joint",
                [round(rng.uniform(-20, 20), rng.randint(0, 6)),
                 round(rng.uniform(-20, 20), rng.randint(0, 6))],
            ])
        for _ in range(rng.randint(1, 14)):
            a = rng.randrange(n_joints)
            b = rng.randrange(n_joints)
            if rng.random() < 0.5:
                calls.append(["add_muscle", [a, b]])
            else:
                calls.append([
                    "add_muscle",
                    [a, b, False,
                     round(rng.uniform(-1, 8), 4), round(rng.uniform(-2, 3), 4)],
                ])
        cases.append((f"random-{ci:02d}", calls))
    return cases


def replay(calls: list[list]):
    wc = walker_creator()
    results = []
    max_index = -1
    for op, args in calls:
        if op == "add_joint":
            got = wc.add_joint(*args)
            max_index = max(max_index, got)
            results.append(got)
        elif op == "add_muscle":
            a, b = args[0], args[1]
            if not (0 <= a <= max_index and 0 <= b <= max_index):
                raise ValueError(f"case references joint {a},{b} beyond {max_index}")
            results.append(wc.add_muscle(*args))
        else:
            raise ValueError(f"unknown op {op}")
    from elmrace.walker import canonical_serialize

    return results, canonical_serialize(wc.get_walker().spec)


def main() -> None:
    cases = []
    for name, calls in curated_cases() + random_cases(18):
        results, canonical = replay(calls)
        cases.append({
            "name": name,
            "calls": calls,
            "results": results,
            "canonical": canonical,
        })
    doc = {"format": "builder-conformance", "version": 1, "cases": cases}
    OUT.write_text(json.dumps(doc, indent=1) + "\n")
    print(f"wrote {len(cases)} cases to {OUT}")

    square_src = (ROOT / "fixtures" / "seeds" / "square.py").read_text()
    out = execute_source(square_src)
    assert out.ok, out.error
    SQUARE_CANONICAL.write_text(out.walker_text + "\n")
    print(f"wrote {SQUARE_CANONICAL}")


if __name__ == "__main__":
    main()
