from __future__ import annotations

import json

import pytest

from sodaworker.runtime import build_namespace, run_candidate

OK = "ok"


# ---------------------------------------------------------------------------
# seed programs


def test_square_seed_matches_canonical_fixture(seed_sources, fixtures_dir):
    result = run_candidate(seed_sources["square"])
    assert result["status"] == OK
    expected = (fixtures_dir / "square_canonical.txt").read_text().rstrip("\n")
    assert result["walker"] == expected


def test_all_seed_programs_execute_ok(seed_sources):
    assert len(seed_sources) == 4
    for name, source in seed_sources.items():
        assert run_candidate(source)["status"] == OK, name


def test_radial_seed_joint_and_muscle_counts(seed_sources):
    # The closing rim joint lands within the merge radius of the first one, so
    # its rim muscle becomes a self-muscle (skipped) and its spoke a duplicate
    # (skipped): 7 rim joints + 1 center, 7 rim muscles + 7 spokes.
    doc = json.loads(run_candidate(seed_sources["radial"])["walker"])
    assert len(doc["joints"]) == 8
    assert len(doc["muscles"]) == 14


def _expected_fixed_grid_muscles() -> int:
    """Independent recount of the fixed CPPN seed's muscle set.

    Replays the documented rules only: 8x3 grid, connect where the squared
    index distance is at most 4.5, skip pairs with x1 == y1 and x2 == y2,
    self-pairs and duplicates skipped, ten muscles max per joint.
    """
    index = {}
    for x in range(8):
        for y in range(3):
            index[(x, y)] = len(index)
    degree = [0] * len(index)
    pairs = set()
    count = 0
    for x1 in range(8):
        for y1 in range(3):
            for x2 in range(x1, 8):
                for y2 in range(y1, 3):
                    if x1 == y1 and x2 == y2:
                        continue
                    if (x1 - x2) ** 2 + (y1 - y2) ** 2 > 4.5:
                        continue
                    a, b = index[(x1, y1)], index[(x2, y2)]
                    if a == b:
                        continue
                    key = (min(a, b), max(a, b))
                    if key in pairs:
                        continue
                    if degree[a] >= 10 or degree[b] >= 10:
                        continue
                    pairs.add(key)
                    degree[a] += 1
                    degree[b] += 1
                    count += 1
    return count


def test_fixed_grid_seed_counts_match_independent_recount(seed_sources):
    doc = json.loads(run_candidate(seed_sources["cppn_fixed"])["walker"])
    assert len(doc["joints"]) == 24
    assert len(doc["muscles"]) == _expected_fixed_grid_muscles()


def test_mutable_grid_seed_brings_its_own_query_function(seed_sources):
    # The source shadows the namespace-provided query_cppn with its own copy;
    # both paths must work and agree on the joint grid.
    doc = json.loads(run_candidate(seed_sources["cppn_mutable"])["walker"])
    assert len(doc["joints"]) == 24


# ---------------------------------------------------------------------------
# status mapping


def test_non_walker_product_is_invalid():
    result = run_candidate("def make_walker():\n    return 1\n")
    assert result["status"] == "invalid_walker"
    assert "int" in result["error"]


def test_empty_builder_product_fails_validation():
    result = run_candidate(
        "def make_walker():\n    return walker_creator().get_walker()\n"
    )
    assert result["status"] == "invalid_walker"
    assert "joint-count" in result["error"]


def test_returning_the_creator_itself_is_unwrapped():
    source = (
        "def make_walker():\n"
        "    wc = walker_creator()\n"
        "    wc.add_joint(0, 0)\n"
        "    return wc\n"
    )
    result = run_candidate(source)
    assert result["status"] == OK
    assert json.loads(result["walker"])["joints"] == [[0.0, 0.0]]


def test_syntax_error_status():
    result = run_candidate("def make_walker(:\n")
    assert result["status"] == "syntax_error"
    assert result["error"].startswith("SyntaxError")


def test_missing_entrypoint_is_runtime_error():
    result = run_candidate("x = 1\n")
    assert result["status"] == "runtime_error"
    assert "make_walker" in result["error"]


def test_non_callable_entrypoint_is_runtime_error():
    assert run_candidate("make_walker = 3\n")["status"] == "runtime_error"


def test_custom_entrypoint_name():
    source = (
        "def build():\n"
        "    wc = walker_creator()\n"
        "    wc.add_joint(0, 0)\n"
        "    return wc.get_walker()\n"
    )
    assert run_candidate(source, entrypoint="build")["status"] == OK


def test_entrypoint_with_defaulted_params_qualifies():
    source = (
        "def make_walker(n=3):\n"
        "    wc = walker_creator()\n"
        "    for k in range(n):\n"
        "        wc.add_joint(k, 0)\n"
        "    return wc.get_walker()\n"
    )
    result = run_candidate(source)
    assert result["status"] == OK
    assert len(json.loads(result["walker"])["joints"]) == 3


def test_raising_candidate_is_runtime_error():
    result = run_candidate("def make_walker():\n    raise ValueError('boom')\n")
    assert result["status"] == "runtime_error"
    assert result["error"] == "ValueError: boom"


def test_unbounded_recursion_is_runtime_error():
    source = "def make_walker():\n    return make_walker()\n"
    assert run_candidate(source)["status"] == "runtime_error"


def test_absurd_allocation_is_resource():
    result = run_candidate("def make_walker():\n    return [0] * (10 ** 15)\n")
    assert result["status"] == "resource"


# ---------------------------------------------------------------------------
# namespace restrictions


@pytest.mark.parametrize(
    "probe",
    [
        "def make_walker():\n    return open('/etc/passwd').read()\n",
        "import os\ndef make_walker():\n    return os.listdir('/')\n",
        "def make_walker():\n    import subprocess\n    return 1\n",
        "def make_walker():\n    return __import__('socket')\n",
        "import pathlib\ndef make_walker():\n    return 1\n",
    ],
)
def test_filesystem_and_network_probes_fail(probe):
    assert run_candidate(probe)["status"] == "runtime_error"


def test_math_and_numeric_alias_are_available():
    source = (
        "import math\n"
        "import numpy as np\n"
        "def make_walker():\n"
        "    wc = walker_creator()\n"
        "    wc.add_joint(math.cos(0.0), np.sign(-3))\n"
        "    return wc.get_walker()\n"
    )
    result = run_candidate(source)
    assert result["status"] == OK
    assert json.loads(result["walker"])["joints"] == [[1.0, -1.0]]


def test_print_is_a_silent_sink(capsys):
    source = (
        "def make_walker():\n"
        "    print('chatter')\n"
        "    wc = walker_creator()\n"
        "    wc.add_joint(0, 0)\n"
        "    return wc.get_walker()\n"
    )
    assert run_candidate(source)["status"] == OK
    assert capsys.readouterr().out == ""


def test_namespace_is_fresh_per_run():
    leaky = (
        "leak = 41\n"
        "def make_walker():\n"
        "    wc = walker_creator()\n"
        "    wc.add_joint(0, 0)\n"
        "    return wc.get_walker()\n"
    )
    probe = "def make_walker():\n    return leak\n"
    assert run_candidate(leaky)["status"] == OK
    assert run_candidate(probe)["status"] == "runtime_error"


def test_namespace_exposes_only_the_documented_names():
    ns = build_namespace()
    public = {name for name in ns if not name.startswith("__")}
    assert public == {"walker_creator", "query_cppn", "math", "np"}


def test_query_cppn_via_namespace():
    source = (
        "def make_walker():\n"
        "    wc = walker_creator()\n"
        "    query_cppn(wc, 2, 2, 1.0,\n"
        "               lambda x1, y1, x2, y2: True,\n"
        "               lambda x1, y1, x2, y2: 0.1,\n"
        "               lambda x1, y1, x2, y2: 0.0)\n"
        "    return wc.get_walker()\n"
    )
    doc = json.loads(run_candidate(source)["walker"])
    assert len(doc["joints"]) == 4


def test_query_cppn_single_cell_grid():
    source = (
        "def make_walker():\n"
        "    wc = walker_creator()\n"
        "    query_cppn(wc, 1, 1, 1.0,\n"
        "               lambda x1, y1, x2, y2: True,\n"
        "               lambda x1, y1, x2, y2: 0.1,\n"
        "               lambda x1, y1, x2, y2: 0.0)\n"
        "    return wc.get_walker()\n"
    )
    doc = json.loads(run_candidate(source)["walker"])
    assert len(doc["joints"]) == 1
    assert doc["muscles"] == []


def test_query_cppn_connect_false_adds_no_muscles():
    source = (
        "def make_walker():\n"
        "    wc = walker_creator()\n"
        "    query_cppn(wc, 4, 4, 2.0,\n"
        "               lambda x1, y1, x2, y2: False,\n"
        "               lambda x1, y1, x2, y2: 0.1,\n"
        "               lambda x1, y1, x2, y2: 0.0)\n"
        "    return wc.get_walker()\n"
    )
    doc = json.loads(run_candidate(source)["walker"])
    assert len(doc["joints"]) == 16
    assert doc["muscles"] == []


def test_query_cppn_rejects_empty_grid():
    source = (
        "def make_walker():\n"
        "    wc = walker_creator()\n"
        "    query_cppn(wc, 0, 1, 1.0,\n"
        "               lambda *a: True, lambda *a: 0.0, lambda *a: 0.0)\n"
        "    return wc.get_walker()\n"
    )
    result = run_candidate(source)
    assert result["status"] == "runtime_error"
    assert "ValueError" in result["error"]
