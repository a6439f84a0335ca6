"""Expression-repair benchmark: tasks, bug schedules, mutation, exact oracle."""
from __future__ import annotations

import difflib

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from elmrace.gp import (
    DEFAULT_RATE_GRID,
    GpError,
    GpParseError,
    Node,
    TrialReport,
    apply_op_batch,
    apply_op_scalar,
    batched_eval,
    build_task,
    evaluate_tree,
    exact_success_prob,
    fix_prompt,
    flatten,
    inject_bugs,
    llm_fix,
    node_mutate,
    parse_source,
    render_source,
    run_trials,
    solution_count,
    suite_pass,
    tree_labels,
    tune_rate,
    with_labels,
)
from elmrace.llm import LlmClient, MockTransport

PARITY = build_task("four_parity")
QUAD = build_task("quadratic")
ZEROS = {"c1": 0, "c2": 0, "c3": 0, "c4": 0}


def quiet_client(script):
    return LlmClient(MockTransport(script), retry_delays=(), sleep=lambda s: None)


# ---------------------------------------------------------------------------
# tasks


def test_parity_reference_examples():
    assert evaluate_tree(PARITY.tree, {"b1": 1, "b2": 0, "b3": 1, "b4": 0, **ZEROS}) == 0
    assert evaluate_tree(PARITY.tree, {"b1": 1, "b2": 0, "b3": 0, "b4": 0, **ZEROS}) == 1


def test_quadratic_reference_example():
    assert evaluate_tree(QUAD.tree, {"a": 1, "b": 2, "c": 3, "x": 2}) == 11


def test_references_pass_their_own_suites():
    assert suite_pass(PARITY, PARITY.tree)
    assert suite_pass(QUAD, QUAD.tree)
    assert PARITY.suite_size == 16
    assert QUAD.suite_size == 625


def test_unknown_task_rejected():
    with pytest.raises(GpError):
        build_task("cubic")


# ---------------------------------------------------------------------------
# bug schedules


def test_zero_bugs_is_the_reference():
    assert inject_bugs(PARITY, 0) == PARITY.tree
    assert inject_bugs(QUAD, 0) == QUAD.tree


@pytest.mark.parametrize("k", [1, 2, 3, 4, 5])
def test_parity_bugs_fail_suite(k):
    assert not suite_pass(PARITY, inject_bugs(PARITY, k))


@pytest.mark.parametrize("k", [1, 2])
def test_quadratic_bugs_fail_suite(k):
    assert not suite_pass(QUAD, inject_bugs(QUAD, k))


def test_parity_bug_order_renames_then_modulus():
    assert "sum([c1, c2, b3, b4])" in render_source(PARITY, inject_bugs(PARITY, 2))
    assert "% 2" in render_source(PARITY, inject_bugs(PARITY, 4))
    five = render_source(PARITY, inject_bugs(PARITY, 5))
    assert "sum([c1, c2, c3, c4])" in five and "% 3" in five


def test_quadratic_bug_values():
    k2 = inject_bugs(QUAD, 2)
    assert evaluate_tree(k2, {"a": 1, "b": 2, "c": 3, "x": 2}) == -3
    assert render_source(QUAD, inject_bugs(QUAD, 1)).strip().endswith(
        "return a * x ** 2 - b * x + c")
    assert render_source(QUAD, k2).strip().endswith("return a * x ** 2 - b * x - c")


def test_bug_count_bounds():
    with pytest.raises(GpError):
        inject_bugs(PARITY, 6)
    with pytest.raises(GpError):
        inject_bugs(QUAD, 3)
    with pytest.raises(GpError):
        inject_bugs(QUAD, -1)


# ---------------------------------------------------------------------------
# totalized arithmetic


def test_scalar_error_semantics():
    assert apply_op_scalar("mod", 5, 0) is None
    assert apply_op_scalar("pow", 2, -1) is None
    assert apply_op_scalar("pow", 3, 1000) is None       # magnitude cap
    assert apply_op_scalar("+", None, 1) is None         # errors absorb
    assert apply_op_scalar("pow", 0, 0) == 1
    assert apply_op_scalar("pow", -2, 3) == -8
    assert apply_op_scalar("mod", -7, 3) == 2            # Python sign rules


@settings(max_examples=200, deadline=None)
@given(op=st.sampled_from(["+", "-", "*", "mod", "pow"]),
       l=st.integers(-1050, 1050), r=st.integers(-1050, 1050))
def test_batch_matches_scalar_arithmetic(op, l, r):
    scalar = apply_op_scalar(op, l, r)
    batch = apply_op_batch(op, np.array([l], dtype=np.int64), np.array([r], dtype=np.int64))[0]
    if scalar is None:
        assert batch == np.int64(2) ** 62
    else:
        assert batch == scalar


# ---------------------------------------------------------------------------
# node mutation


def test_rate_zero_is_identity():
    rng = np.random.default_rng(0)
    bugged = inject_bugs(PARITY, 3)
    assert node_mutate(PARITY, bugged, 0.0, rng) == bugged


def test_rate_one_single_terminal_uniform():
    rng = np.random.default_rng(5)
    counts = {t: 0 for t in PARITY.terminals}
    n = 10_000
    for _ in range(n):
        counts[node_mutate(PARITY, Node("b1"), 1.0, rng).label] += 1
    expected = n / len(PARITY.terminals)
    chi2 = sum((c - expected) ** 2 / expected for c in counts.values())
    assert chi2 < 27.88        # chi-square critical value, 9 dof, p = 0.999


def label_strategies(task):
    return st.tuples(*[
        st.sampled_from(task.terminals if node.is_leaf else task.operators)
        for node in flatten(task.tree)
    ])


@settings(max_examples=80, deadline=None)
@given(labels=label_strategies(QUAD), rate=st.floats(0.0, 1.0), seed=st.integers(0, 10**6))
def test_mutation_preserves_shape(labels, rate, seed):
    tree = with_labels(QUAD.tree, labels)
    mutant = node_mutate(QUAD, tree, rate, np.random.default_rng(seed))
    assert [len(n.children) for n in flatten(mutant)] == \
        [len(n.children) for n in flatten(tree)]
    for node in flatten(mutant):
        pool = QUAD.terminals if node.is_leaf else QUAD.operators
        assert node.label in pool


def test_mutation_rate_bounds():
    with pytest.raises(GpError):
        node_mutate(PARITY, PARITY.tree, 1.5, np.random.default_rng(0))


# ---------------------------------------------------------------------------
# trials


def test_trials_zero_bugs_zero_rate_always_pass():
    report = run_trials(PARITY, 0, 0.0, 50, np.random.default_rng(0))
    assert report.success_rate == 1.0
    assert report.operator == "gp-node"


def test_trials_reproducible():
    a = run_trials(PARITY, 1, 0.16, 5000, np.random.default_rng(9))
    b = run_trials(PARITY, 1, 0.16, 5000, np.random.default_rng(9))
    assert a.successes == b.successes


def test_trials_agree_with_oracle():
    rate = 0.16
    report = run_trials(PARITY, 1, rate, 50_000, np.random.default_rng(3))
    p = exact_success_prob(PARITY, 1, rate)
    sigma = (p * (1 - p) / report.n_trials) ** 0.5
    assert abs(report.success_rate - p) < 3 * sigma


def test_trial_report_invariant():
    with pytest.raises(GpError):
        TrialReport(task="four_parity", operator="gp-node", k_bugs=0,
                    n_trials=10, successes=11)


# ---------------------------------------------------------------------------
# exact oracle


def test_oracle_degenerate_rates():
    assert exact_success_prob(PARITY, 0, 0.0) == 1.0
    assert exact_success_prob(QUAD, 0, 0.0) == 1.0
    for k in (1, 2, 3):
        assert exact_success_prob(PARITY, k, 0.0) == 0.0
    assert exact_success_prob(QUAD, 1, 0.0) == 0.0


def test_solution_counts_match_hand_enumeration():
    # Parity: any permutation of b1..b4 in the sum slots (4! = 24), everything
    # else pinned.  Quadratic: a*x^2 realizable 4 ways and b*x 2 ways under
    # the fixed shape, all other nodes pinned -> 8.
    assert solution_count(PARITY) == 24
    assert solution_count(QUAD) == 8


def test_parity_single_fix_lower_bound():
    n_nodes = len(flatten(PARITY.tree))
    a = len(PARITY.terminals)
    for rate in (0.05, 0.1, 0.2, 0.3):
        bound = rate * (1 / a) * (1 - rate) ** (n_nodes - 1)
        assert exact_success_prob(PARITY, 1, rate) >= bound


@pytest.mark.parametrize("rate", [0.05, 0.1, 0.2])
def test_oracle_monotone_in_bug_count(rate):
    parity_probs = [exact_success_prob(PARITY, k, rate) for k in range(6)]
    assert all(x >= y for x, y in zip(parity_probs, parity_probs[1:]))
    quad_probs = [exact_success_prob(QUAD, k, rate) for k in range(3)]
    assert all(x >= y for x, y in zip(quad_probs, quad_probs[1:]))


def test_oracle_matches_brute_force_enumeration():
    # Independent route: enumerate every label assignment of the parity tree
    # outright (1.6M), with no probe DP, and compare both the solution set
    # and a direct per-assignment probability sum against the oracle.
    nodes = flatten(PARITY.tree)
    sizes = [len(PARITY.terminals) if n.is_leaf else len(PARITY.operators) for n in nodes]
    grids = np.meshgrid(*[np.arange(s) for s in sizes], indexing="ij")
    all_labels = np.stack([g.ravel() for g in grids], axis=1)
    hits = []
    for start in range(0, len(all_labels), 200_000):
        chunk = all_labels[start:start + 200_000]
        values = batched_eval(PARITY, chunk)
        hits.append(chunk[(values == PARITY.expected).all(axis=1)])
    brute = np.concatenate(hits)
    brute = brute[np.lexsort(brute.T[::-1])]
    from elmrace.gp import _solve_task
    assert np.array_equal(brute, _solve_task(PARITY))

    rate, k = 0.13, 1
    bugged = np.array([
        (PARITY.terminals if n.is_leaf else PARITY.operators).index(n.label)
        for n in flatten(inject_bugs(PARITY, k))])
    leaf = np.array([n.is_leaf for n in nodes])
    total = 0.0
    for row in brute:
        p = 1.0
        for i in range(len(nodes)):
            a = len(PARITY.terminals) if leaf[i] else len(PARITY.operators)
            p *= (rate / a) if row[i] != bugged[i] else (1 - rate + rate / a)
        total += p
    assert exact_success_prob(PARITY, k, rate) == pytest.approx(total, rel=1e-12)


def test_tuned_rates_come_from_the_grid():
    rp, rq = tune_rate(PARITY), tune_rate(QUAD)
    assert rp in DEFAULT_RATE_GRID and rq in DEFAULT_RATE_GRID
    for rate in DEFAULT_RATE_GRID:
        assert exact_success_prob(PARITY, 1, rate) <= exact_success_prob(PARITY, 1, rp)
        assert exact_success_prob(QUAD, 1, rate) <= exact_success_prob(QUAD, 1, rq)


def test_oracle_rejects_bad_rate():
    with pytest.raises(GpError):
        exact_success_prob(PARITY, 1, 1.5)


# ---------------------------------------------------------------------------
# render / parse


def test_canonical_renders():
    assert render_source(PARITY) == (
        "def four_parity(b1, b2, b3, b4):\n"
        "    bit_sum = sum([b1, b2, b3, b4])\n"
        "    return bit_sum % 2\n")
    assert render_source(QUAD) == (
        "def quadratic(a, b, c, x):\n"
        "    return a * x ** 2 + b * x + c\n")


def test_parse_inverts_render_on_references():
    assert parse_source(PARITY, render_source(PARITY)) == PARITY.tree
    assert parse_source(QUAD, render_source(QUAD)) == QUAD.tree


def test_parse_sum_without_temporary():
    text = "def four_parity(b1, b2, b3, b4):\n    return sum([b1, b2, b3, b4]) % 2\n"
    assert parse_source(PARITY, text) == PARITY.tree


@settings(max_examples=120, deadline=None)
@given(labels=label_strategies(PARITY))
def test_roundtrip_parity_any_labels(labels):
    tree = with_labels(PARITY.tree, labels)
    assert parse_source(PARITY, render_source(PARITY, tree)) == tree


@settings(max_examples=120, deadline=None)
@given(labels=label_strategies(QUAD))
def test_roundtrip_quadratic_any_labels(labels):
    tree = with_labels(QUAD.tree, labels)
    assert parse_source(QUAD, render_source(QUAD, tree)) == tree


@pytest.mark.parametrize("text", [
    "x = 1\n",
    "def f():\n    pass\n\ndef g():\n    pass\n",
    "def f(a):\n    while True:\n        pass\n",
    "def f(a):\n    return a / 2\n",
    "def f(a):\n    return a + 1.5\n",
    "def f(a):\n    return unknown_helper(a)\n",
    "def f(a):\n    return q + 2\n",       # name outside the alphabet
    "not even python (",
])
def test_parse_rejects_foreign_programs(text):
    with pytest.raises(GpError):
        parse_source(QUAD, text)


# ---------------------------------------------------------------------------
# model-backed repair


def test_fix_prompt_shape():
    prompt = fix_prompt(PARITY, inject_bugs(PARITY, 2))
    assert prompt.startswith("# A buggy implementation\n")
    assert "sum([c1, c2, b3, b4])" in prompt
    assert prompt.endswith("# Fixed bugs\ndef ")


def test_llm_fix_prompt_operator_success_and_failure():
    good = render_source(PARITY)[len("def "):]
    client = quiet_client([good, "garbage ((", good])
    report = llm_fix(PARITY, 2, client, 3, operator="llm-prompt")
    assert (report.n_trials, report.successes) == (3, 2)
    assert report.operator == "llm-prompt"
    assert report.success_rate == pytest.approx(2 / 3)


def test_llm_fix_wrong_but_parsable_fix_counts_as_failure():
    wrong = "def four_parity(b1, b2, b3, b4):\n    return sum([b1, b2, b3, b4]) % 3\n"
    client = quiet_client([wrong[len("def "):]])
    report = llm_fix(PARITY, 1, client, 1)
    assert report.successes == 0


def test_llm_fix_diff_operator():
    bugged_src = render_source(QUAD, inject_bugs(QUAD, 1))
    fixed_src = render_source(QUAD)
    diff = "".join(difflib.unified_diff(
        bugged_src.splitlines(keepends=True), fixed_src.splitlines(keepends=True),
        fromfile="a", tofile="b"))
    client = quiet_client([diff, "not a diff"])
    report = llm_fix(QUAD, 1, client, 2, operator="llm-diff")
    assert (report.n_trials, report.successes) == (2, 1)
    prompt = client.transport.calls[0].prompt
    assert "commit message: Fixed bugs." in prompt
    assert prompt.endswith("\n\ndiff")


def test_llm_fix_transport_failure_counts_as_failure():
    report = llm_fix(PARITY, 1, quiet_client([]), 2)
    assert (report.n_trials, report.successes) == (2, 0)


def test_llm_fix_rejects_unknown_operator():
    with pytest.raises(GpError):
        llm_fix(PARITY, 1, quiet_client([]), 1, operator="crossover")


# ---------------------------------------------------------------------------
# misc plumbing


def test_batched_eval_shape_check():
    with pytest.raises(GpError):
        batched_eval(PARITY, np.zeros((1, 3), dtype=np.int64))


def test_tree_labels_and_rebuild():
    labels = tree_labels(QUAD.tree)
    assert len(labels) == 11
    assert with_labels(QUAD.tree, labels) == QUAD.tree
    with pytest.raises(GpError):
        with_labels(QUAD.tree, labels + ("x",))
