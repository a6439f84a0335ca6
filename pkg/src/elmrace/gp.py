"""Expression-tree repair benchmarks: two small programs, graded bug
schedules, random node mutation, and an exact success-probability oracle.

Tasks are fixed-shape binary expression trees (4-bit parity and a quadratic
polynomial) evaluated over an exhaustive integer test suite.  Bugs are label
rewrites; `node_mutate` resamples node labels in place with a per-node rate,
never changing the tree's shape.  Because only labels vary, the space of
mutants is a finite product of per-node alphabets, and the oracle can be
*exact*: it enumerates every label assignment whose semantics match the
reference on the full suite (deduplicating through a probe-environment
dynamic program, then verifying survivors), bins the assignments by how many
terminals/operators differ from the buggy tree, and sums a closed-form
polynomial in the mutation rate.  Arithmetic is totalized with an absorbing
error value (modulo zero, negative exponents, magnitude above 2^20 all
poison the result), so every mutant evaluates and equality against the
reference is unambiguous.
"""
from __future__ import annotations

import ast
import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Iterator, Sequence

import numpy as np

from .diffs import DiffError, apply_diff_text
from .llm import LlmClient, TransportError

ERR = np.int64(2) ** 62          # absorbing error sentinel (well above CAP)
CAP = 2 ** 20                    # |value| beyond this is treated as an error
POW_BUDGET = 20.0                # exponent limit: |base|^e <= 2^POW_BUDGET

TASK_NAMES = ("four_parity", "quadratic")
FIX_COMMIT_MESSAGE = "Fixed bugs."

_ENUM_LIMIT = 2_000_000          # max survivors to enumerate explicitly
_COMBO_LIMIT = 20_000_000        # max (op, left, right) combinations per node


class GpError(Exception):
    pass


class GpParseError(GpError):
    pass


# ---------------------------------------------------------------------------
# trees


@dataclass(frozen=True)
class Node:
    label: str
    children: tuple["Node", ...] = ()

    @property
    def is_leaf(self) -> bool:
        return not self.children


def flatten(tree: Node) -> list[Node]:
    """Preorder node list; defines the node indexing used everywhere."""
    out = [tree]
    for child in tree.children:
        out.extend(flatten(child))
    return out


def tree_labels(tree: Node) -> tuple[str, ...]:
    return tuple(node.label for node in flatten(tree))


def with_labels(template: Node, labels: Sequence[str]) -> Node:
    """Rebuild `template`'s shape with preorder `labels`."""
    it = iter(labels)

    def build(node: Node) -> Node:
        label = next(it)
        return Node(label, tuple(build(c) for c in node.children))

    out = build(template)
    try:
        next(it)
    except StopIteration:
        return out
    raise GpError("label count exceeds node count")


# ---------------------------------------------------------------------------
# totalized arithmetic (scalar and batched routes share the same rules)


def _pow_limit(abs_base: float) -> float:
    return np.floor(POW_BUDGET / np.log2(abs_base))


def apply_op_scalar(op: str, l: int | None, r: int | None) -> int | None:
    if l is None or r is None:
        return None
    if op == "+":
        v = l + r
    elif op == "-":
        v = l - r
    elif op == "*":
        v = l * r
    elif op == "mod":
        if r == 0:
            return None
        v = l % r
    elif op == "pow":
        if r < 0:
            return None
        if abs(l) > 1 and r > _pow_limit(abs(l)):
            return None
        v = l ** r
    else:
        raise GpError(f"unknown operator {op!r}")
    return None if abs(v) > CAP else int(v)


def apply_op_batch(op: str, l: np.ndarray, r: np.ndarray) -> np.ndarray:
    bad = (l == ERR) | (r == ERR)
    if op == "+":
        v = l + r
    elif op == "-":
        v = l - r
    elif op == "*":
        v = l * r
    elif op == "mod":
        bad = bad | (r == 0)
        v = np.mod(l, np.where(r == 0, 1, r))
    elif op == "pow":
        absl = np.abs(l)
        with np.errstate(divide="ignore"):
            limit = np.where(absl > 1, _pow_limit(np.maximum(absl, 2)), np.inf)
        bad = bad | (r < 0) | (r > limit)
        v = np.power(l, np.where(bad, 0, r))
    else:
        raise GpError(f"unknown operator {op!r}")
    return np.where(bad | (np.abs(v) > CAP), ERR, v)


# ---------------------------------------------------------------------------
# tasks


@dataclass(frozen=True)
class Task:
    name: str
    tree: Node                       # reference (correct) tree
    terminals: tuple[str, ...]       # leaf alphabet
    operators: tuple[str, ...]       # internal-node alphabet
    arg_names: tuple[str, ...]       # rendered function signature
    env: dict[str, np.ndarray]       # variable -> column over the suite
    expected: np.ndarray             # reference output over the suite

    @property
    def suite_size(self) -> int:
        return len(self.expected)


def _terminal_column(task: Task, label: str) -> np.ndarray:
    if label in task.env:
        return task.env[label]
    try:
        value = int(label)
    except ValueError:
        raise GpError(f"terminal {label!r} is neither a variable nor an integer")
    return np.full(task.suite_size, value, dtype=np.int64)


def validate_tree(task: Task, tree: Node) -> None:
    for node in flatten(tree):
        if node.is_leaf:
            if node.label not in task.terminals:
                raise GpError(f"leaf label {node.label!r} not in task alphabet")
        else:
            if len(node.children) != 2:
                raise GpError(f"operator {node.label!r} must have exactly 2 children")
            if node.label not in task.operators:
                raise GpError(f"operator label {node.label!r} not in task alphabet")


def evaluate_tree(tree: Node, env: dict[str, int]) -> int | None:
    """Scalar evaluation under one variable binding; None is the error value."""
    if tree.is_leaf:
        if tree.label in env:
            return int(env[tree.label])
        try:
            return int(tree.label)
        except ValueError:
            raise GpError(f"unbound terminal {tree.label!r}")
    l = evaluate_tree(tree.children[0], env)
    r = evaluate_tree(tree.children[1], env)
    return apply_op_scalar(tree.label, l, r)


def evaluate_suite(task: Task, tree: Node) -> np.ndarray:
    """Batched evaluation of one tree over the whole suite (ERR = error)."""
    labels = np.array([[_label_index(task, node) for node in flatten(tree)]])
    return batched_eval(task, labels)[0]


def suite_pass(task: Task, tree: Node) -> bool:
    return bool(np.array_equal(evaluate_suite(task, tree), task.expected))


def build_task(name: str) -> Task:
    if name == "four_parity":
        # (b1 + b2 + b3 + b4) mod 2 over all 16 bit patterns; the c variables
        # are decoys bound to 0 so renamed-variable bugs still evaluate.
        tree = Node("mod", (
            Node("+", (
                Node("+", (
                    Node("+", (Node("b1"), Node("b2"))),
                    Node("b3"))),
                Node("b4"))),
            Node("2")))
        bits = list(itertools.product((0, 1), repeat=4))
        env = {f"b{i+1}": np.array([b[i] for b in bits], dtype=np.int64) for i in range(4)}
        for i in range(4):
            env[f"c{i+1}"] = np.zeros(len(bits), dtype=np.int64)
        expected = (env["b1"] + env["b2"] + env["b3"] + env["b4"]) % 2
        return Task(
            name=name, tree=tree,
            terminals=("b1", "b2", "b3", "b4", "c1", "c2", "c3", "c4", "2", "3"),
            operators=("+", "mod"),
            arg_names=("b1", "b2", "b3", "b4"),
            env=env, expected=expected,
        )
    if name == "quadratic":
        # a*x**2 + b*x + c over the full integer grid {-2..2}^4.
        tree = Node("+", (
            Node("+", (
                Node("*", (Node("a"), Node("pow", (Node("x"), Node("2"))))),
                Node("*", (Node("b"), Node("x"))))),
            Node("c")))
        grid = list(itertools.product((-2, -1, 0, 1, 2), repeat=4))
        cols = {n: np.array([g[i] for g in grid], dtype=np.int64)
                for i, n in enumerate(("a", "b", "c", "x"))}
        expected = cols["a"] * cols["x"] ** 2 + cols["b"] * cols["x"] + cols["c"]
        return Task(
            name=name, tree=tree,
            terminals=("a", "b", "c", "x", "2"),
            operators=("+", "-", "*", "pow"),
            arg_names=("a", "b", "c", "x"),
            env=cols, expected=expected,
        )
    raise GpError(f"unknown task {name!r}; expected one of {TASK_NAMES}")


# ---------------------------------------------------------------------------
# bug schedules


def _inorder_ops(tree: Node) -> list[Node]:
    """Operator nodes in left-to-right textual order (in-order traversal)."""
    if tree.is_leaf:
        return []
    return _inorder_ops(tree.children[0]) + [tree] + _inorder_ops(tree.children[1])


def inject_bugs(task: Task, k: int) -> Node:
    max_k = 5 if task.name == "four_parity" else 2
    if not 0 <= k <= max_k:
        raise GpError(f"{task.name} supports 0..{max_k} bugs, got {k}")
    labels = list(tree_labels(task.tree))
    nodes = flatten(task.tree)
    if task.name == "four_parity":
        # bugs 1..4 rename b1..b4 to c1..c4 in order; bug 5 turns mod 2 into mod 3
        for bug in range(1, min(k, 4) + 1):
            idx = next(i for i, n in enumerate(nodes) if n.label == f"b{bug}")
            labels[idx] = f"c{bug}"
        if k == 5:
            idx = next(i for i, n in enumerate(nodes) if n.label == "2")
            labels[idx] = "3"
    else:
        # bugs flip + to - left to right in the rendered expression
        plus_nodes = [n for n in _inorder_ops(task.tree) if n.label == "+"]
        flipped = set(id(n) for n in plus_nodes[:k])
        labels = [("-" if id(n) in flipped else lab) for lab, n in zip(labels, nodes)]
    return with_labels(task.tree, labels)


# ---------------------------------------------------------------------------
# node mutation


def node_mutate(task: Task, tree: Node, rate: float, rng: np.random.Generator) -> Node:
    """Independently resample each node's label with probability `rate`.

    Replacement is uniform over the same-arity alphabet (terminals for
    leaves, operators for internal nodes), current label included; the
    tree's shape never changes.
    """
    if not 0.0 <= rate <= 1.0:
        raise GpError(f"rate must be in [0, 1], got {rate}")
    labels = []
    for node in flatten(tree):
        alphabet = task.terminals if node.is_leaf else task.operators
        if rng.random() < rate:
            labels.append(alphabet[int(rng.integers(len(alphabet)))])
        else:
            labels.append(node.label)
    return with_labels(tree, labels)


# ---------------------------------------------------------------------------
# batched evaluation over label matrices


def _label_index(task: Task, node: Node) -> int:
    alphabet = task.terminals if node.is_leaf else task.operators
    try:
        return alphabet.index(node.label)
    except ValueError:
        raise GpError(f"label {node.label!r} not in task alphabet")


def _leaf_table(task: Task) -> np.ndarray:
    return np.stack([_terminal_column(task, t) for t in task.terminals])


def batched_eval(task: Task, labels: np.ndarray,
                 env_subset: np.ndarray | None = None) -> np.ndarray:
    """Evaluate many label assignments at once.

    `labels` is (n_assignments, n_nodes) of per-node alphabet indices in
    preorder; the result is (n_assignments, n_envs) with ERR for errors.
    """
    table = _leaf_table(task)
    if env_subset is not None:
        table = table[:, env_subset]
    n_env = table.shape[1]
    nodes = flatten(task.tree)
    if labels.shape[1] != len(nodes):
        raise GpError(f"expected {len(nodes)} label columns, got {labels.shape[1]}")
    cursor = 0

    def walk(node: Node) -> np.ndarray:
        nonlocal cursor
        col = labels[:, cursor]
        cursor += 1
        if node.is_leaf:
            return table[col]
        l = walk(node.children[0])
        r = walk(node.children[1])
        out = np.empty((labels.shape[0], n_env), dtype=np.int64)
        for op_idx, op in enumerate(task.operators):
            rows = np.nonzero(col == op_idx)[0]
            if rows.size:
                out[rows] = apply_op_batch(op, l[rows], r[rows])
        return out

    return walk(task.tree)


# ---------------------------------------------------------------------------
# trial harness


@dataclass
class TrialReport:
    task: str
    operator: str
    k_bugs: int
    n_trials: int
    successes: int
    rate: float | None = None        # mutation rate (node mutation only)
    oracle_rate: float | None = None

    def __post_init__(self) -> None:
        if self.successes > self.n_trials:
            raise GpError("successes cannot exceed n_trials")
        if self.n_trials < 1:
            raise GpError("need at least one trial")

    @property
    def success_rate(self) -> float:
        return self.successes / self.n_trials


def run_trials(task: Task, k_bugs: int, rate: float, n_trials: int,
               rng: np.random.Generator, chunk: int = 20_000) -> TrialReport:
    """Empirical success rate of single-step node mutation on the buggy tree.

    Trials are vectorized in chunks: per node, a Bernoulli(rate) mask picks
    which trials resample that node, uniformly over its alphabet.  Success
    is exact suite equality with the reference.
    """
    if n_trials < 1:
        raise GpError("need at least one trial")
    bugged = inject_bugs(task, k_bugs)
    base = np.array([_label_index(task, n) for n in flatten(bugged)])
    nodes = flatten(task.tree)
    # Screening: agreement on a small environment subset is necessary for a
    # pass, so only the (rare) probe matches get the full-suite evaluation.
    probe = np.unique(np.linspace(0, task.suite_size - 1, min(25, task.suite_size)).astype(int))
    full_probe = len(probe) == task.suite_size
    successes = 0
    done = 0
    while done < n_trials:
        t = min(chunk, n_trials - done)
        labels = np.empty((t, len(nodes)), dtype=np.int64)
        for i, node in enumerate(nodes):
            alphabet = task.terminals if node.is_leaf else task.operators
            mask = rng.random(t) < rate
            draws = rng.integers(0, len(alphabet), size=t)
            labels[:, i] = np.where(mask, draws, base[i])
        near = batched_eval(task, labels, env_subset=probe)
        hits = np.nonzero((near == task.expected[probe]).all(axis=1))[0]
        if full_probe or not hits.size:
            successes += int(hits.size)
        else:
            full = batched_eval(task, labels[hits])
            successes += int((full == task.expected).all(axis=1).sum())
        done += t
    return TrialReport(task=task.name, operator="gp-node", k_bugs=k_bugs,
                       n_trials=n_trials, successes=successes, rate=rate)


# ---------------------------------------------------------------------------
# exact oracle
#
# Step 1 (per task, cached): find every label assignment whose semantics
# equal the reference over the full suite.  A dynamic program over a small
# probe subset of environments groups partial assignments by their semantic
# vector; assignments matching the target on the probe are enumerated by
# walking the DP back-pointers and then verified against the full suite
# (probe agreement is necessary, so no true solution is lost).  Step 2: for
# a given bug count, bin survivors by (changed terminals, changed operators)
# relative to the buggy tree; the success probability is then a closed-form
# sum over that histogram for any mutation rate.

_SOLUTIONS: dict[str, np.ndarray] = {}


def _probe_sets(task: Task) -> Iterator[np.ndarray]:
    n = task.suite_size
    for count in (16, 49, 125, n):
        if count >= n:
            yield np.arange(n)
            return
        yield np.unique(np.linspace(0, n - 1, count).astype(int))


def _solve_task(task: Task) -> np.ndarray:
    """Matrix (n_solutions, n_nodes) of alphabet indices, lexicographically sorted."""
    if task.name in _SOLUTIONS:
        return _SOLUTIONS[task.name]
    nodes = flatten(task.tree)
    reference = np.array([[_label_index(task, n) for n in nodes]])
    for probe in _probe_sets(task):
        survivors = _probe_survivors(task, probe)
        if survivors is None:
            continue                  # too many probe matches; widen the probe
        values = batched_eval(task, survivors)
        keep = (values == task.expected).all(axis=1)
        solutions = survivors[keep]
        order = np.lexsort(solutions.T[::-1])
        solutions = solutions[order]
        if not any((solutions == reference[0]).all(axis=1)):
            raise GpError("oracle lost the reference assignment (internal error)")
        _SOLUTIONS[task.name] = solutions
        return solutions
    raise GpError("probe escalation exhausted without a tractable enumeration")


def _probe_survivors(task: Task, probe: np.ndarray) -> np.ndarray | None:
    table = _leaf_table(task)[:, probe]
    target = evaluate_suite(task, task.tree)[probe]
    target_key = target.tobytes()
    dists: dict[int, dict[bytes, list]] = {}

    # Bottom-up: per node, map semantic vector -> entries that realize it
    # (leaf: label indices; internal: (op index, left key, right key) triples).
    # The root only ever needs the entries matching the target, so those are
    # filtered during construction instead of materializing its full map.
    def build(node: Node) -> dict[bytes, list]:
        for c in node.children:
            build(c)
        if node.is_leaf:
            leaf_out: dict[bytes, list] = {}
            for idx in range(len(task.terminals)):
                leaf_out.setdefault(table[idx].tobytes(), []).append(idx)
            dists[id(node)] = leaf_out
        else:
            left = dists[id(node.children[0])]
            right = dists[id(node.children[1])]
            if len(task.operators) * len(left) * len(right) > _COMBO_LIMIT:
                raise GpError("semantic enumeration exceeded the combination budget")
            at_root = node is task.tree
            left_keys = list(left)
            left_mat = np.frombuffer(b"".join(left_keys), dtype=np.int64)
            left_mat = left_mat.reshape(len(left_keys), -1)
            out: dict[bytes, list] = {}
            for op_idx, op in enumerate(task.operators):
                for rkey in right:
                    rvec = np.frombuffer(rkey, dtype=np.int64)
                    results = apply_op_batch(op, left_mat, rvec[None, :])
                    if at_root:
                        for li in np.nonzero((results == target).all(axis=1))[0]:
                            out.setdefault(target_key, []).append(
                                (op_idx, left_keys[li], rkey))
                    else:
                        for li, row in enumerate(results):
                            out.setdefault(row.tobytes(), []).append(
                                (op_idx, left_keys[li], rkey))
            dists[id(node)] = out
        return dists[id(node)]

    root_dist = build(task.tree)
    if target_key not in root_dist:
        raise GpError("oracle target unreachable (internal error)")

    # Count probe matches before enumerating them.
    counts: dict[tuple[int, bytes], int] = {}

    def count(node: Node, key: bytes) -> int:
        memo_key = (id(node), key)
        if memo_key in counts:
            return counts[memo_key]
        entries = dists[id(node)][key]
        if node.is_leaf:
            total = len(entries)
        else:
            total = 0
            for op_idx, lk, rk in entries:
                total += count(node.children[0], lk) * count(node.children[1], rk)
        counts[memo_key] = total
        return total

    if count(task.tree, target_key) > _ENUM_LIMIT:
        return None

    lists: dict[tuple[int, bytes], list[tuple[int, ...]]] = {}

    def enum(node: Node, key: bytes) -> list[tuple[int, ...]]:
        memo_key = (id(node), key)
        if memo_key in lists:
            return lists[memo_key]
        entries = dists[id(node)][key]
        if node.is_leaf:
            out = [(idx,) for idx in entries]
        else:
            out = []
            for op_idx, lk, rk in entries:
                for ltuple in enum(node.children[0], lk):
                    for rtuple in enum(node.children[1], rk):
                        out.append((op_idx,) + ltuple + rtuple)
        lists[memo_key] = out
        return out

    rows = enum(task.tree, target_key)
    return np.array(rows, dtype=np.int64)


def solution_count(task: Task) -> int:
    """Number of distinct label assignments semantically equal to the reference."""
    return len(_solve_task(task))


def exact_success_prob(task: Task, k_bugs: int, rate: float) -> float:
    """Exact probability that one node_mutate step on the buggy tree passes.

    With per-node independence, an assignment that changes ct terminals and
    co operators from the buggy labels has probability
    (rate/At)^ct * (1-rate+rate/At)^(T-ct) * (rate/Ao)^co * (1-rate+rate/Ao)^(O-co);
    summing over the enumerated solution set gives the result.
    """
    if not 0.0 <= rate <= 1.0:
        raise GpError(f"rate must be in [0, 1], got {rate}")
    solutions = _solve_task(task)
    bugged = np.array([_label_index(task, n) for n in flatten(inject_bugs(task, k_bugs))])
    nodes = flatten(task.tree)
    leaf_cols = np.array([n.is_leaf for n in nodes])
    ct = (solutions[:, leaf_cols] != bugged[leaf_cols]).sum(axis=1)
    co = (solutions[:, ~leaf_cols] != bugged[~leaf_cols]).sum(axis=1)
    a_t, a_o = len(task.terminals), len(task.operators)
    n_t, n_o = int(leaf_cols.sum()), int((~leaf_cols).sum())
    hit_t = rate / a_t                      # resampled and landed on the needed label
    keep_t = (1.0 - rate) + rate / a_t      # untouched, or resampled back to itself
    hit_o = rate / a_o
    keep_o = (1.0 - rate) + rate / a_o
    prob = (np.power(hit_t, ct) * np.power(keep_t, n_t - ct)
            * np.power(hit_o, co) * np.power(keep_o, n_o - co)).sum()
    return float(prob)


DEFAULT_RATE_GRID = tuple(round(0.02 * i, 2) for i in range(1, 26))   # 0.02 .. 0.50


def tune_rate(task: Task, grid: Sequence[float] = DEFAULT_RATE_GRID) -> float:
    """Grid-search the per-node rate maximizing the exact k=1 success probability."""
    best_rate, best_p = None, -1.0
    for rate in grid:
        p = exact_success_prob(task, 1, rate)
        if p > best_p:
            best_rate, best_p = rate, p
    return float(best_rate)


# ---------------------------------------------------------------------------
# rendering and parsing (restricted grammar)

_PRECEDENCE = {"+": 1, "-": 1, "mod": 2, "*": 2, "pow": 3}
_OP_TOKEN = {"+": "+", "-": "-", "*": "*", "mod": "%", "pow": "**"}


def render_expr(tree: Node) -> str:
    if tree.is_leaf:
        return tree.label
    my_prec = _PRECEDENCE[tree.label]
    left, right = tree.children

    def wrap(child: Node, needs: Callable[[int], bool]) -> str:
        text = render_expr(child)
        if not child.is_leaf and needs(_PRECEDENCE[child.label]):
            return f"({text})"
        return text

    # left-assoc for everything except pow (right-assoc, like Python's **)
    if tree.label == "pow":
        l = wrap(left, lambda p: p <= my_prec)
        r = wrap(right, lambda p: p < my_prec)
    else:
        l = wrap(left, lambda p: p < my_prec)
        r = wrap(right, lambda p: p <= my_prec)
    return f"{l} {_OP_TOKEN[tree.label]} {r}"


def _plus_chain(tree: Node) -> list[Node] | None:
    """Leaves of a pure left-associated + chain, or None."""
    if tree.is_leaf:
        return [tree]
    if tree.label != "+":
        return None
    left = _plus_chain(tree.children[0])
    if left is None or not tree.children[1].is_leaf:
        return None
    return left + [tree.children[1]]


def render_source(task: Task, tree: Node | None = None) -> str:
    """Render a tree as function source in the reference program's style."""
    tree = tree if tree is not None else task.tree
    header = f"def {task.name}({', '.join(task.arg_names)}):\n"
    if task.name == "four_parity" and not tree.is_leaf:
        chain = _plus_chain(tree.children[0])
        if chain is not None and len(chain) >= 2 and tree.label in _OP_TOKEN:
            items = ", ".join(n.label for n in chain)
            op = _OP_TOKEN[tree.label]
            rhs = render_expr(tree.children[1])
            return (header
                    + f"    bit_sum = sum([{items}])\n"
                    + f"    return bit_sum {op} {rhs}\n")
    return header + f"    return {render_expr(tree)}\n"


_AST_OPS = {ast.Add: "+", ast.Sub: "-", ast.Mult: "*", ast.Mod: "mod", ast.Pow: "pow"}


def parse_source(task: Task, text: str) -> Node:
    """Parse rendered-style source back into a tree (restricted grammar)."""
    try:
        module = ast.parse(text)
    except SyntaxError as exc:
        raise GpParseError(f"not valid Python: {exc}") from exc
    funcs = [n for n in module.body if isinstance(n, ast.FunctionDef)]
    if len(funcs) != 1:
        raise GpParseError("expected exactly one function definition")
    func = funcs[0]
    assignments: dict[str, ast.expr] = {}
    ret: ast.expr | None = None
    for stmt in func.body:
        if isinstance(stmt, ast.Assign) and len(stmt.targets) == 1 \
                and isinstance(stmt.targets[0], ast.Name):
            assignments[stmt.targets[0].id] = stmt.value
        elif isinstance(stmt, ast.Return) and stmt.value is not None:
            ret = stmt.value
        elif isinstance(stmt, ast.Expr) and isinstance(stmt.value, ast.Constant) \
                and isinstance(stmt.value.value, str):
            continue                                 # docstring
        else:
            raise GpParseError(f"unsupported statement at line {stmt.lineno}")
    if ret is None:
        raise GpParseError("function has no return statement")

    def convert(node: ast.expr) -> Node:
        if isinstance(node, ast.BinOp):
            op_type = type(node.op)
            if op_type not in _AST_OPS:
                raise GpParseError(f"unsupported operator {op_type.__name__}")
            return Node(_AST_OPS[op_type], (convert(node.left), convert(node.right)))
        if isinstance(node, ast.Name):
            if node.id in assignments:
                return convert(assignments[node.id])
            return Node(node.id)
        if isinstance(node, ast.Constant) and isinstance(node.value, int) \
                and not isinstance(node.value, bool):
            return Node(str(node.value))
        if isinstance(node, ast.Call) and isinstance(node.func, ast.Name) \
                and node.func.id == "sum" and len(node.args) == 1 \
                and isinstance(node.args[0], ast.List):
            items = [convert(e) for e in node.args[0].elts]
            if not items:
                raise GpParseError("sum([]) has nothing to add")
            out = items[0]
            for item in items[1:]:
                out = Node("+", (out, item))
            return out
        raise GpParseError(f"unsupported expression {ast.dump(node)[:80]}")

    tree = convert(ret)
    validate_tree(task, tree)
    return tree


# ---------------------------------------------------------------------------
# model-backed repair


def fix_prompt(task: Task, bugged: Node) -> str:
    source = render_source(task, bugged)
    return "# A buggy implementation\n" + source.rstrip("\n") + "\n\n# Fixed bugs\ndef "


def llm_fix(task: Task, k_bugs: int, client: LlmClient, n: int,
            operator: str = "llm-prompt") -> TrialReport:
    """Ask a model to repair the buggy program; unparsable replies count as failures."""
    if operator not in ("llm-prompt", "llm-diff"):
        raise GpError(f"unknown repair operator {operator!r}")
    bugged = inject_bugs(task, k_bugs)
    source = render_source(task, bugged)
    successes = 0
    for _ in range(n):
        try:
            if operator == "llm-prompt":
                completion = client.complete(fix_prompt(task, bugged)).completions[0]
                candidate = "def " + completion.lstrip()
            else:
                completion = client.complete(
                    source.rstrip("\n") + "\n\ncommit message: "
                    + FIX_COMMIT_MESSAGE + "\n\ndiff").completions[0]
                candidate = apply_diff_text(source, completion)
        except (TransportError, DiffError):
            continue
        try:
            tree = parse_source(task, candidate)
        except (GpParseError, GpError):
            continue
        if suite_pass(task, tree):
            successes += 1
    return TrialReport(task=task.name, operator=operator, k_bugs=k_bugs,
                       n_trials=n, successes=successes)
