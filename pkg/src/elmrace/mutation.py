"""Mutation operators: language-model diffs, prompt regeneration, and
direct structural perturbation of walker specs.

The two model-backed operators share a deliberately plain prompt shape —
the parent program followed by a short commit message, asking for a diff,
or the parent program truncated at its entrypoint definition, asking for a
fresh body.  Commit messages come from a small weighted catalog.  All three
operators implement the same `propose` interface the evolution loop calls;
they return a child Genotype or None when nothing usable came back, and the
loop charges the evaluation budget either way.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import json

import numpy as np

from .diffs import DiffError, apply_diff_text
from .engine import EngineError, Genotype, MapState
from .llm import DEFAULT_MAX_TOKENS, DEFAULT_TEMPERATURE, LlmClient, TransportError
from .programs import DEFAULT_ENTRYPOINT, render_program
from .walker import (
    AMP_CAP_RATIO,
    KIND_DISTANCE,
    KIND_OSCILLATING,
    Joint,
    Muscle,
    WalkerSpec,
    rest_length,
    validate,
)

WEIGHT_TOLERANCE = 1e-9


@dataclass(frozen=True)
class CommitMessage:
    text: str
    weight: float


DEFAULT_COMMIT_MESSAGES: tuple[CommitMessage, ...] = (
    CommitMessage("Changed make_walker function.", 0.40),
    CommitMessage("Changed parameters in make_walker function.", 0.30),
    CommitMessage("Small change to make_walker function.", 0.30),
)


def sample_commit_message(
    rng: np.random.Generator,
    catalog: Sequence[CommitMessage] = DEFAULT_COMMIT_MESSAGES,
) -> str:
    if not catalog:
        raise ValueError("commit message catalog is empty")
    total = sum(m.weight for m in catalog)
    if abs(total - 1.0) > WEIGHT_TOLERANCE:
        raise ValueError(f"commit message weights sum to {total}, expected 1.0")
    u = float(rng.random())
    acc = 0.0
    for message in catalog:
        acc += message.weight
        if u < acc:
            return message.text
    return catalog[-1].text


# ---------------------------------------------------------------------------
# prompts


def diff_prompt(source: str, message: str) -> str:
    """Parent program plus a commit message, asking the model for a diff."""
    return source.rstrip("\n") + "\n\ncommit message: " + message + "\n\ndiff"


def completion_prompt(source: str, entrypoint: str = DEFAULT_ENTRYPOINT) -> str | None:
    """Truncate the program at its (last, top-level) entrypoint definition.

    The returned prompt ends with a bare ``def {entrypoint}():`` line; the
    model's completion becomes the new body, grafted onto everything above
    the definition.  Returns None when the source never defines the
    entrypoint at top level.
    """
    lines = source.split("\n")
    needle = f"def {entrypoint}("
    cut = None
    for i, line in enumerate(lines):
        if line.startswith(needle):
            cut = i
    if cut is None:
        return None
    prefix = "\n".join(lines[:cut])
    head = prefix.rstrip("\n") + "\n\n" if prefix.strip() else ""
    return head + f"def {entrypoint}():"


# ---------------------------------------------------------------------------
# model-backed operators


def llm_diff_mutate(
    parent: Genotype,
    rng: np.random.Generator,
    client: LlmClient,
    k: int = 1,
    message: str | None = None,
    temperature: float = DEFAULT_TEMPERATURE,
    max_tokens: int = DEFAULT_MAX_TOKENS,
) -> list[Genotype]:
    """Ask for k diff completions against the parent; keep the ones that apply.

    Transport failure (after the client's own retries) yields an empty list;
    completions that fail to parse or apply as unified diffs are dropped.
    """
    if message is None:
        message = sample_commit_message(rng)
    prompt = diff_prompt(parent.source, message)
    try:
        response = client.complete(prompt, n=k, temperature=temperature, max_tokens=max_tokens)
    except TransportError:
        return []
    children = []
    for text in response.completions:
        try:
            new_source = apply_diff_text(parent.source, text)
        except DiffError:
            continue
        children.append(Genotype(
            source=new_source,
            parent_id=parent.id,
            operator="llm-diff",
            commit_message=message,
            generation=parent.generation + 1,
            diff=text,
        ))
    return children


class LlmDiffOperator:
    name = "llm-diff"

    def __init__(self, client: LlmClient,
                 temperature: float = DEFAULT_TEMPERATURE,
                 max_tokens: int = DEFAULT_MAX_TOKENS) -> None:
        self.client = client
        self.temperature = temperature
        self.max_tokens = max_tokens

    def propose(self, parent: Genotype, parent_spec: WalkerSpec, message: str,
                rng: np.random.Generator) -> Genotype | None:
        children = llm_diff_mutate(
            parent, rng, self.client, k=1, message=message,
            temperature=self.temperature, max_tokens=self.max_tokens,
        )
        return children[0] if children else None


class LlmPromptOperator:
    """Regenerate the entrypoint body from scratch, keeping helper code."""

    name = "llm-prompt"

    def __init__(self, client: LlmClient,
                 temperature: float = DEFAULT_TEMPERATURE,
                 max_tokens: int = DEFAULT_MAX_TOKENS,
                 entrypoint: str = DEFAULT_ENTRYPOINT) -> None:
        self.client = client
        self.temperature = temperature
        self.max_tokens = max_tokens
        self.entrypoint = entrypoint

    def propose(self, parent: Genotype, parent_spec: WalkerSpec, message: str,
                rng: np.random.Generator) -> Genotype | None:
        prompt = completion_prompt(parent.source, self.entrypoint)
        if prompt is None:
            return None
        try:
            response = self.client.complete(
                prompt, n=1, temperature=self.temperature, max_tokens=self.max_tokens)
        except TransportError:
            return None
        completion = response.completions[0]
        if not completion.strip():
            return None
        source = prompt + completion
        if not source.endswith("\n"):
            source += "\n"
        return Genotype(
            source=source,
            parent_id=parent.id,
            operator=self.name,
            generation=parent.generation + 1,
        )


# ---------------------------------------------------------------------------
# spec-level structural mutation (no model involved)

SPEC_MUTATION_KINDS = ("jitter", "add-joint", "remove-joint", "perturb-muscle", "toggle-kind")

JITTER_SIGMA = 0.5
ADD_JOINT_SIGMA = 3.0
AMP_SIGMA = 0.5
PHASE_SIGMA = 0.1
MAX_ATTEMPTS = 10


def _jitter(spec: WalkerSpec, rng: np.random.Generator) -> WalkerSpec | None:
    if not spec.joints:
        return None
    i = int(rng.integers(len(spec.joints)))
    dx, dy = rng.normal(0.0, JITTER_SIGMA, size=2)
    joints = list(spec.joints)
    joints[i] = Joint(joints[i].x + float(dx), joints[i].y + float(dy))
    return WalkerSpec(tuple(joints), spec.muscles)


def _add_joint(spec: WalkerSpec, rng: np.random.Generator) -> WalkerSpec | None:
    if not spec.joints:
        return None
    anchor = spec.joints[int(rng.integers(len(spec.joints)))]
    dx, dy = rng.normal(0.0, ADD_JOINT_SIGMA, size=2)
    new_joint = Joint(anchor.x + float(dx), anchor.y + float(dy))
    joints = spec.joints + (new_joint,)
    new_idx = len(spec.joints)
    n_links = min(2, len(spec.joints))
    targets = rng.choice(len(spec.joints), size=n_links, replace=False)
    muscles = list(spec.muscles)
    for target in sorted(int(t) for t in targets):
        if rng.random() < 0.5:
            muscles.append(Muscle(new_idx, target, KIND_DISTANCE))
        else:
            cap = AMP_CAP_RATIO * rest_length(new_joint, joints[target])
            amp = float(rng.uniform(0.0, cap))
            phase = float(rng.random())
            muscles.append(Muscle(new_idx, target, KIND_OSCILLATING, amp, phase))
    return WalkerSpec(joints, tuple(muscles))


def _remove_joint(spec: WalkerSpec, rng: np.random.Generator) -> WalkerSpec | None:
    if len(spec.joints) <= 1:
        return None
    i = int(rng.integers(len(spec.joints)))
    joints = tuple(j for k, j in enumerate(spec.joints) if k != i)
    muscles = []
    for m in spec.muscles:
        if m.a == i or m.b == i:
            continue
        a = m.a - 1 if m.a > i else m.a
        b = m.b - 1 if m.b > i else m.b
        muscles.append(Muscle(a, b, m.kind, m.amplitude, m.phase))
    return WalkerSpec(joints, tuple(muscles))


def _perturb_muscle(spec: WalkerSpec, rng: np.random.Generator) -> WalkerSpec | None:
    oscillating = [i for i, m in enumerate(spec.muscles) if m.oscillating]
    if not oscillating:
        return None
    mi = oscillating[int(rng.integers(len(oscillating)))]
    m = spec.muscles[mi]
    cap = AMP_CAP_RATIO * rest_length(spec.joints[m.a], spec.joints[m.b])
    amp = min(max(m.amplitude + float(rng.normal(0.0, AMP_SIGMA)), 0.0), cap)
    phase = (m.phase + float(rng.normal(0.0, PHASE_SIGMA))) % 1.0
    if phase >= 1.0:
        phase = 0.0
    muscles = list(spec.muscles)
    muscles[mi] = Muscle(m.a, m.b, KIND_OSCILLATING, amp, phase)
    return WalkerSpec(spec.joints, tuple(muscles))


def _toggle_kind(spec: WalkerSpec, rng: np.random.Generator) -> WalkerSpec | None:
    if not spec.muscles:
        return None
    mi = int(rng.integers(len(spec.muscles)))
    m = spec.muscles[mi]
    muscles = list(spec.muscles)
    if m.oscillating:
        muscles[mi] = Muscle(m.a, m.b, KIND_DISTANCE)
    else:
        cap = AMP_CAP_RATIO * rest_length(spec.joints[m.a], spec.joints[m.b])
        amp = float(rng.uniform(0.0, cap))
        phase = float(rng.random())
        muscles[mi] = Muscle(m.a, m.b, KIND_OSCILLATING, amp, phase)
    return WalkerSpec(spec.joints, tuple(muscles))


_SPEC_MUTATORS: dict[str, Callable] = {
    "jitter": _jitter,
    "add-joint": _add_joint,
    "remove-joint": _remove_joint,
    "perturb-muscle": _perturb_muscle,
    "toggle-kind": _toggle_kind,
}


def spec_mutate(spec: WalkerSpec, rng: np.random.Generator,
                max_attempts: int = MAX_ATTEMPTS) -> WalkerSpec:
    """Apply one structural mutation, re-picking until the result validates.

    After `max_attempts` failed draws the parent spec comes back unchanged;
    the caller still spends a budget slot on it.
    """
    for _ in range(max_attempts):
        kind = SPEC_MUTATION_KINDS[int(rng.integers(len(SPEC_MUTATION_KINDS)))]
        candidate = _SPEC_MUTATORS[kind](spec, rng)
        if candidate is not None and validate(candidate).ok:
            return candidate
    return spec


class SpecMutationOperator:
    name = "spec"

    def propose(self, parent: Genotype, parent_spec: WalkerSpec, message: str,
                rng: np.random.Generator) -> Genotype | None:
        child_spec = spec_mutate(parent_spec, rng)
        return Genotype(
            source=render_program(child_spec),
            parent_id=parent.id,
            operator=self.name,
            generation=parent.generation + 1,
        )


def make_operator(name: str, client: LlmClient | None = None):
    if name == "spec":
        return SpecMutationOperator()
    if name in ("llm-diff", "llm-prompt"):
        if client is None:
            raise EngineError(f"operator {name!r} needs a language-model client")
        return LlmDiffOperator(client) if name == "llm-diff" else LlmPromptOperator(client)
    raise EngineError(f"unknown operator {name!r}")


# ---------------------------------------------------------------------------
# accepted-diff export

DIFFSET_FORMAT = "accepted-diffs"
DIFFSET_VERSION = 1
DIFFSET_FIELDS = ("parent", "message", "diff", "fitness", "height", "width", "mass")


@dataclass(frozen=True)
class AcceptedDiffRecord:
    parent_source: str
    message: str | None
    diff: str
    fitness: float
    descriptor: tuple[float, float, float]

    def to_dict(self) -> dict:
        h, w, m = self.descriptor
        return {"parent": self.parent_source, "message": self.message, "diff": self.diff,
                "fitness": self.fitness, "height": h, "width": w, "mass": m}


def collect_accepted_diffs(map_state: MapState) -> list[AcceptedDiffRecord]:
    """Every diff-produced genotype ever admitted to the map, admission order."""
    records = []
    for gid in sorted(map_state.admitted):
        entry = map_state.admitted[gid]
        genotype = entry.genotype
        if genotype.diff is None:
            continue
        parent = map_state.admitted.get(genotype.parent_id or "")
        if parent is None:
            raise EngineError(f"admitted genotype {gid} has unregistered parent "
                              f"{genotype.parent_id!r}")
        records.append(AcceptedDiffRecord(
            parent_source=parent.genotype.source,
            message=genotype.commit_message,
            diff=genotype.diff,
            fitness=entry.fitness,
            descriptor=entry.descriptor,
        ))
    return records


def write_accepted_diffs(records: Sequence[AcceptedDiffRecord], path: str | Path) -> int:
    header = {"format": DIFFSET_FORMAT, "version": DIFFSET_VERSION,
              "fields": list(DIFFSET_FIELDS), "count": len(records)}
    with open(path, "w") as fh:
        fh.write(json.dumps(header) + "\n")
        for record in records:
            fh.write(json.dumps(record.to_dict()) + "\n")
    return len(records)


def export_accepted_diffs(map_state: MapState, path: str | Path) -> int:
    return write_accepted_diffs(collect_accepted_diffs(map_state), path)
