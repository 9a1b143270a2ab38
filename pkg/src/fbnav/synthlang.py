"""Synthetic instructions with controllable user styles.

Instructions are symbolic landmark sequences: one token per node of the
shortest start->goal path, each drawn from that node's landmarks and mapped
through a style-specific synonym table.  Styles emulate per-user vocabulary
shift: with probability ``synonym_rate`` a landmark token is replaced by a
style-private synonym token.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass

from .envgraph import EnvGraph, astar_path


class GenerationExhausted(RuntimeError):
    """No (start, goal) pair with a path in the requested length range."""


@dataclass(frozen=True)
class StyleMap:
    style_id: str
    mapping: dict[str, str]  # landmark token -> instruction token
    seed: int

    def map_landmarks(self, landmarks) -> set[str]:
        return {self.mapping[t] for t in landmarks}

    @property
    def instruction_vocab(self) -> list[str]:
        return sorted(set(self.mapping.values()))


@dataclass(frozen=True)
class Instruction:
    id: str
    tokens: tuple[str, ...]
    style: str
    start: str
    goal: str
    gt_path: tuple[str, ...]

    def __post_init__(self):
        if not self.tokens:
            raise ValueError("instruction must have at least one token")
        if self.gt_path[0] != self.start or self.gt_path[-1] != self.goal:
            raise ValueError("gt_path endpoints disagree with start/goal")


def make_style(seed: int, base_vocab, synonym_rate: float, style_id: str | None = None) -> StyleMap:
    """Style synonym table: total over the base vocabulary, seed-deterministic.

    Synonym tokens are suffixed with the style seed, so they are disjoint
    from the base vocabulary and from other styles' synonyms.
    """
    vocab = sorted(base_vocab)
    if not vocab:
        raise ValueError("base vocabulary must be non-empty")
    if not 0.0 <= synonym_rate <= 1.0:
        raise ValueError("synonym_rate must lie in [0, 1]")
    rng = random.Random(seed)
    mapping = {}
    for tok in vocab:
        if rng.random() < synonym_rate:
            mapping[tok] = f"{tok}~s{seed}"
        else:
            mapping[tok] = tok
    return StyleMap(style_id or f"style{seed}", mapping, seed)


def basic_style(base_vocab) -> StyleMap:
    """Identity style ('Basic'): every landmark names itself."""
    vocab = sorted(base_vocab)
    return StyleMap("basic", {t: t for t in vocab}, 0)


def generate_instruction(
    g: EnvGraph,
    style: StyleMap,
    seed: int,
    len_range: tuple[int, int] = (5, 7),
    instr_id: str | None = None,
    max_tries: int = 500,
) -> Instruction:
    """Sample one instruction whose shortest path has a node count in range."""
    lo, hi = len_range
    if not 2 <= lo <= hi:
        raise ValueError(f"invalid len_range {len_range}")
    rng = random.Random(seed)
    ids = g.node_ids
    for _ in range(max_tries):
        start, goal = rng.choice(ids), rng.choice(ids)
        if start == goal:
            continue
        path = astar_path(g, start, goal)
        if path is None or not lo <= len(path) <= hi:
            continue
        tokens = tuple(
            style.mapping[rng.choice(g.node(v).landmarks)] for v in path
        )
        iid = instr_id or f"{style.style_id}-{seed}"
        return Instruction(iid, tokens, style.style_id, start, goal, tuple(path))
    raise GenerationExhausted(
        f"no start/goal pair with path length in {len_range} after {max_tries} tries"
    )


def generate_corpus(
    g: EnvGraph,
    style: StyleMap,
    seed: int,
    n: int,
    len_range: tuple[int, int] = (5, 7),
) -> list[Instruction]:
    """n instructions with per-item seeds derived from the corpus seed."""
    out = []
    for i in range(n):
        out.append(
            generate_instruction(
                g, style, seed * 1_000_003 + i, len_range,
                instr_id=f"{style.style_id}-{seed}-{i:04d}",
            )
        )
    return out


def save_corpus(instrs: list[Instruction], path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for ins in instrs:
            f.write(json.dumps({
                "id": ins.id,
                "style": ins.style,
                "tokens": list(ins.tokens),
                "start": ins.start,
                "goal": ins.goal,
                "gt_path": list(ins.gt_path),
            }, sort_keys=True) + "\n")


def load_corpus(path) -> list[Instruction]:
    out = []
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            if not line.strip():
                continue
            d = json.loads(line)
            out.append(Instruction(
                d["id"], tuple(d["tokens"]), d["style"],
                d["start"], d["goal"], tuple(d["gt_path"]),
            ))
    return out
