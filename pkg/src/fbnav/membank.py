"""Persistent agent memory: discovered topology, observation cache, candidates.

Observing a viewpoint caches its landmark bag and reveals all ground-truth
neighbors (the panoramic-observation analogue): neighbors enter the
discovered graph with positions but no cache entry until visited themselves.
The frontier is the set of discovered-but-unvisited nodes.
"""

from __future__ import annotations

import json
import math

from .envgraph import EnvGraph

BANK_VERSION = 1


class BankError(ValueError):
    """Raised for malformed or mismatched memory bank data."""


class MemoryBank:
    def __init__(self, env_name: str, vocab: list[str]):
        self.env_name = env_name
        self.vocab = list(vocab)  # landmark vocabulary fixing bag indices
        self.nodes: dict[str, tuple[float, float, float]] = {}
        self.edges: set[tuple[str, str]] = set()  # stored with a < b
        self.cache: dict[str, list[int]] = {}  # visited node -> landmark bag
        self.candidates: dict[str, list[str]] = {}  # node -> observed neighbors
        self._adj: dict[str, dict[str, float]] = {}  # incremental adjacency

    # -- discovered-graph view (duck-typed for astar_path) --------------

    def has_node(self, v: str) -> bool:
        return v in self.nodes

    def pos(self, v: str) -> tuple[float, float, float]:
        return self.nodes[v]

    def neighbors(self, v: str) -> dict[str, float]:
        return self._adj.get(v, {})

    def _add_edge(self, a: str, b: str) -> None:
        self.edges.add((a, b) if a < b else (b, a))
        w = math.dist(self.nodes[a], self.nodes[b])
        self._adj.setdefault(a, {})[b] = w
        self._adj.setdefault(b, {})[a] = w

    # -- mutation -------------------------------------------------------

    def observe(self, g: EnvGraph, v: str) -> "MemoryBank":
        """Visit v: cache its landmarks and reveal its neighbors."""
        if g.name != self.env_name:
            raise BankError(f"bank for {self.env_name!r} used with env {g.name!r}")
        vp = g.node(v)  # validates id
        self.nodes[v] = vp.pos
        bag = [0] * len(self.vocab)
        idx = {t: i for i, t in enumerate(self.vocab)}
        for lm in vp.landmarks:
            bag[idx[lm]] += 1
        self.cache[v] = bag
        seen = []
        for nb in sorted(g.neighbors(v)):
            self.nodes.setdefault(nb, g.node(nb).pos)
            self._add_edge(v, nb)
            seen.append(nb)
        self.candidates[v] = seen
        return self

    # -- queries --------------------------------------------------------

    def visited(self) -> set[str]:
        return set(self.cache)

    def frontier(self) -> set[str]:
        return set(self.nodes) - set(self.cache)

    def coverage(self, g: EnvGraph) -> float:
        return len(self.cache) / len(g)

    def reachable_from(self, v: str) -> set[str]:
        """Discovered-graph connected component containing v."""
        if v not in self.nodes:
            return set()
        seen = {v}
        stack = [v]
        while stack:
            u = stack.pop()
            for w in self._adj.get(u, ()):
                if w not in seen:
                    seen.add(w)
                    stack.append(w)
        return seen

    def copy(self) -> "MemoryBank":
        m = MemoryBank(self.env_name, self.vocab)
        m.nodes = dict(self.nodes)
        m.edges = set(self.edges)
        m.cache = {k: list(v) for k, v in self.cache.items()}
        m.candidates = {k: list(v) for k, v in self.candidates.items()}
        m._adj = {k: dict(v) for k, v in self._adj.items()}
        return m

    def __eq__(self, other) -> bool:
        if not isinstance(other, MemoryBank):
            return NotImplemented
        return (
            self.env_name == other.env_name
            and self.vocab == other.vocab
            and self.nodes == other.nodes
            and self.edges == other.edges
            and self.cache == other.cache
            and self.candidates == other.candidates
        )


def empty_bank(g: EnvGraph) -> MemoryBank:
    return MemoryBank(g.name, g.landmark_vocab)


def save_bank(m: MemoryBank, path) -> None:
    payload = {
        "version": BANK_VERSION,
        "env_name": m.env_name,
        "vocab": list(m.vocab),
        "nodes": [
            {"id": v, "pos": list(m.nodes[v])} for v in sorted(m.nodes)
        ],
        "edges": [list(e) for e in sorted(m.edges)],
        "cache": {v: {"bag": m.cache[v]} for v in sorted(m.cache)},
        "candidates": {v: sorted(m.candidates[v]) for v in sorted(m.candidates)},
    }
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f, indent=2, sort_keys=True)
        f.write("\n")


def load_bank(path, expected_env: str | None = None) -> MemoryBank:
    with open(path, "r", encoding="utf-8") as f:
        try:
            raw = json.load(f)
        except json.JSONDecodeError as exc:
            raise BankError(f"cannot parse bank file {path}: {exc}") from exc
    if raw.get("version") != BANK_VERSION:
        raise BankError(f"unsupported bank version {raw.get('version')!r}")
    if expected_env is not None and raw.get("env_name") != expected_env:
        raise BankError(
            f"bank is for env {raw.get('env_name')!r}, session env is {expected_env!r}"
        )
    try:
        m = MemoryBank(raw["env_name"], list(raw["vocab"]))
        for n in raw["nodes"]:
            m.nodes[n["id"]] = tuple(float(x) for x in n["pos"])
        for a, b in raw["edges"]:
            if a not in m.nodes or b not in m.nodes:
                raise BankError(f"edge [{a!r}, {b!r}] references unknown node")
            m._add_edge(a, b)
        for v, entry in raw["cache"].items():
            if v not in m.nodes:
                raise BankError(f"cache entry for unknown node {v!r}")
            m.cache[v] = [int(x) for x in entry["bag"]]
        for v, nbs in raw["candidates"].items():
            m.candidates[v] = list(nbs)
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, BankError):
            raise
        raise BankError(f"malformed bank data: {exc}") from exc
    return m
