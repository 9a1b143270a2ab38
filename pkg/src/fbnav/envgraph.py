"""Ground-truth environment graphs: viewpoints, geodesics, A*, generators.

An environment is an undirected connected graph of viewpoints with 3D
positions and landmark tags.  Edge weights are always the Euclidean distance
between endpoint positions, which keeps the straight-line A* heuristic
admissible and makes path lengths geometrically meaningful.
"""

from __future__ import annotations

import heapq
import json
import math
import random
from dataclasses import dataclass


class EnvGraphError(ValueError):
    """Raised for malformed or inconsistent environment data."""


@dataclass(frozen=True)
class Viewpoint:
    id: str
    pos: tuple[float, float, float]
    landmarks: tuple[str, ...]

    def __post_init__(self):
        if not self.landmarks:
            raise EnvGraphError(f"viewpoint {self.id!r} has no landmarks")


def _euclid(p: tuple[float, ...], q: tuple[float, ...]) -> float:
    return math.dist(p, q)


class EnvGraph:
    """Immutable undirected viewpoint graph with Euclidean edge weights."""

    def __init__(self, name: str, nodes: list[Viewpoint], edges: list[tuple[str, str]]):
        self.name = name
        self._nodes: dict[str, Viewpoint] = {}
        for vp in sorted(nodes, key=lambda v: v.id):
            if vp.id in self._nodes:
                raise EnvGraphError(f"duplicate viewpoint id {vp.id!r}")
            self._nodes[vp.id] = vp
        self._adj: dict[str, dict[str, float]] = {v: {} for v in self._nodes}
        for a, b in edges:
            if a == b:
                raise EnvGraphError(f"self-loop edge [{a!r}, {b!r}]")
            for end in (a, b):
                if end not in self._nodes:
                    raise EnvGraphError(f"edge [{a!r}, {b!r}] references unknown id {end!r}")
            w = _euclid(self._nodes[a].pos, self._nodes[b].pos)
            if w <= 0.0:
                raise EnvGraphError(f"edge [{a!r}, {b!r}] has non-positive weight {w}")
            self._adj[a][b] = w
            self._adj[b][a] = w
        self._check_connected()

    def _check_connected(self):
        if not self._nodes:
            raise EnvGraphError("graph has no nodes")
        start = next(iter(self._nodes))
        seen = {start}
        stack = [start]
        while stack:
            u = stack.pop()
            for v in self._adj[u]:
                if v not in seen:
                    seen.add(v)
                    stack.append(v)
        if len(seen) != len(self._nodes):
            missing = sorted(set(self._nodes) - seen)
            raise EnvGraphError(f"graph is disconnected; unreachable nodes: {missing}")

    # -- read accessors -------------------------------------------------

    @property
    def node_ids(self) -> list[str]:
        return list(self._nodes)

    def node(self, v: str) -> Viewpoint:
        try:
            return self._nodes[v]
        except KeyError:
            raise EnvGraphError(f"unknown viewpoint id {v!r}") from None

    def has_node(self, v: str) -> bool:
        return v in self._nodes

    def neighbors(self, v: str) -> dict[str, float]:
        """Neighbor id -> edge weight."""
        if v not in self._adj:
            raise EnvGraphError(f"unknown viewpoint id {v!r}")
        return self._adj[v]

    def pos(self, v: str) -> tuple[float, float, float]:
        return self.node(v).pos

    @property
    def edges(self) -> list[tuple[str, str]]:
        out = []
        for a in self._adj:
            for b in self._adj[a]:
                if a < b:
                    out.append((a, b))
        return sorted(out)

    @property
    def landmark_vocab(self) -> list[str]:
        vocab: set[str] = set()
        for vp in self._nodes.values():
            vocab.update(vp.landmarks)
        return sorted(vocab)

    def __len__(self) -> int:
        return len(self._nodes)

    # -- shortest paths -------------------------------------------------

    def dijkstra_from(self, src: str) -> dict[str, float]:
        """Single-source shortest path distances."""
        if src not in self._adj:
            raise EnvGraphError(f"unknown viewpoint id {src!r}")
        dist = {src: 0.0}
        pq = [(0.0, src)]
        done: set[str] = set()
        while pq:
            d, u = heapq.heappop(pq)
            if u in done:
                continue
            done.add(u)
            for v, w in self._adj[u].items():
                nd = d + w
                if nd < dist.get(v, math.inf):
                    dist[v] = nd
                    heapq.heappush(pq, (nd, v))
        return dist


def geodesic(g: EnvGraph, u: str, v: str) -> float:
    """Shortest weighted path distance between two viewpoints."""
    if not g.has_node(v):
        raise EnvGraphError(f"unknown viewpoint id {v!r}")
    if u == v:
        g.node(u)  # id validation
        return 0.0
    return g.dijkstra_from(u)[v]


class GeoTable:
    """Precomputed all-pairs geodesic distances for one EnvGraph."""

    def __init__(self, g: EnvGraph):
        self.graph = g
        self._dist: dict[str, dict[str, float]] = {
            v: g.dijkstra_from(v) for v in g.node_ids
        }

    def __call__(self, u: str, v: str) -> float:
        try:
            return self._dist[u][v]
        except KeyError:
            raise EnvGraphError(f"unknown viewpoint id in pair ({u!r}, {v!r})") from None


def astar_path(g, src: str, dst: str) -> list[str] | None:
    """Minimum-weight path src->dst on a graph-like object, or None.

    ``g`` must expose ``neighbors(v) -> {id: weight}``, ``pos(v)`` and
    ``has_node(v)``.  The heuristic is the Euclidean straight-line distance
    to ``dst`` (admissible: edge weights are Euclidean).  Ties at equal
    f-score are broken by lexicographically smaller node id.
    """
    if not g.has_node(src):
        raise EnvGraphError(f"unknown source id {src!r}")
    if not g.has_node(dst):
        return None
    if src == dst:
        return [src]
    goal_pos = g.pos(dst)

    def h(v: str) -> float:
        return _euclid(g.pos(v), goal_pos)

    best_g = {src: 0.0}
    parent: dict[str, str] = {}
    pq = [(h(src), src, 0.0)]
    closed: set[str] = set()
    while pq:
        f, u, gu = heapq.heappop(pq)
        if u in closed:
            continue
        if u == dst:
            path = [u]
            while u in parent:
                u = parent[u]
                path.append(u)
            path.reverse()
            return path
        closed.add(u)
        for v in sorted(g.neighbors(u)):
            if v in closed:
                continue
            ng = gu + g.neighbors(u)[v]
            if ng < best_g.get(v, math.inf):
                best_g[v] = ng
                parent[v] = u
                heapq.heappush(pq, (ng + h(v), v, ng))
    return None


def path_length(g, path: list[str]) -> float:
    """Sum of edge weights along a node sequence."""
    total = 0.0
    for a, b in zip(path, path[1:]):
        total += g.neighbors(a)[b]
    return total


# -- generation ---------------------------------------------------------


def generate_env(
    seed: int,
    n_nodes: int,
    model: str = "random-geometric",
    landmark_vocab: list[str] | None = None,
    name: str | None = None,
) -> EnvGraph:
    """Deterministic synthetic environment.

    ``grid``: nodes on a lattice with 2.0 m spacing.  ``random-geometric``:
    uniform positions in a box sized so the connection radius yields mean
    degree around 4, plus a seeded nearest-predecessor spanning tree for
    connectivity.  Each node gets 1-3 landmarks drawn from the vocabulary.
    """
    if n_nodes < 2:
        raise EnvGraphError("n_nodes must be >= 2")
    vocab = sorted(landmark_vocab) if landmark_vocab else _default_vocab()
    if not vocab:
        raise EnvGraphError("landmark vocabulary must be non-empty")
    rng = random.Random(seed)
    if model == "grid":
        nodes, edges = _grid_layout(n_nodes)
    elif model == "random-geometric":
        nodes, edges = _geometric_layout(n_nodes, rng)
    else:
        raise EnvGraphError(f"unknown generator model {model!r}")
    viewpoints = []
    for nid, pos in nodes:
        k = rng.randint(1, 3)
        landmarks = tuple(sorted(rng.sample(vocab, min(k, len(vocab)))))
        viewpoints.append(Viewpoint(nid, pos, landmarks))
    env_name = name or f"{model}-{n_nodes}-s{seed}"
    return EnvGraph(env_name, viewpoints, edges)


def _default_vocab() -> list[str]:
    rooms = ["kitchen", "sofa", "lamp", "door", "window", "stairs", "plant",
             "table", "mirror", "shelf", "sink", "bed", "desk", "rug",
             "closet", "oven", "piano", "tv", "bath", "fridge",
             "chair", "clock", "vase", "couch", "bookcase", "fan",
             "painting", "hall", "balcony", "cabinet", "stool", "bench",
             "fireplace", "dresser", "pantry", "radiator", "counter",
             "wardrobe", "nightstand", "armchair"]
    return sorted(rooms)


def _node_id(i: int) -> str:
    return f"n{i:03d}"


def _grid_layout(n: int):
    rows = int(round(math.sqrt(n)))
    cols = math.ceil(n / rows)
    nodes = []
    index = {}
    i = 0
    for r in range(rows):
        for c in range(cols):
            if i >= n:
                break
            nid = _node_id(i)
            nodes.append((nid, (2.0 * c, 2.0 * r, 0.0)))
            index[(r, c)] = nid
            i += 1
    edges = []
    for (r, c), nid in index.items():
        for rr, cc in ((r, c + 1), (r + 1, c)):
            if (rr, cc) in index:
                edges.append((nid, index[(rr, cc)]))
    return nodes, edges


def _geometric_layout(n: int, rng: random.Random):
    side = 2.0 * math.sqrt(n)
    radius = 2.0 * side / math.sqrt(math.pi * n)  # mean degree ~ 4
    pts = [(rng.uniform(0.0, side), rng.uniform(0.0, side), 0.0) for _ in range(n)]
    order = list(range(n))
    rng.shuffle(order)
    nodes = [(_node_id(i), pts[i]) for i in range(n)]
    edge_set: set[tuple[str, str]] = set()

    def add(i: int, j: int):
        a, b = _node_id(i), _node_id(j)
        edge_set.add((a, b) if a < b else (b, a))

    # Spanning tree over a seeded random order: each node links to its
    # nearest predecessor, guaranteeing connectivity with short edges.
    for k in range(1, n):
        i = order[k]
        j = min(order[:k], key=lambda m: (_euclid(pts[i], pts[m]), m))
        add(i, j)
    for i in range(n):
        for j in range(i + 1, n):
            if _euclid(pts[i], pts[j]) <= radius:
                add(i, j)
    return nodes, sorted(edge_set)


# -- serialization ------------------------------------------------------


def env_to_dict(g: EnvGraph) -> dict:
    return {
        "name": g.name,
        "nodes": [
            {"id": vp.id, "pos": list(vp.pos), "landmarks": list(vp.landmarks)}
            for vp in (g.node(v) for v in g.node_ids)
        ],
        "edges": [list(e) for e in g.edges],
    }


def save_env(g: EnvGraph, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(env_to_dict(g), f, indent=2, sort_keys=True)
        f.write("\n")


def load_env(path) -> EnvGraph:
    with open(path, "r", encoding="utf-8") as f:
        try:
            raw = json.load(f)
        except json.JSONDecodeError as exc:
            raise EnvGraphError(f"cannot parse environment file {path}: {exc}") from exc
    return env_from_dict(raw)


def env_from_dict(raw: dict) -> EnvGraph:
    try:
        name = raw["name"]
        nodes = [
            Viewpoint(n["id"], tuple(float(x) for x in n["pos"]), tuple(n["landmarks"]))
            for n in raw["nodes"]
        ]
        edges = [(a, b) for a, b in raw["edges"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise EnvGraphError(f"malformed environment data: {exc}") from exc
    return EnvGraph(name, nodes, edges)
