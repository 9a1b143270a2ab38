import pytest

from fbnav.envgraph import EnvGraph, Viewpoint, generate_env


def line_graph(n=3, spacing=1.0, landmarks=None):
    """Unit-spaced line a-b-c-... with one landmark per node."""
    names = "abcdefghijklmnopqrstuvwxyz"
    lms = landmarks or [f"lm{i}" for i in range(n)]
    nodes = [
        Viewpoint(names[i], (spacing * i, 0.0, 0.0), (lms[i],))
        for i in range(n)
    ]
    edges = [(names[i], names[i + 1]) for i in range(n - 1)]
    return EnvGraph("line", nodes, edges)


@pytest.fixture
def line3():
    return line_graph(3)


@pytest.fixture
def geom20():
    return generate_env(seed=3, n_nodes=20, model="random-geometric")


def bellman_ford(g, src):
    """Brute-force shortest distances: |V|-1 rounds of full edge relaxation."""
    dist = {v: float("inf") for v in g.node_ids}
    dist[src] = 0.0
    edges = []
    for a, b in g.edges:
        w = g.neighbors(a)[b]
        edges.append((a, b, w))
        edges.append((b, a, w))
    for _ in range(len(g.node_ids) - 1):
        for a, b, w in edges:
            if dist[a] + w < dist[b]:
                dist[b] = dist[a] + w
    return dist


def dijkstra_oracle(g, src, dst):
    """Independent Dijkstra returning (weight, path); None if unreachable."""
    import heapq

    dist = {src: 0.0}
    parent = {}
    pq = [(0.0, src)]
    done = set()
    while pq:
        d, u = heapq.heappop(pq)
        if u in done:
            continue
        done.add(u)
        if u == dst:
            path = [u]
            while u in parent:
                u = parent[u]
                path.append(u)
            return d, list(reversed(path))
        for v, w in g.neighbors(u).items():
            nd = d + w
            if nd < dist.get(v, float("inf")):
                dist[v] = nd
                parent[v] = u
                heapq.heappush(pq, (nd, v))
    return None
