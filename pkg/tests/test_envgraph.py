import json
import random

import pytest

from fbnav.envgraph import (EnvGraph, EnvGraphError, GeoTable, Viewpoint,
                            astar_path, generate_env, geodesic, load_env,
                            path_length, save_env)

from conftest import bellman_ford, dijkstra_oracle


def write_env(tmp_path, payload):
    p = tmp_path / "env.json"
    p.write_text(json.dumps(payload))
    return p


MINIMAL = {
    "name": "line",
    "nodes": [
        {"id": "a", "pos": [0, 0, 0], "landmarks": ["x"]},
        {"id": "b", "pos": [1, 0, 0], "landmarks": ["y"]},
        {"id": "c", "pos": [2, 0, 0], "landmarks": ["z"]},
    ],
    "edges": [["a", "b"], ["b", "c"]],
}


def test_load_minimal_line(tmp_path):
    g = load_env(write_env(tmp_path, MINIMAL))
    assert len(g) == 3
    assert g.edges == [("a", "b"), ("b", "c")]


def test_load_rejects_self_loop(tmp_path):
    bad = dict(MINIMAL, edges=[["a", "a"], ["b", "c"]])
    with pytest.raises(EnvGraphError, match="self-loop"):
        load_env(write_env(tmp_path, bad))


def test_load_rejects_dangling_edge(tmp_path):
    bad = dict(MINIMAL, edges=[["a", "z"], ["b", "c"]])
    with pytest.raises(EnvGraphError, match="unknown id 'z'"):
        load_env(write_env(tmp_path, bad))


def test_load_rejects_duplicate_id(tmp_path):
    bad = dict(MINIMAL)
    bad["nodes"] = MINIMAL["nodes"] + [
        {"id": "a", "pos": [5, 5, 0], "landmarks": ["q"]}]
    with pytest.raises(EnvGraphError, match="duplicate"):
        load_env(write_env(tmp_path, bad))


def test_load_rejects_disconnected(tmp_path):
    bad = dict(MINIMAL, edges=[["a", "b"]])
    with pytest.raises(EnvGraphError, match="disconnected"):
        load_env(write_env(tmp_path, bad))


def test_grid_3x3_has_12_edges():
    g = generate_env(seed=1, n_nodes=9, model="grid")
    assert len(g) == 9
    assert len(g.edges) == 12


def test_generator_determinism(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    save_env(generate_env(seed=1, n_nodes=30), a)
    save_env(generate_env(seed=1, n_nodes=30), b)
    assert a.read_bytes() == b.read_bytes()


def test_generator_seed_changes_landmarks():
    g1 = generate_env(seed=1, n_nodes=9, model="grid")
    g2 = generate_env(seed=2, n_nodes=9, model="grid")
    lm1 = [g1.node(v).landmarks for v in g1.node_ids]
    lm2 = [g2.node(v).landmarks for v in g2.node_ids]
    assert lm1 != lm2


def test_geodesic_line(line3):
    assert geodesic(line3, "a", "c") == pytest.approx(2.0)
    assert geodesic(line3, "a", "a") == 0.0


def test_geodesic_unknown_id(line3):
    with pytest.raises(EnvGraphError):
        geodesic(line3, "a", "zzz")


def test_geodesic_matches_bellman_ford(geom20):
    for src in geom20.node_ids:
        oracle = bellman_ford(geom20, src)
        for dst in geom20.node_ids:
            assert geodesic(geom20, src, dst) == pytest.approx(oracle[dst])


def test_geodesic_symmetry(geom20):
    geo = GeoTable(geom20)
    ids = geom20.node_ids
    for u in ids[:8]:
        for v in ids[-8:]:
            assert geo(u, v) == pytest.approx(geo(v, u))


def test_geotable_triangle_inequality(geom20):
    geo = GeoTable(geom20)
    rng = random.Random(0)
    ids = geom20.node_ids
    for _ in range(200):
        u, v, w = rng.choice(ids), rng.choice(ids), rng.choice(ids)
        assert geo(u, w) <= geo(u, v) + geo(v, w) + 1e-9


def test_astar_trivial_single_node(line3):
    assert astar_path(line3, "b", "b") == ["b"]


def test_astar_unknown_source(line3):
    with pytest.raises(EnvGraphError):
        astar_path(line3, "zzz", "a")


def test_astar_unreachable_returns_none(line3):
    assert astar_path(line3, "a", "nope") is None


def test_astar_matches_dijkstra_weight():
    rng = random.Random(7)
    for trial in range(100):
        g = generate_env(seed=trial % 10, n_nodes=15 + trial % 20)
        src, dst = rng.choice(g.node_ids), rng.choice(g.node_ids)
        path = astar_path(g, src, dst)
        w_oracle, _ = dijkstra_oracle(g, src, dst)
        assert path[0] == src and path[-1] == dst
        assert path_length(g, path) == pytest.approx(w_oracle)


def test_astar_deterministic_tie_breaking():
    # Diamond with two equal-weight routes; lexicographically smaller id wins.
    nodes = [
        Viewpoint("a", (0.0, 0.0, 0.0), ("l",)),
        Viewpoint("b", (1.0, 1.0, 0.0), ("l",)),
        Viewpoint("c", (1.0, -1.0, 0.0), ("l",)),
        Viewpoint("d", (2.0, 0.0, 0.0), ("l",)),
    ]
    edges = [("a", "b"), ("a", "c"), ("b", "d"), ("c", "d")]
    g = EnvGraph("diamond", nodes, edges)
    assert astar_path(g, "a", "d") == ["a", "b", "d"]


def test_env_roundtrip(tmp_path, geom20):
    p = tmp_path / "env.json"
    save_env(geom20, p)
    g = load_env(p)
    assert g.name == geom20.name
    assert g.edges == geom20.edges
    assert [g.node(v) for v in g.node_ids] == \
        [geom20.node(v) for v in geom20.node_ids]


def test_viewpoint_requires_landmarks():
    with pytest.raises(EnvGraphError):
        Viewpoint("a", (0.0, 0.0, 0.0), ())


def test_generated_graphs_mean_degree_near_4():
    g = generate_env(seed=5, n_nodes=80)
    mean_deg = 2 * len(g.edges) / len(g)
    assert 2.5 <= mean_deg <= 6.5
