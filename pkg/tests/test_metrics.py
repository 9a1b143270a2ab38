import math
import random

import pytest

from fbnav.envgraph import GeoTable, generate_env
from fbnav.metrics import (CSV_HEADER, MetricsRow, aggregate,
                           dtw, episode_metrics, matched_path_rate, ndtw,
                           results_csv_row, write_results_csv)

from conftest import line_graph


def brute_force_dtw(traj, ref, geo):
    """Minimum alignment cost over all monotone boundary-matched warpings."""
    n, m = len(traj), len(ref)
    best = [math.inf]

    def walk(i, j, cost):
        cost += geo(traj[i], ref[j])
        if cost >= best[0]:
            return
        if i == n - 1 and j == m - 1:
            best[0] = cost
            return
        for di, dj in ((1, 0), (0, 1), (1, 1)):
            if i + di < n and j + dj < m:
                walk(i + di, j + dj, cost)

    walk(0, 0, 0.0)
    return best[0]


@pytest.fixture(scope="module")
def line5():
    return line_graph(5)


@pytest.fixture(scope="module")
def geo5(line5):
    return GeoTable(line5)


def test_perfect_episode_identities(geo5):
    gt = ("a", "b", "c", "d", "e")
    row = episode_metrics(gt, gt, "e", geo5, d_th=3.0)
    assert row.SR == 1.0 and row.SPL == 1.0
    assert row.NE == 0.0 and row.OE == 0.0
    assert row.nDTW == 1.0 and row.SDTW == 1.0 and row.CLS == 1.0


def test_immediate_stop_far_goal(geo5):
    gt = ("a", "b", "c", "d", "e")
    row = episode_metrics(("a",), gt, "e", geo5, d_th=3.0)
    assert row.SR == 0.0 and row.SPL == 0.0 and row.SDTW == 0.0
    assert row.PL == 0.0
    assert row.NE == pytest.approx(4.0)


def test_partial_line_episode_hand_check(geo5):
    # tau=[a,b,c], gt=[a,b,c,d,e], goal=e, d_th=3: NE=2 -> SR=1
    gt = ("a", "b", "c", "d", "e")
    tau = ("a", "b", "c")
    row = episode_metrics(tau, gt, "e", geo5, d_th=3.0)
    assert row.NE == pytest.approx(2.0)
    assert row.SR == 1.0
    assert row.OE == pytest.approx(2.0)
    assert row.PL == pytest.approx(2.0)
    assert row.SPL == pytest.approx(1.0 * 4.0 / max(4.0, 2.0))
    bf = brute_force_dtw(tau, gt, geo5)
    assert dtw(tau, gt, geo5) == pytest.approx(bf)
    assert row.nDTW == pytest.approx(math.exp(-bf / (5 * 3.0)))
    assert row.SDTW == pytest.approx(row.SR * row.nDTW)
    # CLS hand check
    pc = sum(math.exp(-min(geo5(r, p) for p in tau) / 3.0) for r in gt) / 5
    epl = pc * 4.0
    ls = epl / (epl + abs(epl - 2.0))
    assert row.CLS == pytest.approx(pc * ls)


def test_dtw_matches_brute_force_on_all_short_paths():
    g = generate_env(seed=3, n_nodes=6)
    geo = GeoTable(g)
    ids = g.node_ids
    rng = random.Random(0)
    paths = []
    for L in (1, 2, 3, 4, 5, 6):
        for _ in range(6):
            paths.append(tuple(rng.choice(ids) for _ in range(L)))
    for tau in paths:
        for ref in rng.sample(paths, 6):
            assert dtw(tau, ref, geo) == pytest.approx(
                brute_force_dtw(tau, ref, geo))


def test_ndtw_self_identity(geo5):
    for tau in (("a",), ("a", "b"), ("c", "d", "e")):
        assert ndtw(tau, tau, geo5) == pytest.approx(1.0)


def test_metric_bounds_on_random_episodes():
    g = generate_env(seed=4, n_nodes=20)
    geo = GeoTable(g)
    ids = g.node_ids
    rng = random.Random(1)

    def random_walk(start, k):
        out = [start]
        for _ in range(k):
            out.append(rng.choice(sorted(g.neighbors(out[-1]))))
        return tuple(out)

    for _ in range(1000):
        start = rng.choice(ids)
        tau = random_walk(start, rng.randint(0, 10))
        ref = random_walk(start, rng.randint(1, 8))
        goal = ref[-1]
        row = episode_metrics(tau, ref, goal, geo)
        for k in ("SR", "OSR", "SPL", "nDTW", "SDTW", "CLS"):
            assert 0.0 <= getattr(row, k) <= 1.0 + 1e-12
        assert row.SPL <= row.SR + 1e-12
        assert row.SDTW <= row.nDTW + 1e-12
        assert row.SDTW <= row.SR + 1e-12
        assert row.NE >= 0.0 and row.OE >= 0.0
        assert row.OE <= row.NE + 1e-12


def test_matched_path_rate_extremes(geo5):
    class S:
        def __init__(self, instr, tau):
            self.instruction = instr
            self.tau_plus = tau

    gt = {"i1": ("a", "b"), "i2": ("b", "c")}
    samples = [S("i1", ("a", "b")), S("i2", ("b", "c"))]
    assert matched_path_rate(samples, lambda i: gt[i]) == 1.0
    samples = [S("i1", ("a", "c")), S("i2", ("b", "a"))]
    assert matched_path_rate(samples, lambda i: gt[i]) == 0.0
    assert matched_path_rate([], lambda i: gt[i]) == 0.0


def test_results_csv_format(tmp_path):
    rows = [MetricsRow(1.0, 1.0, 0.5, 2.0, 1.0, 8.0, 0.9, 0.9, 0.8),
            MetricsRow(0.0, 1.0, 0.0, 4.0, 2.0, 10.0, 0.5, 0.0, 0.6)]
    entry = results_csv_row("env1", "val", "basic", rows)
    assert entry[:4] == ["env1", "val", "basic", "2"]
    assert entry[4] == "50.00"  # SR percent
    assert entry[7] == "3.00"   # NE meters
    p = tmp_path / "results.csv"
    write_results_csv(p, [entry])
    text = p.read_text().splitlines()
    assert text[0] == ",".join(CSV_HEADER)
    assert text[1].startswith("env1,val,basic,2,")


def test_aggregate_means():
    rows = [MetricsRow(1, 1, 1, 0, 0, 4, 1, 1, 1),
            MetricsRow(0, 0, 0, 2, 1, 6, 0.5, 0, 0.5)]
    agg = aggregate(rows)
    assert agg["SR"] == 0.5
    assert agg["PL"] == 5.0
    assert agg["nDTW"] == 0.75
