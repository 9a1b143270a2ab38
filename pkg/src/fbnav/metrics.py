"""Navigation metric suite: SR, OSR, SPL, NE, OE, PL, nDTW, SDTW, CLS.

All distance-based quantities use geodesic (graph) distances from a
precomputed GeoTable; success uses a configurable threshold d_th (3.0 m by
default, following the benchmark lineage).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

from .envgraph import GeoTable

DEFAULT_D_TH = 3.0

METRIC_NAMES = ("SR", "OSR", "SPL", "NE", "OE", "PL", "nDTW", "SDTW", "CLS")


@dataclass(frozen=True)
class MetricsRow:
    SR: float
    OSR: float
    SPL: float
    NE: float
    OE: float
    PL: float
    nDTW: float
    SDTW: float
    CLS: float

    def as_dict(self) -> dict[str, float]:
        return {k: getattr(self, k) for k in METRIC_NAMES}


def dtw(traj, ref, geo: GeoTable) -> float:
    """Boundary-matched dynamic time warping cost over geodesic distances."""
    n, m = len(traj), len(ref)
    inf = math.inf
    c = [[inf] * (m + 1) for _ in range(n + 1)]
    c[0][0] = 0.0
    for i in range(1, n + 1):
        ci, cp = c[i], c[i - 1]
        ti = traj[i - 1]
        for j in range(1, m + 1):
            d = geo(ti, ref[j - 1])
            ci[j] = d + min(cp[j], ci[j - 1], cp[j - 1])
    return c[n][m]


def ndtw(traj, ref, geo: GeoTable, d_th: float = DEFAULT_D_TH) -> float:
    return math.exp(-dtw(traj, ref, geo) / (len(ref) * d_th))


def _path_weight(path, geo: GeoTable) -> float:
    return sum(geo.graph.neighbors(a)[b] for a, b in zip(path, path[1:]))


def cls_score(traj, ref, geo: GeoTable, d_th: float = DEFAULT_D_TH) -> float:
    """Coverage weighted by length score."""
    pc = sum(
        math.exp(-min(geo(r, p) for p in traj) / d_th) for r in ref
    ) / len(ref)
    ref_len = _path_weight(ref, geo)
    pl = _path_weight(traj, geo)
    epl = pc * ref_len
    if epl == 0.0 and pl == 0.0:
        return pc
    ls = epl / (epl + abs(epl - pl))
    return pc * ls


def episode_metrics(
    traj, gt_path, goal: str, geo: GeoTable, d_th: float = DEFAULT_D_TH
) -> MetricsRow:
    """All nine metrics for one executed trajectory."""
    if not traj:
        raise ValueError("empty trajectory")
    ne = geo(traj[-1], goal)
    sr = 1.0 if ne <= d_th else 0.0
    oe = min(geo(v, goal) for v in traj)
    osr = 1.0 if oe <= d_th else 0.0
    pl = _path_weight(traj, geo)
    l_opt = geo(traj[0], goal)
    spl = sr if l_opt == 0.0 else sr * l_opt / max(l_opt, pl)
    nd = ndtw(traj, gt_path, geo, d_th)
    sdtw = sr * nd
    cls_ = cls_score(traj, gt_path, geo, d_th)
    return MetricsRow(sr, osr, spl, ne, oe, pl, nd, sdtw, cls_)


def aggregate(rows: list[MetricsRow]) -> dict[str, float]:
    """Mean of each metric over episodes."""
    if not rows:
        return {k: 0.0 for k in METRIC_NAMES}
    return {
        k: sum(getattr(r, k) for r in rows) / len(rows) for k in METRIC_NAMES
    }


def matched_path_rate(samples, gt_lookup) -> float:
    """Fraction of lifted paths identical to the ground-truth route."""
    if not samples:
        return 0.0
    hits = sum(
        1 for s in samples if tuple(s.tau_plus) == tuple(gt_lookup(s.instruction))
    )
    return hits / len(samples)


CSV_HEADER = ["env", "split", "style", "episodes",
              "SR", "OSR", "SPL", "NE", "OE", "PL", "nDTW", "SDTW", "CLS"]

_RATES = {"SR", "OSR", "SPL", "nDTW", "SDTW", "CLS"}


def results_csv_row(env: str, split: str, style: str, rows: list[MetricsRow]) -> list[str]:
    agg = aggregate(rows)
    out = [env, split, style, str(len(rows))]
    for k in METRIC_NAMES:
        v = agg[k] * 100.0 if k in _RATES else agg[k]
        out.append(f"{v:.2f}")
    return out


def write_results_csv(path, entries: list[list[str]]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as f:
        w = csv.writer(f)
        w.writerow(CSV_HEADER)
        w.writerows(entries)
