"""Episode-level feedback and trajectory lifting.

After an episode ends at v_T the user either confirms the stop (v_T equals
the true goal) or supplies the correct goal viewpoint.  The endpoint is then
lifted into a full supervisory path by shortest-path search on the agent's
discovered graph; paths outside the configured length band are rejected as
outliers.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .envgraph import astar_path
from .membank import MemoryBank
from .rollout import Episode
from .synthlang import Instruction

CONFIRMED = "confirmed"
CORRECTED = "corrected"

DEFAULT_MIN_LEN = 5
DEFAULT_MAX_LEN = 7


@dataclass(frozen=True)
class FeedbackSample:
    instruction: Instruction
    tau_plus: tuple[str, ...]
    kind: str  # confirmed | corrected
    session: str = ""


@dataclass
class AdaptDataset:
    samples: list[FeedbackSample] = field(default_factory=list)

    def add(self, sample: FeedbackSample) -> None:
        self.samples.append(sample)

    def extend(self, other: "AdaptDataset") -> None:
        self.samples.extend(other.samples)

    def __len__(self) -> int:
        return len(self.samples)


@dataclass
class CollectStats:
    episodes: int = 0
    confirmed: int = 0
    corrected: int = 0
    infeasible: int = 0
    rejected: int = 0
    kept: int = 0

    @property
    def rejection_rate(self) -> float:
        return self.rejected / self.episodes if self.episodes else 0.0

    @property
    def feasibility_rate(self) -> float:
        return 1.0 - self.infeasible / self.episodes if self.episodes else 0.0


def feedback_fn(v_t: str, v_star: str) -> tuple[str, str]:
    """Conditional correction: corrected goal on failure, confirmation on success."""
    if v_t != v_star:
        return v_star, CORRECTED
    return v_t, CONFIRMED


def lift(ep: Episode, endpoint: str, m: MemoryBank) -> tuple[str, ...] | None:
    """Shortest discovered-graph path from the episode start to the endpoint.

    Returns None when the endpoint is undiscovered or unreachable on the
    current topology (counted by callers, never fatal).
    """
    start = ep.trajectory[0]
    if start not in m.nodes:
        raise ValueError(f"episode start {start!r} not in memory bank")
    if endpoint not in m.nodes:
        return None
    path = astar_path(m, start, endpoint)
    return tuple(path) if path is not None else None


def length_filter(tau_plus, min_len: int = DEFAULT_MIN_LEN,
                  max_len: int = DEFAULT_MAX_LEN) -> bool:
    return min_len <= len(tau_plus) <= max_len


def collect(
    episodes: list[Episode],
    m: MemoryBank,
    min_len: int = DEFAULT_MIN_LEN,
    max_len: int = DEFAULT_MAX_LEN,
    session: str = "",
) -> tuple[AdaptDataset, CollectStats]:
    """Apply feedback, lifting and outlier rejection to a batch of episodes.

    The true goal of each episode is the instruction's goal viewpoint
    (the simulated user knows it).
    """
    ds = AdaptDataset()
    stats = CollectStats()
    for ep in episodes:
        stats.episodes += 1
        endpoint, kind = feedback_fn(ep.terminal, ep.instruction.goal)
        if kind == CONFIRMED:
            stats.confirmed += 1
        else:
            stats.corrected += 1
        tau_plus = lift(ep, endpoint, m)
        if tau_plus is None:
            stats.infeasible += 1
            continue
        if not length_filter(tau_plus, min_len, max_len):
            stats.rejected += 1
            continue
        stats.kept += 1
        ds.add(FeedbackSample(ep.instruction, tau_plus, kind, session))
    return ds, stats


def save_dataset(ds: AdaptDataset, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for s in ds.samples:
            f.write(json.dumps({
                "instr_id": s.instruction.id,
                "tokens": list(s.instruction.tokens),
                "tau_plus": list(s.tau_plus),
                "kind": s.kind,
                "session": s.session,
                "style": s.instruction.style,
            }, sort_keys=True) + "\n")
