"""Linear-softmax navigation policy over a local + global action space.

The action space at a state is MOVE to any ground-truth neighbor of the
current node, MOVE to any reachable frontier node of the memory bank
(executed as the discovered-graph shortest subpath), and STOP.  Features are
sparse: instruction-token x landmark cross features, a revisit indicator,
move/stop biases, and two stop cues (all tokens consumed, final token names
the current node).  Log-likelihood and entropy gradients are analytic.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace

import numpy as np

from .envgraph import EnvGraph, astar_path
from .membank import MemoryBank
from .synthlang import Instruction, StyleMap

POLICY_VERSION = 1


class PolicyError(ValueError):
    pass


class FeatureSpace:
    """Fixed index layout shared by training and evaluation.

    Layout: cross features (w, lam) for w in instruction vocab W and lam in
    landmark vocab L at index w_idx * |L| + lam_idx, followed by the revisit
    indicator, move bias, stop bias, stop-all-consumed and stop-goal-match
    indicators.
    """

    def __init__(self, instr_vocab, landmark_vocab):
        self.instr_vocab = tuple(sorted(set(instr_vocab)))
        self.landmark_vocab = tuple(sorted(set(landmark_vocab)))
        self._w_idx = {w: i for i, w in enumerate(self.instr_vocab)}
        self._l_idx = {l: i for i, l in enumerate(self.landmark_vocab)}
        n_cross = len(self.instr_vocab) * len(self.landmark_vocab)
        self.i_revisit = n_cross
        self.i_move_bias = n_cross + 1
        self.i_stop_bias = n_cross + 2
        self.i_stop_consumed = n_cross + 3
        self.i_stop_goal_match = n_cross + 4
        self.dim = n_cross + 5
        self.n_cross = n_cross

    def cross(self, token: str, landmark: str) -> int:
        try:
            return self._w_idx[token] * len(self.landmark_vocab) + self._l_idx[landmark]
        except KeyError:
            raise PolicyError(
                f"token {token!r} / landmark {landmark!r} outside feature space"
            ) from None

    def to_dict(self) -> dict:
        return {
            "instr_vocab": list(self.instr_vocab),
            "landmark_vocab": list(self.landmark_vocab),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FeatureSpace":
        return cls(d["instr_vocab"], d["landmark_vocab"])

    def __eq__(self, other):
        if not isinstance(other, FeatureSpace):
            return NotImplemented
        return (self.instr_vocab, self.landmark_vocab) == (
            other.instr_vocab, other.landmark_vocab)


STOP = "STOP"
MOVE = "MOVE"


@dataclass(frozen=True)
class NavAction:
    kind: str  # MOVE or STOP
    target: str | None = None

    def __post_init__(self):
        if self.kind not in (MOVE, STOP):
            raise PolicyError(f"unknown action kind {self.kind!r}")
        if self.kind == MOVE and self.target is None:
            raise PolicyError("MOVE action needs a target")


STOP_ACTION = NavAction(STOP)


@dataclass(frozen=True)
class NavState:
    instruction: Instruction
    style: StyleMap
    graph: EnvGraph
    bank: MemoryBank  # shared, mutated by the rollout engine between steps
    current: str
    pointer: int
    traj: tuple[str, ...]

    @property
    def tokens(self) -> tuple[str, ...]:
        return self.instruction.tokens


def _mapped_landmarks(s: NavState, v: str) -> set[str]:
    return s.style.map_landmarks(s.graph.node(v).landmarks)


def _advance_pointer(s: NavState, node: str, pointer: int) -> int:
    L = len(s.tokens)
    if pointer < L and s.tokens[pointer] in _mapped_landmarks(s, node):
        return pointer + 1
    return pointer


def initial_state(
    instr: Instruction, style: StyleMap, g: EnvGraph, bank: MemoryBank
) -> NavState:
    """State at the start node; the pointer rule also applies to it."""
    s = NavState(instr, style, g, bank, instr.start, 0, (instr.start,))
    ptr = _advance_pointer(s, instr.start, 0)
    return replace(s, pointer=ptr) if ptr else s


def valid_actions(s: NavState) -> list[NavAction]:
    """MOVE to each neighbor or reachable frontier node, plus STOP."""
    targets = set(s.graph.neighbors(s.current))
    frontier = s.bank.frontier()
    if frontier - targets:
        reachable = s.bank.reachable_from(s.current)
        targets |= frontier & reachable
    targets.discard(s.current)
    actions = [NavAction(MOVE, t) for t in sorted(targets)]
    actions.append(STOP_ACTION)
    return actions


def features(fspace: FeatureSpace, s: NavState, a: NavAction) -> dict[int, float]:
    """Sparse feature vector of a (state, action) pair."""
    f: dict[int, float] = {}
    if a.kind == MOVE:
        tgt = a.target
        if s.pointer < len(s.tokens):
            tok = s.tokens[s.pointer]
            for lam in s.graph.node(tgt).landmarks:
                f[fspace.cross(tok, lam)] = 1.0
        if tgt in s.traj:
            f[fspace.i_revisit] = 1.0
        f[fspace.i_move_bias] = 1.0
    else:
        f[fspace.i_stop_bias] = 1.0
        if s.pointer == len(s.tokens):
            f[fspace.i_stop_consumed] = 1.0
        if s.tokens[-1] in _mapped_landmarks(s, s.current):
            f[fspace.i_stop_goal_match] = 1.0
    return f


def _dot(theta: np.ndarray, feat: dict[int, float]) -> float:
    return float(sum(theta[i] * v for i, v in feat.items()))


def action_dist(
    fspace: FeatureSpace, theta: np.ndarray, s: NavState,
    actions: list[NavAction] | None = None,
) -> tuple[list[NavAction], np.ndarray]:
    """Softmax policy over valid actions; stable via max subtraction."""
    acts = actions if actions is not None else valid_actions(s)
    logits = np.array([_dot(theta, features(fspace, s, a)) for a in acts])
    z = logits - logits.max()
    e = np.exp(z)
    return acts, e / e.sum()


def entropy(fspace: FeatureSpace, theta: np.ndarray, s: NavState) -> float:
    _, p = action_dist(fspace, theta, s)
    p = p[p > 0.0]
    return float(-(p * np.log(p)).sum())


def entropy_grad(
    fspace: FeatureSpace, theta: np.ndarray, s: NavState
) -> np.ndarray:
    """Analytic gradient of the action-distribution entropy w.r.t. theta.

    dH/dtheta = -sum_a p_a log p_a (phi_a - phibar), phibar = sum_a p_a phi_a.
    """
    acts, p = action_dist(fspace, theta, s)
    feats = [features(fspace, s, a) for a in acts]
    grad = np.zeros(fspace.dim)
    phibar: dict[int, float] = {}
    for pa, fa in zip(p, feats):
        for i, v in fa.items():
            phibar[i] = phibar.get(i, 0.0) + pa * v
    for pa, fa in zip(p, feats):
        if pa <= 0.0:
            continue
        coef = -pa * math.log(pa)
        for i, v in fa.items():
            grad[i] += coef * v
        for i, v in phibar.items():
            grad[i] -= coef * v
    return grad


def step_semantics(s: NavState, a: NavAction) -> tuple[NavState, list[str]]:
    """Apply a MOVE; returns the new state and the appended node sequence.

    A frontier target executes the discovered-graph shortest subpath; the
    pointer rule is applied at every appended node.  STOP is terminal and
    handled by the rollout engine, not here.
    """
    if a.kind == STOP:
        raise PolicyError("STOP has no successor state")
    tgt = a.target
    if tgt in s.graph.neighbors(s.current):
        hop_path = [s.current, tgt]
    else:
        hop_path = astar_path(s.bank, s.current, tgt)
        if hop_path is None:
            raise PolicyError(
                f"frontier target {tgt!r} unreachable in discovered graph"
            )
    appended = hop_path[1:]
    ptr = s.pointer
    traj = s.traj
    for node in appended:
        traj = traj + (node,)
        ptr = _advance_pointer(s, node, ptr)
    new = replace(s, current=appended[-1], pointer=ptr, traj=traj)
    return new, appended


def nll_grad(
    fspace: FeatureSpace, theta: np.ndarray,
    batch: list[tuple[NavState, NavAction]],
) -> tuple[float, np.ndarray]:
    """Mean negative log-likelihood of expert actions and its gradient."""
    if not batch:
        raise PolicyError("empty batch")
    loss = 0.0
    grad = np.zeros(fspace.dim)
    n = len(batch)
    for s, a_plus in batch:
        acts, p = action_dist(fspace, theta, s)
        try:
            k = acts.index(a_plus)
        except ValueError:
            raise PolicyError(
                f"expert action {a_plus} invalid at node {s.current!r} "
                f"(instruction {s.instruction.id!r})"
            ) from None
        loss += -math.log(max(p[k], 1e-300))
        feats = [features(fspace, s, a) for a in acts]
        for pa, fa in zip(p, feats):
            for i, v in fa.items():
                grad[i] += pa * v / n
        for i, v in feats[k].items():
            grad[i] -= v / n
    return loss / n, grad


class Policy:
    """Feature space + parameter vector + learning rate, serializable."""

    def __init__(self, fspace: FeatureSpace, theta: np.ndarray | None = None,
                 alpha: float = 1e-2):
        self.fspace = fspace
        self.theta = (
            np.zeros(fspace.dim) if theta is None else np.asarray(theta, dtype=float)
        )
        if self.theta.shape != (fspace.dim,):
            raise PolicyError(
                f"theta has dim {self.theta.shape}, feature space needs {fspace.dim}"
            )
        if not np.isfinite(self.theta).all():
            raise PolicyError("theta has non-finite entries")
        self.alpha = alpha

    def dist(self, s: NavState, actions=None):
        return action_dist(self.fspace, self.theta, s, actions)

    def copy(self) -> "Policy":
        return Policy(self.fspace, self.theta.copy(), self.alpha)

    def save(self, path) -> None:
        payload = {
            "version": POLICY_VERSION,
            "feature_space": self.fspace.to_dict(),
            "theta": [float(x) for x in self.theta],
            "alpha": self.alpha,
        }
        with open(path, "w", encoding="utf-8") as f:
            json.dump(payload, f, sort_keys=True)
            f.write("\n")

    @classmethod
    def load(cls, path) -> "Policy":
        with open(path, "r", encoding="utf-8") as f:
            raw = json.load(f)
        if raw.get("version") != POLICY_VERSION:
            raise PolicyError(f"unsupported policy version {raw.get('version')!r}")
        fspace = FeatureSpace.from_dict(raw["feature_space"])
        return cls(fspace, np.array(raw["theta"], dtype=float), raw["alpha"])
