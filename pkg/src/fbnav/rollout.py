"""Episode execution: run the policy until STOP or the step budget.

Every node transition counts as one primitive step against T_max, including
intermediate nodes of a frontier subpath.  If the budget runs out, the
episode is truncated with a forced terminal STOP so that the step count T
always equals the number of recorded primitive actions.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass

import numpy as np

from .envgraph import EnvGraph, astar_path
from .membank import MemoryBank
from .policy import (MOVE, STOP, STOP_ACTION, NavAction, NavState, Policy,
                     initial_state, step_semantics)
from .synthlang import Instruction, StyleMap

DEFAULT_T_MAX = 15


@dataclass
class Episode:
    instruction: Instruction
    trajectory: tuple[str, ...]
    actions: tuple[NavAction, ...]  # primitive actions, STOP included
    terminal: str
    T: int
    truncated: bool
    states: tuple[NavState, ...] = ()  # decision-point states, in order

    def to_log(self) -> dict:
        return {
            "instr_id": self.instruction.id,
            "trajectory": list(self.trajectory),
            "T": self.T,
            "truncated": self.truncated,
            "terminal": self.terminal,
        }


def episode_rng(global_seed: int, instr_id: str) -> random.Random:
    """One generator per episode, derived from (global seed, instruction id)."""
    return random.Random(f"{global_seed}:{instr_id}")


def _choose(policy: Policy, s: NavState, rng: random.Random | None) -> NavAction:
    acts, p = policy.dist(s)
    if rng is None:
        return acts[int(np.argmax(p))]
    r = rng.random()
    acc = 0.0
    for a, pa in zip(acts, p):
        acc += pa
        if r < acc:
            return a
    return acts[-1]


def run_episode(
    policy: Policy,
    instr: Instruction,
    g: EnvGraph,
    bank: MemoryBank,
    style: StyleMap,
    t_max: int = DEFAULT_T_MAX,
    mode: str = "greedy",
    seed: int | None = None,
) -> tuple[Episode, MemoryBank]:
    """Execute one instruction; mutates and returns the bank."""
    if not g.has_node(instr.start):
        raise ValueError(f"start {instr.start!r} not in environment {g.name!r}")
    if mode not in ("greedy", "sample"):
        raise ValueError(f"unknown mode {mode!r}")
    rng = episode_rng(seed if seed is not None else 0, instr.id) \
        if mode == "sample" else None

    bank.observe(g, instr.start)
    s = initial_state(instr, style, g, bank)
    actions: list[NavAction] = []
    states: list[NavState] = []
    t = 0  # primitive steps consumed
    truncated = False
    while True:
        states.append(s)
        if t + 1 >= t_max:
            # Budget exhausted: forced terminal STOP.
            truncated = True
            actions.append(STOP_ACTION)
            t += 1
            break
        a = _choose(policy, s, rng)
        if a.kind == STOP:
            actions.append(a)
            t += 1
            break
        new_s, appended = step_semantics(s, a)
        # Cap a frontier subpath at the remaining budget.
        budget = t_max - 1 - t
        if len(appended) > budget:
            appended = appended[:budget]
            new_s, _ = _replay_prefix(s, appended)
        for node in appended:
            actions.append(NavAction(MOVE, node))
            t += 1
            bank.observe(g, node)
        s = new_s
    ep = Episode(
        instruction=instr,
        trajectory=s.traj,
        actions=tuple(actions),
        terminal=s.current,
        T=t,
        truncated=truncated,
        states=tuple(states),
    )
    return ep, bank


def _replay_prefix(s: NavState, nodes: list[str]):
    """Re-apply step semantics over a truncated subpath prefix."""
    cur = s
    for node in nodes:
        cur, _ = step_semantics(cur, NavAction(MOVE, node))
    return cur, nodes


def expert_action(g: EnvGraph, current: str, target: str) -> NavAction:
    """Shortest-path oracle: next hop toward the target, STOP on arrival."""
    if current == target:
        return STOP_ACTION
    path = astar_path(g, current, target)
    if path is None:
        raise ValueError(f"target {target!r} unreachable from {current!r}")
    return NavAction(MOVE, path[1])


def dagger_rollout(
    policy: Policy,
    instr: Instruction,
    g: EnvGraph,
    bank: MemoryBank,
    style: StyleMap,
    beta: float,
    seed: int,
    t_max: int = DEFAULT_T_MAX,
) -> tuple[Episode, list[tuple[NavState, NavAction]]]:
    """Expert-mixed rollout that labels every visited state.

    With probability beta the expert's next-hop action is executed, otherwise
    an action is sampled from the policy; the expert label is recorded for
    the state either way.
    """
    if not 0.0 <= beta <= 1.0:
        raise ValueError("beta must lie in [0, 1]")
    rng = episode_rng(seed, instr.id)
    bank.observe(g, instr.start)
    s = initial_state(instr, style, g, bank)
    labels: list[tuple[NavState, NavAction]] = []
    actions: list[NavAction] = []
    t = 0
    truncated = False
    while True:
        exp_a = expert_action(g, s.current, instr.goal)
        labels.append((s, exp_a))
        if t + 1 >= t_max:
            actions.append(STOP_ACTION)
            t += 1
            truncated = True
            break
        if rng.random() < beta:
            a = exp_a
        else:
            a = _choose(policy, s, rng)
        if a.kind == STOP:
            actions.append(a)
            t += 1
            break
        new_s, appended = step_semantics(s, a)
        budget = t_max - 1 - t
        if len(appended) > budget:
            appended = appended[:budget]
            new_s, _ = _replay_prefix(s, appended)
        for node in appended:
            actions.append(NavAction(MOVE, node))
            t += 1
            bank.observe(g, node)
        s = new_s
    ep = Episode(instr, s.traj, tuple(actions), s.current, t, truncated)
    return ep, labels


def save_episode_log(episodes: list[Episode], path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for ep in episodes:
            f.write(json.dumps(ep.to_log(), sort_keys=True) + "\n")
