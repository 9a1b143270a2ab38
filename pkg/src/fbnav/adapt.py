"""Feedback-based policy updates and the deployment pipelines.

Covers expansion of lifted trajectories into (state, expert action) pairs,
mini-batch imitation updates, mixed-domain replay, sequential (continual)
and aggregated (hybrid) adaptation, an entropy-minimization baseline, and
the deployment / evaluation / pretraining drivers they share.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

import numpy as np

from .envgraph import EnvGraph, GeoTable
from .feedback import AdaptDataset, collect
from .membank import MemoryBank, empty_bank
from .metrics import DEFAULT_D_TH, MetricsRow, aggregate, episode_metrics
from .policy import (MOVE, STOP_ACTION, FeatureSpace, NavAction, NavState,
                     Policy, entropy_grad, initial_state, nll_grad,
                     step_semantics, valid_actions)
from .rollout import DEFAULT_T_MAX, Episode, dagger_rollout, run_episode
from .synthlang import Instruction, StyleMap, generate_corpus


@dataclass
class AdaptConfig:
    alpha: float = 0.3
    epochs: int = 10
    batch_size: int = 32
    replay_ratio: float = 1.0
    dagger_beta: float = 0.5
    mode: str = "continual"  # continual | hybrid | entropy | none
    t_max: int = DEFAULT_T_MAX
    min_len: int = 5
    max_len: int = 7
    d_th: float = DEFAULT_D_TH

    def __post_init__(self):
        if self.alpha < 0.0:
            raise ValueError("alpha must be >= 0")
        if self.replay_ratio < 0.0:
            raise ValueError("replay_ratio must be >= 0")


Pair = tuple[NavState, NavAction]


def expand_to_pairs(
    ds: AdaptDataset,
    g: EnvGraph,
    bank: MemoryBank,
    styles: dict[str, StyleMap],
) -> tuple[list[Pair], int]:
    """Replay lifted trajectories into per-step supervision pairs.

    Uses the lifting-time bank snapshot; a pair whose action is not in the
    state's action space is dropped and counted (0 when the snapshot matches).
    """
    pairs: list[Pair] = []
    dropped = 0
    for sample in ds.samples:
        style = styles[sample.instruction.style]
        s = initial_state(sample.instruction, style, g, bank)
        tau = sample.tau_plus
        ok = True
        for t in range(len(tau) - 1):
            a = NavAction(MOVE, tau[t + 1])
            if a not in valid_actions(s):
                dropped += 1
                ok = False
                break
            pairs.append((s, a))
            s, _ = step_semantics(s, a)
        if ok:
            pairs.append((s, STOP_ACTION))
    return pairs, dropped


def il_update(policy: Policy, pairs: list[Pair], cfg: AdaptConfig,
              seed: int = 0) -> Policy:
    """Epochs of seeded mini-batch gradient descent on the imitation loss."""
    new = policy.copy()
    if not pairs or cfg.alpha == 0.0:
        return new
    rng = random.Random(seed)
    idx = list(range(len(pairs)))
    for _ in range(cfg.epochs):
        rng.shuffle(idx)
        for lo in range(0, len(idx), cfg.batch_size):
            batch = [pairs[i] for i in idx[lo:lo + cfg.batch_size]]
            _, grad = nll_grad(new.fspace, new.theta, batch)
            new.theta -= cfg.alpha * grad
    return new


def mix_replay(feedback_pairs: list[Pair], source_pairs: list[Pair],
               replay_ratio: float, seed: int = 0) -> list[Pair]:
    """Feedback pairs plus a seeded draw of source-domain pairs."""
    n = int(round(replay_ratio * len(feedback_pairs)))
    n = min(n, len(source_pairs))
    if n == 0:
        return list(feedback_pairs)
    rng = random.Random(seed)
    replay = rng.sample(source_pairs, n)
    return list(feedback_pairs) + replay


def entropy_baseline(policy: Policy, episodes: list[Episode],
                     cfg: AdaptConfig) -> Policy:
    """TENT-style comparator: per episode, one step of entropy descent.

    Only the cross-feature block of theta is updated (the analogue of
    adapting normalization parameters only).
    """
    new = policy.copy()
    if cfg.alpha == 0.0:
        return new
    n_cross = new.fspace.n_cross
    for ep in episodes:
        if not ep.states:
            continue
        grad = np.zeros(new.fspace.dim)
        for s in ep.states:
            grad += entropy_grad(new.fspace, new.theta, s)
        grad /= len(ep.states)
        grad[n_cross:] = 0.0
        new.theta -= cfg.alpha * grad
    return new


# -- deployment and evaluation drivers ----------------------------------


def deploy_session(
    policy: Policy,
    instrs: list[Instruction],
    g: EnvGraph,
    bank: MemoryBank,
    styles: dict[str, StyleMap],
    cfg: AdaptConfig,
    seed: int = 0,
    mode: str = "sample",
) -> list[Episode]:
    """Run a stream of instructions sequentially on one shared bank."""
    episodes = []
    for instr in instrs:
        ep, _ = run_episode(
            policy, instr, g, bank, styles[instr.style],
            t_max=cfg.t_max, mode=mode, seed=seed,
        )
        episodes.append(ep)
    return episodes


def evaluate_policy(
    policy: Policy,
    instrs: list[Instruction],
    g: EnvGraph,
    styles: dict[str, StyleMap],
    geo: GeoTable,
    cfg: AdaptConfig,
    bank: MemoryBank | None = None,
) -> tuple[list[MetricsRow], dict[str, float]]:
    """Greedy evaluation; each episode gets its own bank.

    With ``bank=None`` every episode starts from an empty bank (cold).
    Otherwise each episode runs on a private copy of ``bank``, so a
    full-session bank gives warm-start evaluation without episodes
    leaking observations into one another.
    """
    rows = []
    for instr in instrs:
        ep_bank = bank.copy() if bank is not None else empty_bank(g)
        ep, _ = run_episode(
            policy, instr, g, ep_bank, styles[instr.style],
            t_max=cfg.t_max, mode="greedy",
        )
        rows.append(episode_metrics(
            ep.trajectory, instr.gt_path, instr.goal, geo, cfg.d_th))
    return rows, aggregate(rows)


@dataclass
class StageReport:
    style: str
    n_episodes: int
    n_feedback: int
    infeasible: int
    rejected: int
    coverage: float
    metrics: dict[str, float] = field(default_factory=dict)


def adapt_stage(
    policy: Policy,
    g: EnvGraph,
    styles: dict[str, StyleMap],
    style_id: str,
    n_instr: int,
    n_feedback: int,
    cfg: AdaptConfig,
    seed: int,
    bank: MemoryBank,
    source_pairs: list[Pair],
    update_seed: int = 0,
) -> tuple[Policy, AdaptDataset, StageReport]:
    """One deployment + feedback + update stage on a persistent bank."""
    corpus = generate_corpus(
        g, styles[style_id], seed, n_instr, (cfg.min_len, cfg.max_len))
    episodes = deploy_session(policy, corpus, g, bank, styles, cfg, seed=seed)
    ds, stats = collect(
        episodes, bank, cfg.min_len, cfg.max_len, session=f"stage-{seed}")
    ds.samples = ds.samples[:n_feedback]
    pairs, _ = expand_to_pairs(ds, g, bank, styles)
    mixed = mix_replay(pairs, source_pairs, cfg.replay_ratio, seed=update_seed)
    new_policy = il_update(policy, mixed, cfg, seed=update_seed)
    report = StageReport(
        style=style_id,
        n_episodes=len(episodes),
        n_feedback=len(ds),
        infeasible=stats.infeasible,
        rejected=stats.rejected,
        coverage=bank.coverage(g),
    )
    return new_policy, ds, report


def run_continual(
    policy0: Policy,
    g: EnvGraph,
    styles: dict[str, StyleMap],
    stage_specs: list[tuple[str, int, int]],  # (style_id, n_instr, n_feedback)
    cfg: AdaptConfig,
    seed: int,
    source_pairs: list[Pair],
    eval_corpora: dict[str, list[Instruction]],
    geo: GeoTable,
    bank: MemoryBank | None = None,
) -> tuple[Policy, list[StageReport]]:
    """Sequential per-stage updates; evaluation after each stage."""
    policy = policy0
    bank = bank if bank is not None else empty_bank(g)
    reports = []
    for k, (style_id, n_instr, n_fb) in enumerate(stage_specs):
        policy, _, report = adapt_stage(
            policy, g, styles, style_id, n_instr, n_fb, cfg,
            seed=seed * 101 + k, bank=bank, source_pairs=source_pairs,
            update_seed=seed + k,
        )
        if style_id in eval_corpora:
            _, report.metrics = evaluate_policy(
                policy, eval_corpora[style_id], g, styles, geo, cfg,
                bank=bank)
        reports.append(report)
    return policy, reports


def canonical_pair_order(ds: AdaptDataset) -> AdaptDataset:
    """Sort samples by (style, instruction id) for order-invariant updates."""
    out = AdaptDataset(sorted(
        ds.samples, key=lambda s: (s.instruction.style, s.instruction.id)))
    return out


def _user_seed(seed: int, style_id: str) -> int:
    # position-independent per-user derivation, so the aggregated update is
    # invariant to the order users are listed in
    return random.Random(f"{seed}|{style_id}").randrange(2**31)


def run_hybrid(
    policy0: Policy,
    g: EnvGraph,
    styles: dict[str, StyleMap],
    users: list[tuple[str, int]],  # (style_id, n_feedback)
    cfg: AdaptConfig,
    seed: int,
    source_pairs: list[Pair],
    eval_corpus: list[Instruction],
    geo: GeoTable,
) -> tuple[Policy, dict[str, float], list[StageReport]]:
    """Union of all users' feedback, one joint update, mixed-split eval.

    Each user deploys on a private session bank, and the pooled pairs are
    canonically sorted by (style, instruction id, step) before batching.
    """
    keyed: list[tuple[tuple, Pair]] = []
    reports = []
    for style_id, n_fb in users:
        user_seed = _user_seed(seed, style_id)
        bank = empty_bank(g)
        corpus = generate_corpus(
            g, styles[style_id], user_seed, n_fb, (cfg.min_len, cfg.max_len))
        episodes = deploy_session(
            policy0, corpus, g, bank, styles, cfg, seed=user_seed)
        ds, stats = collect(
            episodes, bank, cfg.min_len, cfg.max_len, session=f"user-{style_id}")
        ds.samples = ds.samples[:n_fb]
        pairs, _ = expand_to_pairs(ds, g, bank, styles)
        step = 0
        prev_id = None
        for s, a in pairs:
            if s.instruction.id != prev_id:
                step = 0
                prev_id = s.instruction.id
            keyed.append(((s.instruction.style, s.instruction.id, step), (s, a)))
            step += 1
        reports.append(StageReport(
            style=style_id, n_episodes=len(episodes), n_feedback=len(ds),
            infeasible=stats.infeasible, rejected=stats.rejected,
            coverage=bank.coverage(g)))
    keyed.sort(key=lambda kv: kv[0])
    pooled = [pair for _, pair in keyed]
    mixed = mix_replay(pooled, source_pairs, cfg.replay_ratio, seed=seed)
    policy = il_update(policy0, mixed, cfg, seed=seed)
    _, agg = evaluate_policy(policy, eval_corpus, g, styles, geo, cfg)
    return policy, agg, reports


# -- pretraining --------------------------------------------------------


@dataclass
class PretrainResult:
    policy: Policy
    source_pairs: list[Pair]
    history: list[float]  # held-out SR per epoch
    best_epoch: int


def pretrain(
    g: EnvGraph,
    fspace: FeatureSpace,
    styles: dict[str, StyleMap],
    corpus: list[Instruction],
    heldout: list[Instruction],
    geo: GeoTable,
    cfg: AdaptConfig,
    seed: int = 0,
    max_epochs: int = 12,
    patience: int = 5,
) -> PretrainResult:
    """DAgger imitation on the source corpus until held-out SR plateaus.

    The first iteration is pure behavior cloning (beta=1); later iterations
    mix in policy rollouts at the configured beta.  All collected pairs are
    aggregated across iterations.
    """
    policy = Policy(fspace, alpha=cfg.alpha)
    pool: list[Pair] = []
    history: list[float] = []
    best = policy.copy()
    best_sr = -1.0
    best_epoch = -1
    for epoch in range(max_epochs):
        beta = 1.0 if epoch == 0 else cfg.dagger_beta
        for instr in corpus:
            bank = empty_bank(g)
            _, labels = dagger_rollout(
                policy, instr, g, bank, styles[instr.style],
                beta=beta, seed=seed * 997 + epoch, t_max=cfg.t_max)
            pool.extend(labels)
        step_cfg = AdaptConfig(
            alpha=cfg.alpha, epochs=6, batch_size=cfg.batch_size,
            replay_ratio=0.0, dagger_beta=beta, mode="none",
            t_max=cfg.t_max, d_th=cfg.d_th)
        policy = il_update(policy, pool, step_cfg, seed=seed + epoch)
        _, agg = evaluate_policy(policy, heldout, g, styles, geo, cfg)
        history.append(agg["SR"])
        if agg["SR"] > best_sr:
            best_sr = agg["SR"]
            best = policy.copy()
            best_epoch = epoch
        elif epoch - best_epoch >= patience:
            break
    return PretrainResult(best, pool, history, best_epoch)
