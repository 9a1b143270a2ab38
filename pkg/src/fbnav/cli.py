"""Experiment harness: pretrain, deploy, adapt, ablate and report commands.

Configuration comes from one JSON file plus flag overrides; every command
writes a fully-resolved manifest into its output directory, and rerunning
with ``--config <manifest>`` reproduces the metric CSVs byte-for-byte.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from dataclasses import asdict, dataclass, field

from .adapt import (AdaptConfig, adapt_stage, deploy_session, entropy_baseline,
                    evaluate_policy, pretrain, run_continual, run_hybrid)
from .envgraph import GeoTable, generate_env, load_env
from .feedback import collect, save_dataset
from .membank import empty_bank, load_bank, save_bank
from .metrics import episode_metrics, results_csv_row, write_results_csv
from .policy import FeatureSpace, Policy
from .rollout import dagger_rollout, run_episode, save_episode_log
from .synthlang import basic_style, generate_corpus, make_style


@dataclass
class RunConfig:
    seed: int = 0
    out: str = "runs/latest"
    env: dict = field(default_factory=lambda: {
        "seed": 7, "n_nodes": 60, "model": "random-geometric",
        "n_landmarks": 80,
    })
    styles: list = field(default_factory=lambda: [
        {"id": f"user{i}", "seed": 100 + i, "synonym_rate": 0.8}
        for i in range(5)
    ])
    style: str = "basic"          # deployment / single-stage style
    mode: str = "continual"       # continual | hybrid | entropy | none
    policy: str | None = None     # input policy file (deploy/adapt/ablate)
    warm_start: str | None = None  # bank file for deploy
    n_pretrain: int = 300
    n_heldout: int = 60
    max_epochs: int = 12
    patience: int = 5
    n_instructions: int = 300
    n_feedback: int = 300
    n_eval: int = 100
    stages: list = field(default_factory=list)  # [[style, n_instr, n_fb]]
    grid_instr: list = field(default_factory=lambda: [100, 300, 500])
    grid_fb: list = field(default_factory=lambda: [100, 300, 500])
    adapt: dict = field(default_factory=dict)   # AdaptConfig overrides

    def adapt_config(self) -> AdaptConfig:
        cfg = AdaptConfig(**self.adapt)
        if self.mode in ("continual", "hybrid", "entropy", "none"):
            cfg.mode = self.mode
        return cfg


class CliError(Exception):
    pass


def load_config(path: str | None, overrides: dict) -> RunConfig:
    raw: dict = {}
    if path:
        with open(path, "r", encoding="utf-8") as f:
            raw = json.load(f)
        if "config" in raw and "command" in raw:  # a manifest: unwrap
            raw = raw["config"]
    raw.update({k: v for k, v in overrides.items() if v is not None})
    known = {f for f in RunConfig.__dataclass_fields__}
    unknown = set(raw) - known
    if unknown:
        raise CliError(f"unknown config keys: {sorted(unknown)}")
    return RunConfig(**raw)


def build_world(cfg: RunConfig):
    """Environment, style table, feature space and geodesic table."""
    env_spec = cfg.env
    if "path" in env_spec:
        g = load_env(env_spec["path"])
    else:
        n_lm = env_spec.get("n_landmarks")
        vocab = [f"lm{i:03d}" for i in range(n_lm)] if n_lm else None
        g = generate_env(
            seed=env_spec.get("seed", 7),
            n_nodes=env_spec.get("n_nodes", 60),
            model=env_spec.get("model", "random-geometric"),
            landmark_vocab=vocab,
        )
    styles = {"basic": basic_style(g.landmark_vocab)}
    for s in cfg.styles:
        styles[s["id"]] = make_style(
            s["seed"], g.landmark_vocab, s.get("synonym_rate", 0.8),
            style_id=s["id"])
    instr_vocab = sorted(
        set().union(*[st.instruction_vocab for st in styles.values()]))
    fspace = FeatureSpace(instr_vocab, g.landmark_vocab)
    return g, styles, fspace, GeoTable(g)


def write_manifest(cfg: RunConfig, command: str) -> None:
    os.makedirs(cfg.out, exist_ok=True)
    payload = {"command": command, "config": asdict(cfg)}
    with open(os.path.join(cfg.out, "manifest.json"), "w",
              encoding="utf-8") as f:
        json.dump(payload, f, indent=2, sort_keys=True)
        f.write("\n")


def _require_policy(cfg: RunConfig) -> Policy:
    if not cfg.policy:
        raise CliError("this command needs --policy (or 'policy' in config)")
    return Policy.load(cfg.policy)


def _source_pairs(policy, g, styles, cfg: RunConfig, acfg: AdaptConfig):
    """Expert supervision on the pretraining corpus (replay source)."""
    corpus = generate_corpus(g, styles["basic"], cfg.seed + 1, cfg.n_pretrain,
                             (acfg.min_len, acfg.max_len))
    pairs = []
    for instr in corpus:
        _, labels = dagger_rollout(policy, instr, g, empty_bank(g),
                                   styles["basic"], beta=1.0, seed=cfg.seed)
        pairs.extend(labels)
    return pairs


def _eval_rows(policy, g, styles, geo, acfg, cfg, style_id, split, bank=None):
    corpus = generate_corpus(g, styles[style_id], cfg.seed + 7, cfg.n_eval,
                             (acfg.min_len, acfg.max_len))
    rows, _ = evaluate_policy(policy, corpus, g, styles, geo, acfg, bank=bank)
    return results_csv_row(g.name, split, style_id, rows)


def cmd_pretrain(cfg: RunConfig) -> int:
    write_manifest(cfg, "pretrain")
    g, styles, fspace, geo = build_world(cfg)
    acfg = cfg.adapt_config()
    corpus = generate_corpus(g, styles["basic"], cfg.seed + 1, cfg.n_pretrain,
                             (acfg.min_len, acfg.max_len))
    heldout = generate_corpus(g, styles["basic"], cfg.seed + 2, cfg.n_heldout,
                              (acfg.min_len, acfg.max_len))
    res = pretrain(g, fspace, styles, corpus, heldout, geo, acfg,
                   seed=cfg.seed, max_epochs=cfg.max_epochs,
                   patience=cfg.patience)
    res.policy.save(os.path.join(cfg.out, "policy.json"))
    with open(os.path.join(cfg.out, "training_curve.csv"), "w",
              encoding="utf-8", newline="") as f:
        w = csv.writer(f)
        w.writerow(["epoch", "heldout_SR"])
        for i, sr in enumerate(res.history):
            w.writerow([i, f"{sr:.4f}"])
    rows, _ = evaluate_policy(res.policy, heldout, g, styles, geo, acfg)
    write_results_csv(os.path.join(cfg.out, "metrics.csv"),
                      [results_csv_row(g.name, "heldout", "basic", rows)])
    return 0


def cmd_deploy(cfg: RunConfig) -> int:
    write_manifest(cfg, "deploy")
    g, styles, fspace, geo = build_world(cfg)
    acfg = cfg.adapt_config()
    policy = _require_policy(cfg)
    if cfg.style not in styles:
        raise CliError(f"unknown style {cfg.style!r}")
    if cfg.warm_start:
        bank = load_bank(cfg.warm_start, expected_env=g.name)
    else:
        bank = empty_bank(g)
    corpus = generate_corpus(g, styles[cfg.style], cfg.seed + 3,
                             cfg.n_instructions, (acfg.min_len, acfg.max_len))
    episodes, trace = [], []
    for instr in corpus:
        ep, _ = run_episode(policy, instr, g, bank, styles[instr.style],
                            t_max=acfg.t_max, mode="sample", seed=cfg.seed)
        episodes.append(ep)
        trace.append(bank.coverage(g))
    ds, stats = collect(episodes, bank, acfg.min_len, acfg.max_len,
                        session=f"deploy-{cfg.seed}")
    save_episode_log(episodes, os.path.join(cfg.out, "episodes.jsonl"))
    save_bank(bank, os.path.join(cfg.out, "bank.json"))
    save_dataset(ds, os.path.join(cfg.out, "feedback.jsonl"))
    with open(os.path.join(cfg.out, "coverage.csv"), "w",
              encoding="utf-8", newline="") as f:
        w = csv.writer(f)
        w.writerow(["episode", "coverage"])
        for i, c in enumerate(trace):
            w.writerow([i, f"{c:.4f}"])
    rows = [episode_metrics(ep.trajectory, ep.instruction.gt_path,
                            ep.instruction.goal, geo, acfg.d_th)
            for ep in episodes]
    write_results_csv(os.path.join(cfg.out, "metrics.csv"),
                      [results_csv_row(g.name, "deploy", cfg.style, rows)])
    with open(os.path.join(cfg.out, "collect_stats.json"), "w",
              encoding="utf-8") as f:
        json.dump({
            "episodes": stats.episodes, "confirmed": stats.confirmed,
            "corrected": stats.corrected, "infeasible": stats.infeasible,
            "rejected": stats.rejected, "kept": stats.kept,
        }, f, indent=2, sort_keys=True)
        f.write("\n")
    return 0


def _default_stages(cfg: RunConfig) -> list:
    if cfg.stages:
        return [tuple(s) for s in cfg.stages]
    return [(cfg.style, cfg.n_instructions, cfg.n_feedback)]


def cmd_adapt(cfg: RunConfig) -> int:
    write_manifest(cfg, "adapt")
    g, styles, fspace, geo = build_world(cfg)
    acfg = cfg.adapt_config()
    policy = _require_policy(cfg)
    entries = []
    if cfg.mode == "none":
        out_policy = policy
        entries.append(_eval_rows(policy, g, styles, geo, acfg, cfg,
                                  cfg.style, "frozen"))
    elif cfg.mode == "entropy":
        corpus = generate_corpus(g, styles[cfg.style], cfg.seed + 3,
                                 cfg.n_instructions,
                                 (acfg.min_len, acfg.max_len))
        episodes = deploy_session(policy, corpus, g, empty_bank(g), styles,
                                  acfg, seed=cfg.seed)
        out_policy = entropy_baseline(policy, episodes, acfg)
        entries.append(_eval_rows(out_policy, g, styles, geo, acfg, cfg,
                                  cfg.style, "entropy"))
    elif cfg.mode == "continual":
        src = _source_pairs(policy, g, styles, cfg, acfg)
        stages = _default_stages(cfg)
        eval_corpora = {
            sid: generate_corpus(g, styles[sid], cfg.seed + 7, cfg.n_eval,
                                 (acfg.min_len, acfg.max_len))
            for sid, _, _ in stages
        }
        out_policy, reports = run_continual(
            policy, g, styles, stages, acfg, seed=cfg.seed,
            source_pairs=src, eval_corpora=eval_corpora, geo=geo)
        for k, rep in enumerate(reports):
            agg = rep.metrics
            if agg:
                row = [g.name, f"stage{k}", rep.style,
                       str(len(eval_corpora[rep.style]))]
                for name in ("SR", "OSR", "SPL", "NE", "OE", "PL",
                             "nDTW", "SDTW", "CLS"):
                    v = agg[name]
                    if name in ("SR", "OSR", "SPL", "nDTW", "SDTW", "CLS"):
                        v *= 100.0
                    row.append(f"{v:.2f}")
                entries.append(row)
    elif cfg.mode == "hybrid":
        src = _source_pairs(policy, g, styles, cfg, acfg)
        users = [(sid, n_fb) for sid, _, n_fb in _default_stages(cfg)]
        mixed = []
        for i, (sid, _) in enumerate(users):
            mixed += generate_corpus(
                g, styles[sid], cfg.seed + 7 + i,
                max(1, cfg.n_eval // len(users)),
                (acfg.min_len, acfg.max_len))
        out_policy, _, _ = run_hybrid(policy, g, styles, users, acfg,
                                      seed=cfg.seed, source_pairs=src,
                                      eval_corpus=mixed, geo=geo)
        rows, _ = evaluate_policy(out_policy, mixed, g, styles, geo, acfg)
        entries.append(results_csv_row(g.name, "mixed", "hybrid", rows))
    else:
        raise CliError(f"unknown adaptation mode {cfg.mode!r}")
    out_policy.save(os.path.join(cfg.out, "policy.json"))
    write_results_csv(os.path.join(cfg.out, "metrics.csv"), entries)
    return 0


def cmd_ablate(cfg: RunConfig) -> int:
    write_manifest(cfg, "ablate")
    g, styles, fspace, geo = build_world(cfg)
    acfg = cfg.adapt_config()
    policy = _require_policy(cfg)
    src = _source_pairs(policy, g, styles, cfg, acfg)
    eval_corpus = generate_corpus(g, styles[cfg.style], cfg.seed + 7,
                                  cfg.n_eval, (acfg.min_len, acfg.max_len))
    path = os.path.join(cfg.out, "ablation.csv")
    with open(path, "w", encoding="utf-8", newline="") as f:
        w = csv.writer(f)
        w.writerow(["n_instr", "n_fb", "SR", "SPL", "nDTW"])
        for n_instr in cfg.grid_instr:
            for n_fb in cfg.grid_fb:
                if n_fb > n_instr:
                    continue
                bank = empty_bank(g)
                new_policy, _, _ = adapt_stage(
                    policy, g, styles, cfg.style, n_instr, n_fb, acfg,
                    seed=cfg.seed, bank=bank, source_pairs=src)
                _, agg = evaluate_policy(new_policy, eval_corpus, g, styles,
                                         geo, acfg)
                w.writerow([n_instr, n_fb, f"{agg['SR'] * 100:.2f}",
                            f"{agg['SPL'] * 100:.2f}",
                            f"{agg['nDTW'] * 100:.2f}"])
    return 0


def cmd_report(cfg: RunConfig) -> int:
    """Aggregate every metrics.csv under the run directory."""
    rows = []
    for root, _, files in sorted(os.walk(cfg.out)):
        for name in sorted(files):
            if name != "metrics.csv":
                continue
            with open(os.path.join(root, name), encoding="utf-8") as f:
                for i, row in enumerate(csv.reader(f)):
                    if i == 0:
                        header = row
                    else:
                        rows.append([os.path.relpath(root, cfg.out)] + row)
    if not rows:
        raise CliError(f"no metrics.csv files found under {cfg.out!r}")
    os.makedirs(cfg.out, exist_ok=True)
    with open(os.path.join(cfg.out, "summary.csv"), "w",
              encoding="utf-8", newline="") as f:
        w = csv.writer(f)
        w.writerow(["run"] + header)
        w.writerows(rows)
    sr_col = header.index("SR") + 1
    split_col = header.index("split") + 1
    frozen = [float(r[sr_col]) for r in rows if r[split_col] == "frozen"]
    base = frozen[0] if frozen else None
    lines = []
    for r in rows:
        sr = float(r[sr_col])
        delta = f"  dSR={sr - base:+.2f}" if base is not None else ""
        lines.append(f"{r[0]:<24} {r[split_col]:<10} SR={sr:6.2f}{delta}")
    with open(os.path.join(cfg.out, "summary.txt"), "w",
              encoding="utf-8") as f:
        f.write("\n".join(lines) + "\n")
    return 0


COMMANDS = {
    "pretrain": cmd_pretrain,
    "deploy": cmd_deploy,
    "adapt": cmd_adapt,
    "ablate": cmd_ablate,
    "report": cmd_report,
}


def make_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fbnav")
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", help="JSON config or a previous manifest")
    p.add_argument("--seed", type=int)
    p.add_argument("--env", help="environment JSON file")
    p.add_argument("--style")
    p.add_argument("--mode",
                   choices=["continual", "hybrid", "entropy", "none"])
    p.add_argument("--policy", help="input policy file")
    p.add_argument("--warm-start", dest="warm_start",
                   help="memory bank file to start deployment from")
    p.add_argument("--out", help="output directory")
    return p


def main(argv: list[str] | None = None) -> int:
    args = make_parser().parse_args(argv)
    overrides = {
        "seed": args.seed,
        "style": args.style,
        "mode": args.mode,
        "policy": args.policy,
        "warm_start": args.warm_start,
        "out": args.out,
    }
    if args.env:
        overrides["env"] = {"path": args.env}
    try:
        cfg = load_config(args.config, overrides)
        return COMMANDS[args.command](cfg)
    except Exception as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}),
              file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
