"""Experiment orchestration: the distance-before-crash methodology.

An experiment trains four policies for one transfer scenario — a random
lower bound, a source-only policy (no adaptation), an adapted policy
(penalty weight chosen on validation worlds), and a target-expert upper
bound — then evaluates all of them on the same held-out target worlds
with the same per-episode noise seeds, so differences are attributable to
the policy alone. Reports are plain CSV/JSON and reproduce byte-for-byte
from the same config.
"""
import csv
import dataclasses
import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from . import dan, imitation, net as nets, scenarios, sim
from .errors import InvalidArgumentError

POLICY_KINDS = ("random", "source_only", "dan_adapted", "target_oracle")
CONFIG_SCHEMA_VERSION = 1


@dataclass(frozen=True)
class ExperimentConfig:
    scenario: str = "sanity_gamma"
    density_regime: str = "low"  # "low" or "high"
    demo_meters: float = 2000.0
    demo_episode_cap: float = 40.0
    n_target_scans: int = 4000
    n_eval_worlds: int = 50
    n_val_worlds: int = 12
    eval_max_dist: float = 60.0
    lambda_grid: tuple = (0.1, 0.3, 1.0)
    eval_episodes_per_world: int = 3
    source_steps: int = 6000
    polish_steps: int = 0
    adapt_steps: int = 6000
    batch_size: int = 64
    base_lr: float = 0.05
    polish_lr: float = 0.01
    adapt_lr: float = 0.05
    adapt_lr_multiplier: float = 1.0
    k_bins: int = 9
    demo_seed: int = 101
    target_scan_seed: int = 202
    train_seed: int = 303
    val_world_seed: int = 404
    eval_world_seed: int = 505
    eval_episode_seed: int = 606
    oracle_demo_seed: int = 707

    def to_json(self):
        doc = {"schema_version": CONFIG_SCHEMA_VERSION}
        doc.update(dataclasses.asdict(self))
        doc["lambda_grid"] = list(self.lambda_grid)
        return json.dumps(doc, indent=1, sort_keys=True) + "\n"

    @classmethod
    def from_file(cls, path):
        with open(path) as f:
            doc = json.load(f)
        if doc.pop("schema_version", CONFIG_SCHEMA_VERSION) != CONFIG_SCHEMA_VERSION:
            raise InvalidArgumentError(f"{path}: unsupported config schema")
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise InvalidArgumentError(f"{path}: unknown config keys {sorted(unknown)}")
        if "lambda_grid" in doc:
            doc["lambda_grid"] = tuple(doc["lambda_grid"])
        return cls(**doc)


@dataclass
class PolicyCard:
    kind: str
    checkpoint: str = ""
    episodes: int = 0
    mean_distance: float = 0.0
    trees_passed: int = 0
    trees_hit: int = 0

    @property
    def avoid_rate(self):
        total = self.trees_passed + self.trees_hit
        return self.trees_passed / total if total else 1.0


def sign_test_greater(x, y):
    """One-sided paired sign test p-value for the hypothesis x > y.

    Ties are dropped; p = P(Binomial(n, 1/2) >= wins).
    """
    wins = sum(1 for a, b in zip(x, y) if a > b)
    n = sum(1 for a, b in zip(x, y) if a != b)
    if n == 0:
        return 1.0
    return math.fsum(
        math.comb(n, k) for k in range(wins, n + 1)
    ) * 0.5**n


def _environments(scenario, regime):
    def density(side):
        if regime == "high" and side.density == scenarios.LOW_DENSITY:
            return scenarios.HIGH_DENSITY
        return side.density

    src = sim.Environment(scenario.source.cfg, density(scenario.source))
    tgt = sim.Environment(scenario.target.cfg, density(scenario.target))
    return src, tgt


def evaluate_policy(policy, env, world_seed, episode_seed, n_worlds, max_dist,
                    episodes_per_world=1):
    """Paired evaluation; episode j of world i uses seeds
    (world_seed+i, episode_seed + i*episodes_per_world + j), so every
    policy sees identical worlds and noise streams.

    Returns a flat list of (world_index, result) ordered by world, then
    episode.
    """
    results = []
    for i in range(n_worlds):
        world = env.make_world(world_seed + i)
        for j in range(episodes_per_world):
            res = sim.run_episode(
                policy, world, env.cfg, max_dist,
                episode_seed + i * episodes_per_world + j,
                v_max=env.v_max, r_drone=env.r_drone,
            )
            results.append((i, res))
    return results


def _mean_distance(results):
    return math.fsum(r.distance_flown for _, r in results) / len(results)


def _world_means(results):
    """Per-world mean distance (the paired unit for the sign test)."""
    sums, counts = {}, {}
    for i, r in results:
        sums[i] = sums.get(i, 0.0) + r.distance_flown
        counts[i] = counts.get(i, 0) + 1
    return [sums[i] / counts[i] for i in sorted(sums)]


def run_experiment(cfg, outdir):
    """Full pipeline; writes episodes.csv, summary.{csv,json}, checkpoints."""
    os.makedirs(outdir, exist_ok=True)
    with open(os.path.join(outdir, "resolved_config.json"), "w", newline="\n") as f:
        f.write(cfg.to_json())
    scenario = scenarios.build_scenario(cfg.scenario)
    src_env, tgt_env = _environments(scenario, cfg.density_regime)
    v_max = src_env.v_max

    multipliers = dict(nets.DEFAULT_ROLE_MULTIPLIERS)
    multipliers["adapt"] = cfg.adapt_lr_multiplier

    def dan_cfg(lam, steps, lr, seed, mults=None):
        return dan.DanConfig(
            lam=lam, batch_size=cfg.batch_size, steps=steps, base_lr=lr,
            seed=seed, role_multipliers=mults or multipliers,
        )

    plain = {"adapt": 1.0}  # supervised fits ignore the adapt multiplier

    def fit_supervised(scans, labels, init_seed):
        """Plain fit at base_lr, optionally followed by a low-lr polish."""
        net = nets.make_policy_net(scans.shape[1], cfg.k_bins, seed=init_seed)
        net, hist = dan.train_dan(
            net, scans, labels, scans[:2],
            dan_cfg(0.0, cfg.source_steps, cfg.base_lr, cfg.train_seed, plain),
        )
        if cfg.polish_steps:
            net, hist2 = dan.train_dan(
                net, scans, labels, scans[:2],
                dan_cfg(0.0, cfg.polish_steps, cfg.polish_lr,
                        cfg.train_seed + 1, plain),
            )
            hist = hist.extend(hist2)
        return net, hist

    # 1. labeled source demonstrations (short episodes => many worlds)
    demos = imitation.behavior_clone(
        src_env, cfg.demo_meters, cfg.demo_seed,
        episode_max_dist=cfg.demo_episode_cap,
        label_space=scenario.source.label_space,
    )
    labels = demos.labels(cfg.k_bins, v_max)
    source_scans = imitation.center_scans(demos.scans)

    # 2. unlabeled target scans from random rollouts, resampled to source width
    raw_target = imitation.collect_random_scans(
        tgt_env, cfg.n_target_scans, cfg.target_scan_seed
    )
    target_scans = imitation.center_scans(
        imitation.resample_scan(raw_target, demos.width)
    )

    # 3. source_only and the adapted candidates, all from the identical
    #    network init; the penalty weight is chosen on validation worlds
    source_net, src_hist = fit_supervised(source_scans, labels, cfg.train_seed)
    src_hist.write_csv(os.path.join(outdir, "history_source_only.csv"))

    val_scores = {}
    candidates = {}
    for lam in cfg.lambda_grid:
        init = nets.make_policy_net(
            source_scans.shape[1], cfg.k_bins, seed=cfg.train_seed
        )
        candidate, hist = dan.train_dan(
            init, source_scans, labels, target_scans,
            dan_cfg(lam, cfg.adapt_steps, cfg.adapt_lr, cfg.train_seed),
        )
        res = evaluate_policy(
            imitation.net_policy(candidate, v_max), tgt_env,
            cfg.val_world_seed, cfg.val_world_seed + 9000,
            cfg.n_val_worlds, cfg.eval_max_dist,
        )
        val_scores[lam] = _mean_distance(res)
        candidates[lam] = (candidate, hist)
    best_lam = max(cfg.lambda_grid, key=lambda l: (val_scores[l], -l))
    dan_net, dan_hist = candidates[best_lam]
    dan_hist.write_csv(os.path.join(outdir, "history_dan_adapted.csv"))

    # 4. target-expert upper bound
    oracle_demos = imitation.behavior_clone(
        tgt_env, cfg.demo_meters, cfg.oracle_demo_seed,
        episode_max_dist=cfg.demo_episode_cap,
    )
    oracle_net, _ = fit_supervised(
        imitation.center_scans(oracle_demos.scans),
        oracle_demos.labels(cfg.k_bins, v_max),
        cfg.train_seed,
    )

    ckpts = {
        "source_only": source_net,
        "dan_adapted": dan_net,
        "target_oracle": oracle_net,
    }
    for kind, net in ckpts.items():
        nets.save_checkpoint(net, os.path.join(outdir, f"{kind}.ckpt"))

    # 5. paired evaluation of all four policies on identical worlds
    policies = {
        "random": sim.random_policy(v_max, cfg.eval_episode_seed + 77_000),
        "source_only": imitation.net_policy(source_net, v_max),
        "dan_adapted": imitation.net_policy(dan_net, v_max),
        "target_oracle": imitation.net_policy(oracle_net, v_max),
    }
    all_results = {}
    for kind in POLICY_KINDS:
        all_results[kind] = evaluate_policy(
            policies[kind], tgt_env,
            cfg.eval_world_seed, cfg.eval_episode_seed,
            cfg.n_eval_worlds, cfg.eval_max_dist,
            cfg.eval_episodes_per_world,
        )

    # 6. reports
    with open(os.path.join(outdir, "episodes.csv"), "w", newline="\n") as f:
        w = csv.writer(f)
        w.writerow(
            ["policy", "world_index", "world_seed", "episode_seed",
             "distance_flown", "crashed", "trees_passed", "trees_hit"]
        )
        k = cfg.eval_episodes_per_world
        for kind in POLICY_KINDS:
            for n, (i, r) in enumerate(all_results[kind]):
                w.writerow(
                    [kind, i, cfg.eval_world_seed + i,
                     cfg.eval_episode_seed + i * k + n % k,
                     repr(r.distance_flown), int(r.crashed),
                     r.trees_passed, r.trees_hit]
                )

    cards = {}
    for kind in POLICY_KINDS:
        rs = all_results[kind]
        cards[kind] = PolicyCard(
            kind=kind,
            checkpoint=f"{kind}.ckpt" if kind != "random" else "",
            episodes=len(rs),
            mean_distance=_mean_distance(rs),
            trees_passed=sum(r.trees_passed for _, r in rs),
            trees_hit=sum(r.trees_hit for _, r in rs),
        )

    dists = {k: _world_means(all_results[k]) for k in POLICY_KINDS}
    p_values = {
        "dan_gt_source": sign_test_greater(dists["dan_adapted"], dists["source_only"]),
        "source_gt_random": sign_test_greater(dists["source_only"], dists["random"]),
        "oracle_gt_dan": sign_test_greater(dists["target_oracle"], dists["dan_adapted"]),
    }

    summary = {
        "schema_version": 1,
        "scenario": cfg.scenario,
        "density_regime": cfg.density_regime,
        "lambda_selected": best_lam,
        "lambda_validation_means": {repr(l): val_scores[l] for l in cfg.lambda_grid},
        "policies": {
            k: {
                "episodes": c.episodes,
                "mean_distance": c.mean_distance,
                "trees_passed": c.trees_passed,
                "trees_hit": c.trees_hit,
                "avoid_rate": c.avoid_rate,
            }
            for k, c in cards.items()
        },
        "p_values": p_values,
    }
    with open(os.path.join(outdir, "summary.json"), "w", newline="\n") as f:
        json.dump(summary, f, indent=1, sort_keys=True)
        f.write("\n")
    with open(os.path.join(outdir, "summary.csv"), "w", newline="\n") as f:
        w = csv.writer(f)
        w.writerow(["policy", "episodes", "mean_distance", "trees_passed",
                    "trees_hit", "avoid_rate"])
        for kind in POLICY_KINDS:
            c = cards[kind]
            w.writerow([kind, c.episodes, repr(c.mean_distance),
                        c.trees_passed, c.trees_hit, repr(c.avoid_rate)])
    return summary


def write_strip_chart(path, series, width=900, height=220, title=""):
    """Minimal deterministic SVG line chart: one polyline per named series."""
    names = list(series)
    n = max((len(v) for v in series.values()), default=1)
    all_vals = [v for vals in series.values() for v in vals] or [0.0]
    lo, hi = min(all_vals), max(all_vals)
    if hi - lo < 1e-9:
        hi = lo + 1.0
    colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"]
    pad = 30
    def sx(i):
        return pad + (width - 2 * pad) * (i / max(n - 1, 1))
    def sy(v):
        return height - pad - (height - 2 * pad) * ((v - lo) / (hi - lo))
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
        f'<text x="{pad}" y="18" font-size="13">{title}</text>',
        f'<line x1="{pad}" y1="{height - pad}" x2="{width - pad}" '
        f'y2="{height - pad}" stroke="#888"/>',
    ]
    for ci, name in enumerate(names):
        vals = series[name]
        pts = " ".join(f"{sx(i):.2f},{sy(v):.2f}" for i, v in enumerate(vals))
        color = colors[ci % len(colors)]
        parts.append(
            f'<polyline fill="none" stroke="{color}" stroke-width="1.2" '
            f'points="{pts}"/>'
        )
        parts.append(
            f'<text x="{width - pad - 110}" y="{18 + 14 * ci}" font-size="12" '
            f'fill="{color}">{name}</text>'
        )
    parts.append("</svg>")
    with open(path, "w", newline="\n") as f:
        f.write("\n".join(parts) + "\n")


def replay(ckpt_a, ckpt_b, world, cfg, max_dist, seed, out_csv=None, out_svg=None,
           v_max=1.0):
    """Drive an episode with policy A; log B's counterfactual commands.

    Both policies see the identical frames; only A's commands move the
    drone. Returns the per-tick (command_a, command_b) log.
    """
    net_a = nets.load_checkpoint(ckpt_a)
    net_b = nets.load_checkpoint(ckpt_b)
    if net_a.input_dim != net_b.input_dim:
        raise InvalidArgumentError("checkpoints expect different scan widths")
    pol_a = imitation.net_policy(net_a, v_max)
    pol_b = imitation.net_policy(net_b, v_max)
    res = sim.run_episode(pol_a, world, cfg, max_dist, seed, v_max=v_max,
                          keep_scans=True)
    cmd_b = [pol_b(scan, None) for scan in res.scans]
    rows = list(zip(range(len(res.commands)), res.commands, cmd_b))
    if out_csv:
        with open(out_csv, "w", newline="\n") as f:
            w = csv.writer(f)
            w.writerow(["tick", "command_a", "command_b"])
            for t, a, b in rows:
                w.writerow([t, repr(a), repr(b)])
    if out_svg:
        write_strip_chart(
            out_svg,
            {"executed (A)": res.commands, "counterfactual (B)": cmd_b},
            title="per-tick lateral commands on identical frames",
        )
    return res, rows


def summarize(summary_paths, out_csv=None):
    """Aggregate several experiment summaries into one table plus totals."""
    if not summary_paths:
        raise InvalidArgumentError("no summary files given")
    rows = []
    for path in summary_paths:
        with open(path) as f:
            doc = json.load(f)
        if doc.get("schema_version") != 1 or "policies" not in doc:
            raise InvalidArgumentError(f"{path}: not an experiment summary")
        for kind in POLICY_KINDS:
            p = doc["policies"][kind]
            rows.append({
                "scenario": doc["scenario"],
                "density": doc["density_regime"],
                "policy": kind,
                "episodes": p["episodes"],
                "mean_distance": p["mean_distance"],
                "avoid_rate": p["avoid_rate"],
                "p_dan_gt_source": doc["p_values"]["dan_gt_source"],
            })
    totals = []
    for kind in POLICY_KINDS:
        sub = [r for r in rows if r["policy"] == kind]
        n = sum(r["episodes"] for r in sub)
        totals.append({
            "scenario": "TOTAL",
            "density": "-",
            "policy": kind,
            "episodes": n,
            "mean_distance": math.fsum(
                r["mean_distance"] * r["episodes"] for r in sub
            ) / n,
            "avoid_rate": math.fsum(
                r["avoid_rate"] * r["episodes"] for r in sub
            ) / n,
            "p_dan_gt_source": "",
        })
    table = rows + totals
    if out_csv:
        with open(out_csv, "w", newline="\n") as f:
            w = csv.DictWriter(f, fieldnames=list(table[0]))
            w.writeheader()
            w.writerows(table)
    return table
