"""Command-line entry point."""
import argparse
import sys

import numpy as np

from . import dan, harness, imitation, net as nets, scenarios, sim


def _cmd_scenario(args):
    if args.action == "list":
        for name in scenarios.list_scenarios():
            print(name)
    else:
        print(scenarios.build_scenario(args.name).to_json(), end="")


def _cmd_world_gen(args):
    world = sim.generate_world(
        args.density, args.half_width, args.length, args.seed
    )
    sim.save_world(world, args.out)
    print(f"{args.out}: {len(world.trees)} trees over "
          f"{2 * args.half_width:.0f} x {args.length:.0f} m")


def _side(scenario_name, side):
    scn = scenarios.build_scenario(scenario_name)
    ds = scn.source if side == "source" else scn.target
    return scn, sim.Environment(ds.cfg, ds.density)


def _cmd_demos(args):
    scn, env = _side(args.scenario, args.side)
    if args.random:
        scans = imitation.collect_random_scans(env, args.count, args.seed)
        ds = imitation.Dataset(scans, np.zeros(len(scans)), args.side)
    else:
        label_space = (
            scn.source.label_space if args.side == "source" else "fine"
        )
        ds = imitation.behavior_clone(
            env, args.meters, args.seed, label_space=label_space
        )
    imitation.save_dataset(ds, args.out)
    print(f"{args.out}: {len(ds)} records ({ds.label_space})")


def _cmd_train(args):
    demos = imitation.load_dataset(args.demos)
    labels = demos.labels(args.k_bins, 1.0)
    net = nets.make_policy_net(demos.width, args.k_bins, seed=args.seed)
    if args.target_scans:
        target = imitation.load_dataset(args.target_scans)
        target_x = imitation.resample_scan(target.scans, demos.width)
    else:
        target_x = demos.scans[:2]
        args.lam = 0.0
    cfg = dan.DanConfig(
        lam=args.lam, batch_size=args.batch_size, steps=args.steps,
        base_lr=args.lr, seed=args.seed,
    )
    trained, history = dan.train_dan(net, demos.scans, labels, target_x, cfg)
    nets.save_checkpoint(trained, args.out)
    if args.history:
        history.write_csv(args.history)
    last = history.records[-1]
    print(f"{args.out}: {args.steps} steps, final loss {last.total:.4f} "
          f"(ce {last.ce:.4f})")


def _cmd_evaluate(args):
    _, env = _side(args.scenario, args.side)
    net = nets.load_checkpoint(args.ckpt)
    results = harness.evaluate_policy(
        imitation.net_policy(net, env.v_max), env,
        args.world_seed, args.episode_seed, args.worlds, args.max_dist,
    )
    mean = sum(r.distance_flown for _, r in results) / len(results)
    passed = sum(r.trees_passed for _, r in results)
    hit = sum(r.trees_hit for _, r in results)
    print(f"mean distance before crash: {mean:.2f} m over {len(results)} worlds; "
          f"trees passed {passed}, hit {hit}")


def _cmd_experiment(args):
    cfg = harness.ExperimentConfig.from_file(args.config)
    summary = harness.run_experiment(cfg, args.out)
    for kind in harness.POLICY_KINDS:
        p = summary["policies"][kind]
        print(f"{kind:>14}: mean {p['mean_distance']:7.2f} m, "
              f"avoid rate {p['avoid_rate']:.3f}")
    print(f"sign test (adapted > source-only): "
          f"p = {summary['p_values']['dan_gt_source']:.4f}")


def _cmd_replay(args):
    _, env = _side(args.scenario, args.side)
    world = sim.load_world(args.world)
    res, rows = harness.replay(
        args.ckpt_a, args.ckpt_b, world, env.cfg, args.max_dist, args.seed,
        out_csv=args.out_csv, out_svg=args.out_svg, v_max=env.v_max,
    )
    diffs = [abs(a - b) for _, a, b in rows]
    mean_delta = sum(diffs) / len(diffs) if diffs else 0.0
    print(f"{len(rows)} ticks, flew {res.distance_flown:.1f} m, "
          f"mean |command delta| = {mean_delta:.4f}")


def _cmd_summarize(args):
    table = harness.summarize(args.summaries, out_csv=args.out)
    for row in table:
        print("{scenario:>12} {density:>5} {policy:>14} "
              "{episodes:>5} {mean_distance:>9.2f}".format(
                  **{**row, "mean_distance": float(row["mean_distance"])}))


def build_parser():
    p = argparse.ArgumentParser(prog="adaflight")
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("scenario", help="list or show transfer scenarios")
    sp.add_argument("action", choices=["list", "show"])
    sp.add_argument("name", nargs="?", default="sanity_gamma")
    sp.set_defaults(func=_cmd_scenario)

    wp = sub.add_parser("world", help="world utilities")
    wsub = wp.add_subparsers(dest="world_cmd", required=True)
    wg = wsub.add_parser("gen", help="generate a forest world file")
    wg.add_argument("--density", type=float, default=1.0 / 36.0)
    wg.add_argument("--half-width", type=float, default=10.0)
    wg.add_argument("--length", type=float, default=200.0)
    wg.add_argument("--seed", type=int, default=0)
    wg.add_argument("--out", required=True)
    wg.set_defaults(func=_cmd_world_gen)

    dp = sub.add_parser("demos", help="collect expert or random-rollout data")
    dsub = dp.add_subparsers(dest="demos_cmd", required=True)
    dc = dsub.add_parser("collect")
    dc.add_argument("--scenario", default="sanity_gamma")
    dc.add_argument("--side", choices=["source", "target"], default="source")
    dc.add_argument("--meters", type=float, default=1000.0)
    dc.add_argument("--random", action="store_true",
                    help="unlabeled random-policy scans instead of expert demos")
    dc.add_argument("--count", type=int, default=4000,
                    help="scan count when --random")
    dc.add_argument("--seed", type=int, default=0)
    dc.add_argument("--out", required=True)
    dc.set_defaults(func=_cmd_demos)

    tp = sub.add_parser("train", help="train a policy network")
    tp.add_argument("--demos", required=True)
    tp.add_argument("--target-scans", default=None,
                    help="unlabeled target dataset; omits the penalty if absent")
    tp.add_argument("--lam", type=float, default=0.3)
    tp.add_argument("--steps", type=int, default=1500)
    tp.add_argument("--batch-size", type=int, default=32)
    tp.add_argument("--lr", type=float, default=0.01)
    tp.add_argument("--k-bins", type=int, default=9)
    tp.add_argument("--seed", type=int, default=0)
    tp.add_argument("--history", default=None, help="training-history CSV path")
    tp.add_argument("--out", required=True)
    tp.set_defaults(func=_cmd_train)

    ep = sub.add_parser("evaluate", help="distance-before-crash evaluation")
    ep.add_argument("--ckpt", required=True)
    ep.add_argument("--scenario", default="sanity_gamma")
    ep.add_argument("--side", choices=["source", "target"], default="target")
    ep.add_argument("--worlds", type=int, default=50)
    ep.add_argument("--max-dist", type=float, default=60.0)
    ep.add_argument("--world-seed", type=int, default=505)
    ep.add_argument("--episode-seed", type=int, default=606)
    ep.set_defaults(func=_cmd_evaluate)

    xp = sub.add_parser("experiment", help="full transfer experiment")
    xsub = xp.add_subparsers(dest="experiment_cmd", required=True)
    xr = xsub.add_parser("run")
    xr.add_argument("--config", required=True)
    xr.add_argument("--out", required=True)
    xr.set_defaults(func=_cmd_experiment)

    rp = sub.add_parser("replay", help="side-by-side command log of two policies")
    rp.add_argument("--ckpt-a", required=True)
    rp.add_argument("--ckpt-b", required=True)
    rp.add_argument("--world", required=True)
    rp.add_argument("--scenario", default="sanity_gamma")
    rp.add_argument("--side", choices=["source", "target"], default="target")
    rp.add_argument("--max-dist", type=float, default=60.0)
    rp.add_argument("--seed", type=int, default=0)
    rp.add_argument("--out-csv", default=None)
    rp.add_argument("--out-svg", default=None)
    rp.set_defaults(func=_cmd_replay)

    sm = sub.add_parser("summarize", help="aggregate experiment summaries")
    sm.add_argument("summaries", nargs="+")
    sm.add_argument("--out", default=None)
    sm.set_defaults(func=_cmd_summarize)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    return args.func(args) or 0


if __name__ == "__main__":
    sys.exit(main())
