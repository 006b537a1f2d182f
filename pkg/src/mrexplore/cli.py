"""Command-line interface.

Subcommands: genmaps (emit map files), run (experiment from a config),
train (curriculum policy-gradient training), bench (policy comparison
grid), gradcheck (finite-difference verification of the policy gradient).
Report-producing commands render matplotlib figures next to their CSV
output unless --no-plots is given. Exit codes: 0 success, 1 contract or
runtime violation, 2 usage error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .config import ExperimentConfig, load_config
from .errors import MrexploreError
from .gridworld import MapKind, MapSpec, generate_map, save_map

logger = logging.getLogger(__name__)

_KINDS = [k.value for k in MapKind]
_POLICIES = ["random", "greedy", "nearest", "pursuit", "preplanned",
             "learned"]


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mrexplore",
        description="Multi-robot exploration: simulator, baselines, "
                    "attention-policy training, and benchmarks.")
    parser.add_argument("-v", "--verbose", action="store_true",
                        help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("genmaps", help="generate ground-truth maps")
    p.add_argument("--kind", choices=_KINDS, default="simple")
    p.add_argument("--count", type=int, default=1,
                   help="number of maps (seeds seed..seed+count-1)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--width-m", type=float, default=None)
    p.add_argument("--height-m", type=float, default=None)
    p.add_argument("--resolution", type=float, default=0.5)
    p.add_argument("--out", type=Path, default=Path("maps"))
    p.add_argument("--no-plots", action="store_true",
                   help="skip PNG previews")

    p = sub.add_parser("run", help="run a configured experiment")
    p.add_argument("--config", type=Path, required=True)
    p.add_argument("--out", type=Path, default=Path("out/run"))
    p.add_argument("--seed", type=int, default=None,
                   help="override run.seed")
    p.add_argument("--policy", choices=_POLICIES, default=None,
                   help="override run.policy")
    p.add_argument("--weights", type=Path, default=None,
                   help="override run.weights")
    p.add_argument("--reps", type=int, default=None,
                   help="override run.reps")
    p.add_argument("--timing", action="store_true",
                   help="measure real per-decision latency (plan_ms column; "
                        "off by default so output is byte-reproducible)")
    p.add_argument("--no-plots", action="store_true")

    p = sub.add_parser("train", help="curriculum policy-gradient training")
    p.add_argument("--config", type=Path, required=True)
    p.add_argument("--out", type=Path, default=Path("out/train"))
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--episodes", type=int, default=None,
                   help="override train.episodes")
    p.add_argument("--stage", choices=["easy", "difficult", "full", "fixed"],
                   default=None, help="override train.stage")
    p.add_argument("--ablation", action="store_true",
                   help="paired training with/without the teammate-surplus "
                        "signal on identical seeds")
    p.add_argument("--eval-episodes", type=int, default=20,
                   help="evaluation worlds per ablation variant")
    p.add_argument("--no-plots", action="store_true")

    p = sub.add_parser("bench", help="compare policies on seeded worlds")
    p.add_argument("--config", type=Path, required=True)
    p.add_argument("--out", type=Path, default=Path("out/bench"))
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--policies", default="greedy,nearest,random,pursuit,preplanned",
                   help="comma-separated policy list")
    p.add_argument("--reps", type=int, default=None,
                   help="override run.reps (worlds per policy)")
    p.add_argument("--weights", type=Path, default=None,
                   help="weights file for the learned policy")
    p.add_argument("--no-plots", action="store_true")

    p = sub.add_parser("gradcheck",
                       help="verify policy gradients by finite differences")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--graphs", type=int, default=20)
    p.add_argument("--d-model", type=int, default=8)
    p.add_argument("--layers", type=int, default=1)
    p.add_argument("--tolerance", type=float, default=1e-4)
    return parser


def _apply_overrides(exp: ExperimentConfig, args) -> ExperimentConfig:
    episode = exp.episode
    if getattr(args, "seed", None) is not None:
        episode = replace(episode, seed=args.seed)
    exp = replace(exp, episode=episode)
    if getattr(args, "policy", None):
        exp = replace(exp, policy=args.policy)
    if getattr(args, "weights", None):
        exp = replace(exp, weights=str(args.weights))
    if getattr(args, "reps", None) is not None:
        exp = replace(exp, reps=args.reps)
    if getattr(args, "timing", False):
        exp = replace(exp, timing=True)
    # Re-run the dataclass validation on the overridden combination.
    return replace(exp)


def _cmd_genmaps(args) -> int:
    args.out.mkdir(parents=True, exist_ok=True)
    for i in range(args.count):
        seed = args.seed + i
        spec = MapSpec(kind=MapKind(args.kind), seed=seed,
                       width_m=args.width_m, height_m=args.height_m,
                       resolution=args.resolution)
        grid = generate_map(spec)
        stem = f"map_{args.kind}_{seed:04d}"
        save_map(grid, args.out / f"{stem}.txt")
        if not args.no_plots:
            from . import plots
            plots.save_map_figure(grid, args.out / f"{stem}.png",
                                  title=f"{args.kind} seed={seed}")
        print(f"wrote {args.out / stem}.txt")
    return 0


def _cmd_run(args) -> int:
    from . import harness
    exp = _apply_overrides(load_config(args.config), args)
    reports, results = harness.run_experiment(exp, out_dir=args.out)
    if not args.no_plots:
        from . import plots
        from .env import ExplorationEnv
        from .gridworld import generate_map
        for rep, (report, result) in enumerate(zip(reports, results)):
            spec = replace(exp.episode.map_spec,
                           seed=exp.episode.map_spec.seed + rep)
            plots.save_run_figure(generate_map(spec), result,
                                  args.out / f"trajectory_run{rep:03d}.png")
        plots.save_metrics_figure(reports, args.out / "metrics.png")
    for report in reports:
        print(f"{report.run_id}: success={int(report.success)} "
              f"steps={report.steps} eta_t={report.eta_t:.3f} "
              f"eta_d={report.eta_d:.3f} sigma_pct={report.sigma_pct:.3f}")
    print(f"metrics: {args.out / 'metrics.csv'}")
    return 0


def _cmd_train(args) -> int:
    from . import harness
    exp = load_config(args.config)
    if args.seed is not None:
        exp = replace(exp, episode=replace(exp.episode, seed=args.seed))
    if args.stage is not None:
        exp = replace(exp, train=replace(exp.train, stage=args.stage))
    if args.ablation:
        rows = harness.run_ablation(exp, out_dir=args.out,
                                    episodes=args.episodes,
                                    eval_episodes=args.eval_episodes)
        print(f"{'variant':<18} {'S [%]':>8} {'steps':>8} {'D [m]':>10}")
        for row in rows:
            print(f"{row['variant']:<18} {row['success_pct']:>8.2f} "
                  f"{row['mean_steps']:>8.2f} {row['mean_distance_m']:>10.2f}")
        if not args.no_plots:
            from . import plots
            plots.save_ablation_figure(rows, args.out / "ablation.png")
        print(f"table: {args.out / 'ablation.csv'}")
        return 0
    net, curve = harness.train(exp, out_dir=args.out, episodes=args.episodes)
    if curve:
        last = curve[-1]
        print(f"final window: success={last['success_rate']:.2f} "
              f"steps={last['mean_steps']:.1f}")
    if not args.no_plots and curve:
        from . import plots
        plots.save_curve_figure(curve, args.out / "training_curve.png")
    print(f"weights: {args.out / 'policy.weights'}")
    return 0


def _cmd_bench(args) -> int:
    import csv

    from . import harness
    exp = _apply_overrides(load_config(args.config), args)
    if args.weights:
        exp = replace(exp, weights=str(args.weights))
    policies = [p.strip() for p in args.policies.split(",") if p.strip()]
    for p in policies:
        if p not in _POLICIES:
            raise MrexploreError(f"unknown policy {p!r} in --policies")
        if p == "learned" and not exp.weights:
            raise MrexploreError("learned policy in --policies needs "
                                 "--weights (or run.weights in the config)")
    args.out.mkdir(parents=True, exist_ok=True)
    rows = []
    all_reports = {}
    for pol in policies:
        pexp = replace(exp, policy=pol)
        reports, _results = harness.run_experiment(
            pexp, out_dir=args.out / pol, run_prefix=f"{pol}_")
        all_reports[pol] = reports
        n = len(reports)
        rows.append({
            "policy": pol,
            "episodes": n,
            "success_rate": sum(r.success for r in reports) / n,
            "mean_steps": sum(r.steps for r in reports) / n,
            "mean_eta_t": sum(r.eta_t for r in reports) / n,
            "mean_eta_d": sum(r.eta_d for r in reports) / n,
            "mean_sigma_pct": sum(r.sigma_pct for r in reports) / n,
        })
        print(f"{pol:<12} success={rows[-1]['success_rate']:.2f} "
              f"steps={rows[-1]['mean_steps']:.1f}")
    with open(args.out / "bench.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["policy", "episodes", "success_rate", "mean_steps",
                    "mean_eta_t", "mean_eta_d", "mean_sigma_pct"])
        for row in rows:
            w.writerow([row["policy"], row["episodes"],
                        f"{row['success_rate']:.6f}",
                        f"{row['mean_steps']:.6f}",
                        f"{row['mean_eta_t']:.6f}",
                        f"{row['mean_eta_d']:.6f}",
                        f"{row['mean_sigma_pct']:.6f}"])
    if not args.no_plots:
        from . import plots
        plots.save_bench_figure(rows, args.out / "bench.png")
    print(f"table: {args.out / 'bench.csv'}")
    return 0


def _cmd_gradcheck(args) -> int:
    from .harness import gradient_check
    res = gradient_check(seed=args.seed, n_graphs=args.graphs,
                         d_model=args.d_model, layers=args.layers)
    ok = res["max_rel_err"] < args.tolerance
    print(f"max relative error {res['max_rel_err']:.3e} over {args.graphs} "
          f"graphs (worst: {res['param']} on graph {res['graph']}) -> "
          f"{'OK' if ok else 'FAIL'} at tolerance {args.tolerance:g}")
    return 0 if ok else 1


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    handlers = {"genmaps": _cmd_genmaps, "run": _cmd_run,
                "train": _cmd_train, "bench": _cmd_bench,
                "gradcheck": _cmd_gradcheck}
    try:
        return handlers[args.command](args)
    except MrexploreError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
