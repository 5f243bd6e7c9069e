"""``miace`` command line: a flat-file pipeline.

    miace gen --out site/
    miace train --data site/dataset.csv --out sig.json --init ranked-kmeans
    miace detect --signature sig.json --stats sig.stats.json --sweeps site/sweeps.csv --out map.csv
    miace alarms --map map.csv --out alarms.csv
    miace score --alarms alarms.csv --truth site/truth.csv --out roc.csv
    miace cv --data site/dataset.csv --sweeps site/sweeps.csv --truth site/truth.csv --out cv/
    miace bench --sizes "4000,4000,40,8" --out bench.csv

Any option may also come from a JSON object given with ``--config``; its
keys are option names (``rank_weights`` or ``rank-weights``). Options on the
command line win over the file.

Exit status: 0 on success, 1 for usage or validation errors, 2 for I/O errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .ace import ConfidenceMap, load_confidence_map, load_signature, save_confidence_map, save_signature, score_sweep
from .alarms import DEFAULT_BANDWIDTH, DEFAULT_HALO, DEFAULT_THRESHOLD, generate_alarms, load_alarms, save_alarms
from .bench import run_bench, save_bench
from .data import load_dataset, load_sweeps, save_dataset, save_sweeps
from .evaluation import (
    SUBSETS,
    AlarmConfig,
    cross_validate,
    label_alarms,
    load_truth,
    roc,
    save_roc,
    save_truth,
)
from .exceptions import ConfigError, MiaceError
from .initializers import METHODS
from .synth import SynthConfig, generate_site
from .training import TrainConfig, train
from .whitening import load_stats, save_stats

log = logging.getLogger("miace")

INIT_CHOICES = tuple(m.replace("_", "-") for m in METHODS)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def _weights(text):
    try:
        vals = tuple(float(v) for v in str(text).split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected three comma-separated numbers, got {text!r}") from None
    if len(vals) != 3:
        raise argparse.ArgumentTypeError(f"expected three comma-separated numbers, got {text!r}")
    return vals


def _sizes(text):
    out = []
    for chunk in str(text).split(";"):
        if not chunk.strip():
            continue
        try:
            vals = tuple(int(v) for v in chunk.split(","))
        except ValueError:
            raise argparse.ArgumentTypeError(f"bad size {chunk!r}") from None
        if len(vals) != 4:
            raise argparse.ArgumentTypeError(f"a size is n_pos,n_neg,n_pos_bags,d; got {chunk!r}")
        out.append(vals)
    if not out:
        raise argparse.ArgumentTypeError("no sizes given")
    return out


def _add_train_options(p):
    p.add_argument("--init", choices=INIT_CHOICES, default="original")
    p.add_argument("--k", type=int, default=5, help="cluster count for the clustering initializers")
    p.add_argument("--rank-weights", type=_weights, default=(1.0, 1.0, 1.0),
                   help="positive-bag, positive-instance and negative-instance rank weights, "
                        "comma separated; raise the first when positive bags differ a lot in size, "
                        "so a few large bags cannot dominate the instance term")
    p.add_argument("--epsilon", type=float, default=1e-6, help="relative covariance ridge")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-iter", type=int, default=100)
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--no-optimize", action="store_true", help="keep the initial signature")


def _add_alarm_options(p):
    p.add_argument("--bandwidth", type=float, default=DEFAULT_BANDWIDTH)
    p.add_argument("--merge-radius", type=float, default=None)
    p.add_argument("--threshold", type=float, default=DEFAULT_THRESHOLD,
                   help="confidences below this do not seed or weight mean shift")
    p.add_argument("--halo", type=float, default=DEFAULT_HALO, help="halo distance in meters")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="miace", description="MI-ACE target signature learning and detection")
    parser.add_argument("--version", action="version", version=f"miace {__version__}")
    parser.add_argument("--config", type=Path, help="JSON file of option defaults")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("gen", help="write a synthetic site")
    p.add_argument("--out", type=Path, required=True, help="output directory")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--d", type=int, default=8)
    p.add_argument("--lanes", type=int, default=5)
    p.add_argument("--grids-per-lane", type=int, default=4)
    p.add_argument("--snr", type=float, default=3.0)
    p.add_argument("--samples-per-sweep", type=int, default=400)
    p.add_argument("--background-condition", type=float, default=100.0)
    p.add_argument("--target-signature-seed", type=int, default=None)

    p = sub.add_parser("train", help="learn a signature from a dataset CSV")
    p.add_argument("--data", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True, help="signature JSON")
    p.add_argument("--stats-out", type=Path, default=None,
                   help="background statistics JSON (default: <out stem>.stats.json)")
    _add_train_options(p)

    p = sub.add_parser("detect", help="score sweeps into a confidence map")
    p.add_argument("--signature", type=Path, required=True)
    p.add_argument("--stats", type=Path, required=True)
    p.add_argument("--sweeps", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("alarms", help="turn a confidence map into alarms")
    p.add_argument("--map", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    _add_alarm_options(p)

    p = sub.add_parser("score", help="ROC of alarms against ground truth")
    p.add_argument("--alarms", type=Path, required=True)
    p.add_argument("--truth", type=Path, required=True)
    p.add_argument("--subset", choices=SUBSETS, default="all")
    p.add_argument("--area", type=float, default=None, help="surveyed area; reports false alarms per unit area")
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("cv", help="lane-held-out cross validation, end to end")
    p.add_argument("--data", type=Path, required=True)
    p.add_argument("--sweeps", type=Path, required=True)
    p.add_argument("--truth", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True, help="output directory")
    p.add_argument("--subset", choices=SUBSETS, default="all")
    _add_train_options(p)
    _add_alarm_options(p)

    p = sub.add_parser("bench", help="time the four initializers")
    p.add_argument("--sizes", type=_sizes, default=[(4000, 4000, 40, 8)],
                   help='semicolon-separated "n_pos,n_neg,n_pos_bags,d" tuples')
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--trials", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--block", type=int, default=1, help="candidates scored per objective call")
    p.add_argument("--out", type=Path, required=True)
    return parser


# ---------------------------------------------------------------------------
# config file


def _subparser(parser, name):
    for action in parser._subparsers._group_actions:
        if isinstance(action, argparse._SubParsersAction):
            return action.choices[name]
    raise KeyError(name)


def _config_value(action, key, value, path):
    if isinstance(value, list):
        if action.type is _sizes:
            value = ";".join(",".join(str(v) for v in row) for row in value)
        else:
            value = ",".join(str(v) for v in value)
    if action.type is not None and value is not None and not isinstance(value, bool):
        try:
            value = action.type(str(value))
        except (argparse.ArgumentTypeError, ValueError) as exc:
            raise ConfigError(f"{path}: option {key!r}: {exc}") from None
    if action.choices is not None and value not in action.choices:
        raise ConfigError(f"{path}: option {key!r} must be one of {sorted(action.choices)}")
    return value


def _apply_config(parser, argv, path):
    """Install the JSON object at ``path`` as defaults of the chosen subcommand."""
    command = next((a for a in argv if a in COMMANDS), None)
    if command is None:
        return
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    if not isinstance(cfg, dict):
        raise ConfigError(f"{path}: expected a JSON object")
    sub = _subparser(parser, command)
    actions = {a.dest: a for a in sub._actions if a.dest != "help"}
    defaults = {}
    for key, value in cfg.items():
        dest = key.replace("-", "_")
        if dest not in actions:
            raise ConfigError(f"{path}: unknown option {key!r} for '{command}'")
        action = actions[dest]
        defaults[dest] = _config_value(action, key, value, path)
        action.required = False
    sub.set_defaults(**defaults)


def _find_config(argv):
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config", type=Path)
    known, _ = pre.parse_known_args(argv)
    return known.config


# ---------------------------------------------------------------------------
# commands


def _train_config(args) -> TrainConfig:
    return TrainConfig(
        max_iterations=args.max_iter,
        convergence_tol=args.tol,
        initializer=args.init,
        cluster_count=args.k,
        rank_weights=tuple(args.rank_weights),
        seed=args.seed,
        epsilon=args.epsilon,
        optimize=not args.no_optimize,
    )


def _alarm_config(args) -> AlarmConfig:
    return AlarmConfig(args.bandwidth, args.merge_radius, args.threshold, args.halo)


def cmd_gen(args):
    cfg = SynthConfig(
        d=args.d,
        lanes=args.lanes,
        grids_per_lane=args.grids_per_lane,
        snr=args.snr,
        samples_per_sweep=args.samples_per_sweep,
        background_condition=args.background_condition,
        target_signature_seed=args.target_signature_seed,
        seed=args.seed,
    )
    site = generate_site(cfg)
    out = args.out
    out.mkdir(parents=True, exist_ok=True)
    save_dataset(site.dataset, out / "dataset.csv")
    save_sweeps(site.sweeps, out / "sweeps.csv")
    save_truth(site.truth, out / "truth.csv")
    with open(out / "planted.json", "w") as fh:
        json.dump(
            {
                "signature_raw": site.planted_signature.tolist(),
                "signature_whitened": site.planted_whitened.tolist(),
                "background_mean": site.background_mean.tolist(),
                "background_covariance": site.background_covariance.tolist(),
                "seed": cfg.seed,
            },
            fh,
            indent=1,
        )
    print(f"wrote {len(site.dataset.bags)} bags, {len(site.sweeps)} sweeps, {len(site.truth)} targets to {out}")


def cmd_train(args):
    dataset = load_dataset(args.data)
    result = train(dataset, _train_config(args))
    stats_out = args.stats_out or args.out.with_name(args.out.stem + ".stats.json")
    save_stats(result.stats, stats_out)
    sig = result.optimized_signature
    save_signature(args.out, sig, initializer=result.init.method, objective_trace=result.objective_trace)
    print(
        f"{result.init.method}: objective {result.objective_trace[0]:.6f} -> {result.final_objective:.6f} "
        f"in {result.iterations_run} iterations (init {result.init_wall_time * 1e3:.1f} ms, "
        f"optimize {result.opt_wall_time * 1e3:.1f} ms)"
    )


def cmd_detect(args):
    sig, _ = load_signature(args.signature)
    stats = load_stats(args.stats)
    sig.check(stats)
    sweeps = load_sweeps(args.sweeps)
    maps = [score_sweep(stats, sig, sw) for sw in sweeps]
    cmap = ConfidenceMap.concat(maps)
    save_confidence_map(cmap, args.out)
    print(f"scored {len(cmap)} samples over {len(sweeps)} sweeps")


def cmd_alarms(args):
    cmap = load_confidence_map(args.map)
    cfg = _alarm_config(args)
    alarms = generate_alarms(cmap, cfg.bandwidth, cfg.merge_radius, cfg.conf_threshold, cfg.d_halo)
    save_alarms(alarms, args.out)
    print(f"{len(alarms)} alarms")


def cmd_score(args):
    alarms = load_alarms(args.alarms)
    truth = load_truth(args.truth)
    curve = roc(label_alarms(alarms, truth), truth, args.subset, area=args.area)
    save_roc(curve, args.out)
    print(f"subset={args.subset} targets={curve.n_targets} auc={curve.auc:.4f} final_pd={curve.pd[-1]:.4f}")


def cmd_cv(args):
    dataset = load_dataset(args.data)
    sweeps = load_sweeps(args.sweeps)
    truth = load_truth(args.truth)
    res = cross_validate(dataset, sweeps, truth, _train_config(args), _alarm_config(args))
    out = args.out
    out.mkdir(parents=True, exist_ok=True)
    save_alarms(res.alarms_init, out / "alarms_init.csv")
    save_alarms(res.alarms_opt, out / "alarms_opt.csv")
    r_init, r_opt = res.roc_init(args.subset), res.roc_opt(args.subset)
    save_roc(r_init, out / "roc_init.csv")
    save_roc(r_opt, out / "roc_opt.csv")
    for lane in res.skipped_lanes:
        print(f"skipped lane {lane}")
    print(f"{len(res.folds)} folds, subset={args.subset}: auc init={r_init.auc:.4f} optimized={r_opt.auc:.4f}")


def cmd_bench(args):
    report = run_bench(args.sizes, K=args.k, trials=args.trials, seed=args.seed, block=args.block)
    save_bench(report, args.out)
    for size, ratios in report.speedups().items():
        parts = " ".join(f"{m}={v:.1f}x" for m, v in ratios.items())
        print(f"{size}: speedup over original {parts}")


COMMANDS = {
    "gen": cmd_gen,
    "train": cmd_train,
    "detect": cmd_detect,
    "alarms": cmd_alarms,
    "score": cmd_score,
    "cv": cmd_cv,
    "bench": cmd_bench,
}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        config = _find_config(argv)
        if config is not None:
            _apply_config(parser, argv, config)
        args = parser.parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        COMMANDS[args.command](args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"miace: I/O error: {exc}", file=sys.stderr)
        return 2
    except (MiaceError, ValueError) as exc:
        print(f"miace: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
