"""Command-line pipeline: ingest, train, discretize, score, export.

Subcommands: train, eval, simulate, synth, noise, export. Exit codes:
0 success, 1 usage error, 2 data/validation error, 3 numerical failure.
Report-producing commands render figures next to their delimited output
unless --no-figures is given.
"""

import argparse
import csv
import os
import sys

import numpy as np

from . import data as data_mod
from . import evaluation as eval_mod
from . import model as model_mod
from . import plots
from . import synth as synth_mod
from . import training as train_mod
from .errors import DataError, NumericsError

CONFIG_KEYS = {
    "optimizer": str, "epochs": int, "eta": float, "gamma": float,
    "p0": float, "q": float, "r": float, "runs": int, "seed": int,
    "init_scale": float,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def read_config(path):
    """Flat key = value text; keys mirror the training configuration."""
    values = {}
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from None
    for i, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise DataError("expected key = value", row=i)
        key, _, text = (p.strip() for p in line.partition("="))
        if key not in CONFIG_KEYS:
            raise DataError(f"unknown config key {key!r}", row=i)
        try:
            values[key] = CONFIG_KEYS[key](text)
        except ValueError:
            raise DataError(f"bad value for {key}: {text!r}", row=i) from None
    return values


def _ensure_dir(path):
    os.makedirs(path, exist_ok=True)
    return path


def _load_for_modeling(args):
    ds = data_mod.load_dataset(args.data, inputs_path=args.inputs,
                               assume_normalized=args.no_normalize)
    if not ds.normalized:
        ds = data_mod.normalize(ds)
    return ds


def _step_cfg(args):
    return model_mod.StepConfig(args.dt) if args.dt is not None else None


def _build_train_config(args):
    values = read_config(args.config) if args.config else {}
    for key in CONFIG_KEYS:
        flag = getattr(args, key)
        if flag is not None:
            values[key] = flag
    return train_mod.TrainConfig(**values)


def cmd_train(args):
    ds = _load_for_modeling(args)
    cfg = _build_train_config(args)
    result = train_mod.train(ds, cfg, step_cfg=_step_cfg(args),
                             threads=args.threads)
    out = _ensure_dir(args.out)
    model_mod.save_weight_matrix(result.gene_names, result.mean_weights,
                                 os.path.join(out, "weights.csv"))
    model_mod.save_model(result.mean_model(), result.gene_names,
                         os.path.join(out, "model.csv"))
    run_ids = [r for r in range(cfg.runs)
               if r not in {idx for idx, _ in result.failures}]
    for run_index, weights in zip(run_ids, result.per_run_weights):
        model_mod.save_weight_matrix(
            result.gene_names, weights,
            os.path.join(out, f"run_{run_index + 1:02d}_weights.csv"))
    with open(os.path.join(out, "loss.csv"), "w", newline="",
              encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["run", "epoch", "sse"])
        for run_index, losses in zip(run_ids, result.loss_history):
            for epoch, sse in enumerate(losses):
                writer.writerow([run_index + 1, epoch, str(float(sse))])
    if not args.no_figures:
        plots.save_loss_figure(result.loss_history,
                               os.path.join(out, "loss.png"))
    final_mean = float(np.mean([losses[-1] for losses in result.loss_history]))
    print(f"optimizer: {cfg.optimizer}")
    print("run seeds: " + " ".join(str(s) for s in result.run_seeds))
    for run_index, message in result.failures:
        print(f"run {run_index + 1} failed: {message}", file=sys.stderr)
    print(f"completed runs: {len(result.models)}/{cfg.runs}")
    print(f"final mean SSE: {final_mean:.6g}")
    return 0


def cmd_eval(args):
    names, weights = model_mod.load_weight_matrix(args.weights)
    gold = data_mod.load_gold_network(args.gold, names)
    adjacency = eval_mod.discretize_iqr(weights, names)
    report = eval_mod.score(adjacency, gold, mode=args.mode)
    out = _ensure_dir(args.out)
    eval_mod.save_report(report, os.path.join(out, "report.txt"))
    eval_mod.save_report_csv(report, os.path.join(out, "report.csv"))
    if not args.no_figures:
        plots.save_report_figure(report, os.path.join(out, "report.png"),
                                 title=f"{args.mode} scoring")
    c = report.counts
    print(f"tp={c.tp} fp={c.fp} fn={c.fn} tn={c.tn}")
    print(" ".join(f"{name}={eval_mod._fmt_metric(getattr(report, name))}"
                   for name in eval_mod.METRIC_NAMES))
    return 0


def cmd_simulate(args):
    ds = _load_for_modeling(args)
    model, names = model_mod.load_model(args.model)
    if names != ds.gene_names:
        raise DataError("model gene names do not match the dataset")
    trajectory = model_mod.free_run(model, ds, cfg=_step_cfg(args))
    out = _ensure_dir(args.out)
    with open(os.path.join(out, "trajectories.csv"), "w", newline="",
              encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["gene", "time", "observed", "predicted"])
        for i, name in enumerate(ds.gene_names):
            for t in range(ds.n_points):
                writer.writerow([name, str(float(ds.time_points[t])),
                                 str(float(ds.values[i, t])),
                                 str(float(trajectory[i, t]))])
    if not args.no_figures:
        plots.save_trajectory_figure(ds, trajectory,
                                     os.path.join(out, "trajectories.png"))
    sse = float(np.sum((trajectory[:, 1:] - ds.values[:, 1:]) ** 2))
    print(f"free-run SSE over {ds.n_points - 1} predicted points: {sse:.6g}")
    return 0


def cmd_synth(args):
    spec = synth_mod.SynthSpec(n=args.genes, density=args.density,
                               weight_range=args.weight_range,
                               time_points=args.points, dt=args.dt,
                               seed=args.seed)
    model, gold = synth_mod.generate_model(spec)
    ds = synth_mod.generate_dataset(model, spec)
    out = _ensure_dir(args.out)
    data_mod.save_dataset(ds, os.path.join(out, "dataset.csv"))
    data_mod.save_gold_network(gold, os.path.join(out, "gold.tsv"))
    model_mod.save_model(model, ds.gene_names,
                         os.path.join(out, "true_model.csv"))
    print(f"{spec.n} genes, {gold.n_edges} gold edges, "
          f"{spec.time_points} time points")
    return 0


def cmd_noise(args):
    ds = data_mod.load_dataset(args.data, assume_normalized=True)
    noisy = data_mod.add_gaussian_noise(ds, args.level, args.seed)
    data_mod.save_dataset(noisy, args.out)
    print(f"wrote {args.out} (level {args.level})")
    return 0


def cmd_export(args):
    names, weights = model_mod.load_weight_matrix(args.weights)
    adjacency = eval_mod.discretize_iqr(weights, names)
    if args.format == "sif":
        eval_mod.save_sif(adjacency, args.out, unsigned=args.unsigned)
    else:
        eval_mod.save_adjacency_csv(adjacency, args.out)
    nonzero = int(np.count_nonzero(adjacency.matrix))
    print(f"wrote {args.out} ({nonzero} interactions)")
    return 0


def _add_train_flags(p):
    p.add_argument("--config", help="flat key = value training config file")
    for key in CONFIG_KEYS:
        flag = "--" + key.replace("_", "-")
        if key == "optimizer":
            p.add_argument(flag, choices=("bptt", "gekf"))
        else:
            p.add_argument(flag, type=CONFIG_KEYS[key])


def build_parser():
    parser = _Parser(prog="grnet",
                     description="Infer gene regulatory networks from "
                                 "time-series expression data.")
    sub = parser.add_subparsers(dest="command", required=True,
                                parser_class=_Parser)

    p = sub.add_parser("train", help="fit a model and write weight matrices")
    p.add_argument("--data", required=True, help="expression CSV")
    p.add_argument("--inputs", help="external-input CSV")
    _add_train_flags(p)
    p.add_argument("--dt", type=float, help="override step size")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--no-normalize", action="store_true",
                   help="take values as already normalized (must be in [0,1])")
    p.add_argument("--no-figures", action="store_true")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="discretize weights and score vs gold")
    p.add_argument("--weights", required=True, help="weight matrix CSV")
    p.add_argument("--gold", required=True, help="gold edge list TSV")
    p.add_argument("--mode", choices=("unsigned", "signed"),
                   default="unsigned")
    p.add_argument("--no-figures", action="store_true")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("simulate",
                       help="free-run a model against observed data")
    p.add_argument("--model", required=True, help="model CSV")
    p.add_argument("--data", required=True, help="expression CSV")
    p.add_argument("--inputs", help="external-input CSV")
    p.add_argument("--dt", type=float)
    p.add_argument("--no-normalize", action="store_true")
    p.add_argument("--no-figures", action="store_true")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("synth", help="generate a benchmark with known truth")
    p.add_argument("--genes", type=int, required=True)
    p.add_argument("--density", type=float, required=True)
    p.add_argument("--points", type=int, default=101)
    p.add_argument("--dt", type=float, default=1.0)
    p.add_argument("--weight-range", type=float, default=2.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("noise", help="add clamped Gaussian noise to a dataset")
    p.add_argument("--data", required=True)
    p.add_argument("--level", type=float, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output CSV file")
    p.set_defaults(func=cmd_noise)

    p = sub.add_parser("export", help="write the discretized network")
    p.add_argument("--weights", required=True)
    p.add_argument("--format", choices=("sif", "csv"), default="sif")
    p.add_argument("--unsigned", action="store_true",
                   help="emit sign-free 'regulates' relations")
    p.add_argument("--out", required=True, help="output file")
    p.set_defaults(func=cmd_export)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except DataError as exc:
        print(f"grnet: data error: {exc}", file=sys.stderr)
        return 2
    except NumericsError as exc:
        print(f"grnet: numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
