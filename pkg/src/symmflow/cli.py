"""Command-line driver: gen-data, train, sample, classify, sweep, gradcheck."""

from __future__ import annotations

import argparse
import csv
import io
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import config as cfgmod
from .codec import ClassCodebook, build_codebook
from .datasets import (
    CsvFormatError,
    Dataset,
    SpiralConfig,
    format_float,
    gaussian_mixture,
    read_points_csv,
    split,
    to_csv,
    two_spirals,
)
from .evaluation import accuracy, bayes_classify, sweep_steps
from .flow import NoiseDraws, TrainConfig, VelocityModel, init_model, loss_and_grad, train
from .nn import finite_diff_grad, load_checkpoint, make_rng, save_checkpoint
from .ode import SolverConfig, classify, generate
from .plots import scatter_svg, line_svg

log = logging.getLogger("symmflow")

# independent RNG streams under one master seed
STREAM_INIT, STREAM_TRAIN, STREAM_SAMPLE, STREAM_CLASSIFY, STREAM_SWEEP, STREAM_GRADCHECK = range(1, 7)

GRADCHECK_TOL = 1e-4


class CommandError(Exception):
    pass


def write_atomic(path: Path, text: str) -> None:
    """Write via a temp file and rename, so failures never leave partial output."""
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", encoding="utf-8", newline="\n") as f:
        f.write(text)
    os.replace(tmp, path)


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


# -- config / paths -------------------------------------------------------------


def _out_dir(args, cfg) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_config(args) -> dict:
    if args.config:
        raw = cfgmod.load(args.config)
    elif (Path(args.out) / "config.json").exists():
        raw = cfgmod.load(Path(args.out) / "config.json")
    else:
        raw = {}
    return cfgmod.resolve(raw, seed=args.seed)


def _codebook(cfg) -> ClassCodebook:
    ds = cfg["dataset"]
    return build_codebook(ds["num_classes"], cfg["codebook"]["dim_y"], cfg["codebook"]["beta"])


def _train_config(cfg) -> TrainConfig:
    return TrainConfig(**cfg["train"], seed=[cfg["seed"], STREAM_TRAIN])


def _require(path: Path, what: str) -> Path:
    if not path.exists():
        raise CommandError(f"missing {what}: {path}")
    return path


def _load_model(out: Path) -> tuple[VelocityModel, ClassCodebook]:
    params, meta = load_checkpoint(_require(out / "checkpoint.txt", "checkpoint (run `train` first)"))
    model = VelocityModel(params, meta["dim_x"], meta["dim_y"], meta["time_encoding"])
    return model, ClassCodebook.from_dict(meta["codebook"])


# -- commands -------------------------------------------------------------------


def make_dataset(cfg) -> Dataset:
    ds = cfg["dataset"]
    if ds["generator"] == "two_spirals":
        sc = SpiralConfig(ds["n_per_class"], ds["theta_lo"], ds["theta_hi"], ds["noise_sigma"], cfg["seed"])
        return two_spirals(sc)
    return gaussian_mixture(ds["k_components"], ds["n_per_class"], ds["num_classes"], cfg["seed"])


def cmd_gen_data(args, cfg) -> int:
    out = _out_dir(args, cfg)
    data = make_dataset(cfg)
    tr, te = split(data, cfg["dataset"]["test_fraction"], cfg["seed"])
    write_atomic(out / "train.csv", to_csv(tr))
    write_atomic(out / "test.csv", to_csv(te))
    write_atomic(out / "dataset.json", cfgmod.dumps(data.meta))
    write_atomic(out / "config.json", cfgmod.dumps(cfg))
    print(f"wrote {len(tr)} train / {len(te)} test points to {out}")
    return 0


def cmd_train(args, cfg) -> int:
    out = _out_dir(args, cfg)
    if args.epochs is not None:
        cfg["train"]["epochs"] = args.epochs
    x, labels = read_points_csv(_require(out / "train.csv", "training data (run `gen-data` first)"))
    if labels is None:
        raise CommandError("train.csv has no label column")
    book = _codebook(cfg)
    ckpt = out / "checkpoint.txt"
    if args.resume:
        model, book = _load_model(out)
        if cfg["train"]["epochs"] == 0:
            print("0 epochs requested; checkpoint left unchanged")
            return 0
    else:
        net = cfg["network"]
        model = init_model(
            x.shape[1], book.dim_y, tuple(net["hidden"]), net["activation"], net["time_encoding"],
            make_rng([cfg["seed"], STREAM_INIT]),
        )
    result = train(model, x, labels, book, _train_config(cfg))
    meta = {**result.model.meta(), "codebook": book.to_dict(), "train": cfg["train"]}
    tmp = ckpt.with_name(ckpt.name + ".tmp")
    save_checkpoint(tmp, result.model.params, meta)
    rows = [[i + 1, format_float(v)] for i, v in enumerate(result.history)]
    write_atomic(out / "loss.csv", _csv_text(["epoch", "mean_loss"], rows))
    os.replace(tmp, ckpt)
    write_atomic(out / "config.json", cfgmod.dumps(cfg))
    print(f"final loss {result.history[-1]:.6f} after {result.steps} optimizer steps")
    return 0


def _solver(cfg, steps=None, scheme=None) -> SolverConfig:
    s = cfg["solver"]
    return SolverConfig(scheme or s["scheme"], steps or s["steps"])


def cmd_sample(args, cfg) -> int:
    out = _out_dir(args, cfg)
    model, book = _load_model(out)
    if not 0 <= args.class_idx < book.num_classes:
        raise CommandError(f"class {args.class_idx} outside [0, {book.num_classes})")
    if args.n < 0:
        raise CommandError("--n must be >= 0")
    rng = make_rng([cfg["seed"], STREAM_SAMPLE, args.class_idx])
    xs = generate(model, book, args.class_idx, args.n, rng, _solver(cfg, args.steps, args.scheme))
    header = [f"x{j}" for j in range(model.dim_x)] + ["label"]
    rows = [[format_float(v) for v in row] + [args.class_idx] for row in xs]
    path = out / f"samples_class{args.class_idx}.csv"
    write_atomic(path, _csv_text(header, rows))
    if args.svg:
        groups = []
        if (out / "train.csv").exists() and model.dim_x == 2:
            rx, rl = read_points_csv(out / "train.csv")
            if rl is not None:
                groups.append((f"real class {args.class_idx}", rx[rl == args.class_idx], "#999999", True))
        groups.append((f"generated class {args.class_idx}", xs[:, :2], None, False))
        write_atomic(path.with_suffix(".svg"), scatter_svg(groups, f"class {args.class_idx} samples"))
    print(f"wrote {len(xs)} samples to {path}")
    return 0


def cmd_classify(args, cfg) -> int:
    out = _out_dir(args, cfg)
    model, book = _load_model(out)
    inp = Path(args.input) if args.input else out / "test.csv"
    x, labels = read_points_csv(_require(inp, "input CSV"), book.num_classes)
    c = cfg["classify"]
    method = args.method or c["method"]
    header = [f"x{j}" for j in range(model.dim_x)] + ["pred"]
    if len(x) == 0:
        pred = np.zeros(0, dtype=np.int64)
        extra = np.zeros((0, model.dim_y if method == "ode" else book.num_classes))
    elif method == "ode":
        rng = make_rng([cfg["seed"], STREAM_CLASSIFY])
        steps = args.steps or c["steps"]
        pred, extra = classify(model, book, x, rng, _solver(cfg, steps, args.scheme), args.K or c["K"], c["freeze_x"])
    else:
        rng = make_rng([cfg["seed"], STREAM_CLASSIFY])
        extra = bayes_classify(model, book, x, c["n_mc"], rng)
        pred = np.argmax(extra, axis=1)
    header += [f"y0_{j}" for j in range(model.dim_y)] if method == "ode" else [f"p{j}" for j in range(book.num_classes)]
    rows = [[format_float(v) for v in xi] + [int(p)] + [format_float(v) for v in e] for xi, p, e in zip(x, pred, extra)]
    text = _csv_text(header, rows)
    if labels is not None and len(labels):
        acc = accuracy(pred, labels)
        text += f"# accuracy,{format_float(acc)}\n"
        print(f"accuracy {acc:.4f} on {len(labels)} points ({method})")
    write_atomic(out / "predictions.csv", text)
    return 0


def cmd_sweep(args, cfg) -> int:
    out = _out_dir(args, cfg)
    model, book = _load_model(out)
    steps = [int(s) for s in args.steps.split(",")] if args.steps else cfg["sweep"]["steps"]
    x, labels = read_points_csv(_require(out / "test.csv", "test data"), book.num_classes)
    if labels is None:
        raise CommandError("test.csv has no label column")
    c = cfg["classify"]
    res = sweep_steps(model, book, x, labels, steps, seed=[cfg["seed"], STREAM_SWEEP],
                      scheme=args.scheme or cfg["solver"]["scheme"], K=args.K or c["K"], freeze_x=c["freeze_x"])
    write_atomic(out / "sweep.csv", _csv_text(["steps", "accuracy"], [[s, format_float(a)] for s, a in res.rows()]))
    if args.svg:
        write_atomic(out / "sweep.svg", line_svg(res.steps, res.accuracy, "accuracy vs integration steps"))
    for s, a in res.rows():
        print(f"steps {s:>4d}  accuracy {a:.4f}")
    return 0


def gradcheck_report(seed: int = 0, corrupt: bool = False, h: float = 1e-5):
    """Analytic vs central-difference gradients of the symmetric loss on a tiny net.

    Returns (max relative error, per-layer rows). ``corrupt`` perturbs the
    analytic gradient; it exists to prove the check can fail.
    """
    rng = make_rng([seed, STREAM_GRADCHECK])
    model = init_model(2, 1, hidden=(16, 16), activation="silu", rng=rng)
    n = 8
    x = rng.standard_normal((n, 2))
    y = rng.uniform(-1.5, 1.5, (n, 1))
    noise = NoiseDraws(rng.random(n), rng.standard_normal((n, 2)), rng.standard_normal((n, 1)))
    _, analytic = loss_and_grad(model, x, y, noise)
    if corrupt:
        analytic[0] = analytic[0] * 1.01

    def loss_fn(arrays):
        return loss_and_grad(model.with_params(model.params.with_arrays(arrays)), x, y, noise)[0]

    numeric = finite_diff_grad(loss_fn, model.params.arrays(), h)
    rows, worst = [], 0.0
    for k, (a, b) in enumerate(zip(analytic, numeric)):
        rel = np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), 1e-6)
        i = int(np.argmax(rel))
        name = f"layer{k // 2}.{'weight' if k % 2 == 0 else 'bias'}"
        rows.append((name, np.unravel_index(i, a.shape), float(rel.flat[i]), float(a.flat[i]), float(b.flat[i])))
        worst = max(worst, float(rel.flat[i]))
    return worst, rows


def cmd_gradcheck(args, cfg) -> int:
    worst, rows = gradcheck_report(cfg["seed"], corrupt=args.corrupt_backward)
    print("param            worst coord   rel.err      analytic              finite-diff")
    for name, idx, rel, a, b in rows:
        print(f"{name:<16} {str(tuple(int(i) for i in idx)):<13} {rel:.3e}   {a: .15e} {b: .15e}")
    ok = worst < GRADCHECK_TOL
    print(f"max relative error {worst:.3e} (tolerance {GRADCHECK_TOL:g}): {'PASS' if ok else 'FAIL'}")
    return 0 if ok else 1


# -- entry point ----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON experiment config (default: <out>/config.json if present)")
    common.add_argument("--seed", type=int, help="override the config seed")
    common.add_argument("--out", default="runs/toy", help="output directory (default: runs/toy)")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="symmflow", description="Symmetric flow matching toy experiments")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("gen-data", parents=[common], help="generate train/test CSVs")

    t = sub.add_parser("train", parents=[common], help="train the velocity field")
    t.add_argument("--epochs", type=int, help="override train.epochs")
    t.add_argument("--resume", action="store_true", help="continue from <out>/checkpoint.txt")

    s = sub.add_parser("sample", parents=[common], help="class-conditional generation")
    s.add_argument("--class", dest="class_idx", type=int, required=True)
    s.add_argument("--n", type=int, default=1000)
    s.add_argument("--steps", type=int)
    s.add_argument("--scheme", choices=("euler", "midpoint", "rk4"))
    s.add_argument("--svg", action="store_true", help="also write a scatter plot")

    c = sub.add_parser("classify", parents=[common], help="classify points from a CSV")
    c.add_argument("--input", help="CSV with x0,x1[,label] (default: <out>/test.csv)")
    c.add_argument("--method", choices=("ode", "bayes"))
    c.add_argument("--steps", type=int)
    c.add_argument("--scheme", choices=("euler", "midpoint", "rk4"))
    c.add_argument("--K", type=int, help="reverse trajectories averaged per point")

    w = sub.add_parser("sweep", parents=[common], help="accuracy vs number of reverse steps")
    w.add_argument("--steps", help="comma-separated step counts, e.g. 1,2,5,10,20,50")
    w.add_argument("--scheme", choices=("euler", "midpoint", "rk4"))
    w.add_argument("--K", type=int)
    w.add_argument("--svg", action="store_true", help="also write a line chart")

    g = sub.add_parser("gradcheck", parents=[common], help="finite-difference check of the loss gradient")
    g.add_argument("--corrupt-backward", action="store_true", help=argparse.SUPPRESS)
    return p


COMMANDS = {
    "gen-data": cmd_gen_data,
    "train": cmd_train,
    "sample": cmd_sample,
    "classify": cmd_classify,
    "sweep": cmd_sweep,
    "gradcheck": cmd_gradcheck,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        cfg = _load_config(args)
        return COMMANDS[args.command](args, cfg)
    except (cfgmod.ConfigError, CsvFormatError, CommandError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, IndexError, FloatingPointError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
