"""Command-line interface.

Subcommands: train, corrupt, diagnose-lid, estimate-jacobian, report.
Exit codes: 0 success, 2 configuration/input error, 3 numeric divergence.
"""

from __future__ import annotations

import argparse
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from .checkpoint import load_checkpoint
from .config import load_config
from .datasets import load_dataset, save_dataset
from .diagnostics import LidConfig, lid_batch
from .errors import DivergenceError, NoiseRegError
from .harness import METRICS_NAME, run_experiment
from .jacobian import batch_frob_sq, mc_jacobian_norm, sample_bound
from .noise import NoiseModel
from .report import render_report
from .rng import RngStream


def _grid_workers() -> int:
    raw = os.environ.get("NOISEREG_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _cmd_train(args) -> int:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    out_dir = Path(args.out)

    if args.lambda_grid is None:
        result = run_experiment(cfg, out_dir=out_dir)
        final = result.rows[-1]
        print(
            f"done: epoch={final.epoch} test_acc={final.test_acc:.4f} "
            f"label_precision={final.label_precision:.4f} -> {out_dir / METRICS_NAME}"
        )
        return 0

    lambdas = [float(v) for v in args.lambda_grid.split(",") if v.strip()]
    if not lambdas:
        raise NoiseRegError("--lambda-grid needs at least one value")
    jobs = []
    for index, lam in enumerate(lambdas):
        sub_cfg = replace(cfg, regularizer=replace(cfg.regularizer, lambda_max=lam))
        jobs.append((index, lam, sub_cfg, out_dir / f"lambda_{lam:g}"))

    def run_one(job):
        index, lam, sub_cfg, sub_dir = job
        result = run_experiment(sub_cfg, out_dir=sub_dir, stream_id=index)
        return lam, sub_dir, result.rows[-1]

    workers = _grid_workers()
    if workers == 1:
        outcomes = [run_one(job) for job in jobs]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(run_one, jobs))
    for lam, sub_dir, final in outcomes:
        print(f"lambda={lam:g}: test_acc={final.test_acc:.4f} -> {sub_dir / METRICS_NAME}")
    return 0


def _cmd_corrupt(args) -> int:
    ds = load_dataset(args.infile)
    model = NoiseModel(kind=args.noise, eta=args.eta, allow_self_flip=args.allow_self_flip)
    matrix = model.transition_matrix(ds.num_classes)
    from .noise import corrupt as corrupt_labels

    noisy = corrupt_labels(ds, matrix, RngStream(args.seed))
    save_dataset(noisy, args.out)
    flipped = int((~noisy.clean_mask).sum())
    print(f"corrupted {flipped}/{len(noisy)} labels ({args.noise}, eta={args.eta:g}) -> {args.out}")
    return 0


def _cmd_diagnose_lid(args) -> int:
    model = load_checkpoint(args.checkpoint)
    ds = load_dataset(args.data)
    n = len(ds)
    batch = min(args.batch, n)
    cfg = LidConfig(k=args.k, batch_size=batch)
    rng = RngStream(args.seed)
    n_batches = max(1, min(args.batches, n // batch))
    perm = rng.permutation(n)
    pooled = []
    for b in range(n_batches):
        est = lid_batch(model, ds.features[perm[b * batch : (b + 1) * batch]], cfg)
        pooled.append(est.per_point[np.isfinite(est.per_point)])
    values = np.concatenate(pooled)
    print(f"mean_lid={values.mean():.6g} points={values.size} batches={n_batches} k={args.k}")
    return 0


def _cmd_estimate_jacobian(args) -> int:
    model = load_checkpoint(args.checkpoint)
    ds = load_dataset(args.data)
    exact_mean = float("nan")
    if len(ds) <= args.max_exact:
        chunks = [
            batch_frob_sq(model, ds.features[i : i + 1024], args.space)
            for i in range(0, len(ds), 1024)
        ]
        exact_mean = float(np.concatenate(chunks).mean())
    estimate, std_error = mc_jacobian_norm(
        model, ds.features, args.sigma, args.pairs, RngStream(args.seed), args.space
    )
    bound = sample_bound(0.1, 0.05)
    print(
        f"exact_frob_sq_mean={exact_mean:.8g} mc_estimate={estimate:.8g} "
        f"std_error={std_error:.3g} sample_bound_eps0.1_delta0.05={bound}"
    )
    return 0


def _cmd_report(args) -> int:
    written = render_report(args.metrics, args.out)
    for path in written:
        print(f"wrote {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="noisereg", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="run a training experiment from a config file")
    p_train.add_argument("--config", required=True)
    p_train.add_argument("--seed", type=int, default=None, help="override the config seed")
    p_train.add_argument("--out", default="noisereg_out")
    p_train.add_argument("--lambda-grid", default=None, help="comma-separated lambda_max sweep")
    p_train.set_defaults(func=_cmd_train)

    p_corrupt = sub.add_parser("corrupt", help="inject label noise into a dataset file")
    p_corrupt.add_argument("--in", dest="infile", required=True)
    p_corrupt.add_argument("--noise", required=True, choices=["uniform", "asym10", "circular"])
    p_corrupt.add_argument("--eta", type=float, required=True)
    p_corrupt.add_argument("--seed", type=int, required=True)
    p_corrupt.add_argument("--out", required=True)
    p_corrupt.add_argument("--allow-self-flip", action="store_true")
    p_corrupt.set_defaults(func=_cmd_corrupt)

    p_lid = sub.add_parser("diagnose-lid", help="mean LID of a checkpointed model on a dataset")
    p_lid.add_argument("--checkpoint", required=True)
    p_lid.add_argument("--data", required=True)
    p_lid.add_argument("--k", type=int, default=20)
    p_lid.add_argument("--batch", type=int, default=128)
    p_lid.add_argument("--batches", type=int, default=10)
    p_lid.add_argument("--seed", type=int, default=0)
    p_lid.set_defaults(func=_cmd_diagnose_lid)

    p_jac = sub.add_parser("estimate-jacobian", help="exact vs Monte-Carlo Jacobian norm report")
    p_jac.add_argument("--checkpoint", required=True)
    p_jac.add_argument("--sigma", type=float, required=True)
    p_jac.add_argument("--pairs", type=int, required=True)
    p_jac.add_argument("--data", required=True)
    p_jac.add_argument("--space", choices=["logits", "probabilities"], default="logits")
    p_jac.add_argument("--seed", type=int, default=0)
    p_jac.add_argument("--max-exact", type=int, default=16384, help="skip the exact pass above this size")
    p_jac.set_defaults(func=_cmd_estimate_jacobian)

    p_report = sub.add_parser("report", help="render figures and a summary from metrics CSVs")
    p_report.add_argument("--metrics", nargs="+", required=True)
    p_report.add_argument("--out", default="noisereg_report")
    p_report.set_defaults(func=_cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except DivergenceError as exc:
        print(f"error: training diverged: {exc}", file=sys.stderr)
        return 3
    except NoiseRegError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
