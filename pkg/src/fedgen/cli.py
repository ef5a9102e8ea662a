"""Command-line entry point.

Subcommands: ingest (decode + extract + standardize, report counts), run
(one protocol trial), sweep (Monte-Carlo grid to CSV), bound (closed-form
bound arithmetic), estimate-q (empirical contraction coefficient), and
selftest (built-in oracle suite).

Machine-readable `key=value` lines go to stdout; human tables go to
stderr.  Exit codes: 0 success, 1 runtime or data error, 2 usage error.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import __version__
from .bounds import (
    BoundParams,
    client_count_condition,
    estimate_contraction,
    margin_bound,
    round_term,
    round_term_stated_cap,
)
from .data_ingest import (
    LabeledSet,
    distribute_to_clients,
    extract_binary_task,
    load_mnist_idx,
    standardize,
)
from .errors import ParameterError
from .experiment import ExperimentConfig, parse_config, run_sweep, run_trial, write_csv
from .features import apply_map, build_feature_map
from .fl_sim import FLConfig
from .rng import Stream, derive_seed
from .selftest import run_selftest
from .trainer import TrainerConfig


def _add_data_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--train-images", required=True, help="IDX training images path")
    parser.add_argument("--train-labels", required=True, help="IDX training labels path")
    parser.add_argument("--test-images", required=True, help="IDX test images path")
    parser.add_argument("--test-labels", required=True, help="IDX test labels path")
    parser.add_argument("--pos", type=int, default=1, help="digit mapped to +1")
    parser.add_argument("--neg", type=int, default=6, help="digit mapped to -1")


def _add_trainer_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--epochs", type=int, default=40)
    parser.add_argument("--batch", type=int, default=1)
    parser.add_argument("--eta0", type=float, default=0.01)
    parser.add_argument("--lr-decay", type=float, default=0.2)
    parser.add_argument("--patience", type=int, default=10)
    parser.add_argument("--min-improvement", type=float, default=0.01)
    parser.add_argument("--l2", type=float, default=1e-4)
    parser.add_argument("--project", action="store_true", help="project weights onto the unit ball")


def _load_task(args) -> tuple:
    """IDX pair -> binary task -> standardized (train, test)."""
    raw_train = load_mnist_idx(args.train_images, args.train_labels)
    raw_test = load_mnist_idx(args.test_images, args.test_labels)
    train = extract_binary_task(raw_train, args.pos, args.neg)
    test = extract_binary_task(raw_test, args.pos, args.neg)
    train_std, (test_std,), _, _ = standardize(train, [test])
    return train_std, test_std


def _trainer_config(args) -> TrainerConfig:
    return TrainerConfig(
        epochs=args.epochs,
        batch_size=args.batch,
        eta0=args.eta0,
        lr_decay=args.lr_decay,
        patience=args.patience,
        min_improvement=args.min_improvement,
        l2=args.l2,
        project=args.project,
    )


def cmd_ingest(args) -> int:
    train, test = _load_task(args)
    print(f"train_count={len(train)} test_count={len(test)} dim={train.X.shape[1]} pos={args.pos} neg={args.neg}")
    return 0


def cmd_run(args) -> int:
    train, test = _load_task(args)
    fmap = build_feature_map(
        args.gamma, args.rff_dim, derive_seed(args.seed, 20), input_dim=train.X.shape[1]
    )
    flcfg = FLConfig(K=args.K, R=args.R, n=args.n, trainer=_trainer_config(args), seed=args.seed)
    report = run_trial(
        train,
        test,
        fmap,
        flcfg,
        args.trial,
        theta=args.theta,
        heterogeneous=args.heterogeneous,
        noise_sigma=args.noise_sigma,
        noise_fraction=args.noise_fraction,
    )
    print(f"emp={report.emp_margin:.9g} pop={report.pop:.9g} gen={report.gen:.9g} theta={report.theta:.9g}")
    return 0


def cmd_sweep(args) -> int:
    cfg: ExperimentConfig = parse_config(args.config)
    train, test = _load_task(args)

    def progress(row):
        print(
            f"K={row.K} R={row.R} n={row.n} gen_mean={row.gen_mean:.9g} "
            f"gen_std={row.gen_std:.9g} emp_mean={row.emp_mean:.9g} "
            f"pop_mean={row.pop_mean:.9g} bound_t5={row.bound_t5:.9g}"
        )

    rows = run_sweep(train, test, cfg, progress=progress)
    write_csv(rows, cfg.out_csv)
    print(f"rows={len(rows)} out_csv={cfg.out_csv}")
    return 0


def cmd_bound(args) -> int:
    try:
        params = BoundParams(
            n=args.n,
            K=args.K,
            R=args.R,
            theta=args.theta,
            B=args.B,
            q=args.q,
            alpha=args.alpha,
            c_scale=args.c_scale,
        )
    except ParameterError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    value = margin_bound(params)
    holds, simplified = client_count_condition(params)
    print(f"{'r':>4} {'term':>14} {'stated_cap':>14}", file=sys.stderr)
    for r in range(1, params.R + 1):
        print(f"{r:>4} {round_term(r, params):>14.6g} {round_term_stated_cap(r, params):>14.6g}", file=sys.stderr)
    print(
        f"bound_t5={value:.9g} k_condition={str(holds).lower()} "
        f"k_condition_simplified={str(simplified).lower()}"
    )
    return 0


def cmd_estimate_q(args) -> int:
    train, _ = _load_task(args)
    fmap = build_feature_map(
        args.gamma, args.rff_dim, derive_seed(args.seed, 20), input_dim=train.X.shape[1]
    )
    if args.n % args.R != 0:
        raise ParameterError(f"R={args.R} must divide n={args.n}")
    n_r = args.n // args.R
    clients = distribute_to_clients(train, 1, args.n, args.R, derive_seed(args.seed, 22))
    chunk = clients[0].rounds[0]
    chunk_f = LabeledSet(apply_map(fmap, chunk.X), chunk.y)
    init_stream = Stream(derive_seed(args.seed, 30))
    init_a = init_stream.normals(fmap.d)
    init_a /= np.linalg.norm(init_a)
    init_b = init_stream.normals(fmap.d)
    init_b /= np.linalg.norm(init_b)
    q_hat = estimate_contraction(chunk_f, _trainer_config(args), init_a, init_b, derive_seed(args.seed, 31))
    print(f"q_hat={q_hat:.9g} chunk_size={n_r}")
    return 0


def cmd_selftest(args) -> int:
    failures = run_selftest()
    if failures:
        print("failed=" + ",".join(failures))
        return 1
    print("all_checks=pass")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fedgen", description=__doc__)
    parser.add_argument("--version", action="version", version=f"fedgen {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="decode IDX files and report task sizes")
    _add_data_args(p)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("run", help="one Monte-Carlo trial of the protocol")
    _add_data_args(p)
    _add_trainer_args(p)
    p.add_argument("--K", type=int, required=True, help="number of clients")
    p.add_argument("--R", type=int, required=True, help="number of rounds")
    p.add_argument("--n", type=int, required=True, help="samples per client")
    p.add_argument("--theta", type=float, default=0.5)
    p.add_argument("--gamma", type=float, default=0.05)
    p.add_argument("--rff-dim", type=int, default=4000)
    p.add_argument("--heterogeneous", action="store_true")
    p.add_argument("--noise-sigma", type=float, default=0.2)
    p.add_argument("--noise-fraction", type=float, default=0.2)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trial", type=int, default=0)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="Monte-Carlo sweep over (K, R, n), writes CSV")
    _add_data_args(p)
    p.add_argument("--config", required=True, help="flat key = value config file")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("bound", help="evaluate the round-indexed margin bound")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--K", type=int, required=True)
    p.add_argument("--R", type=int, required=True)
    p.add_argument("--theta", type=float, default=0.5)
    p.add_argument("--B", type=float, default=1.0)
    p.add_argument("--q", type=float, default=0.5)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--c-scale", type=float, default=1.0)
    p.set_defaults(func=cmd_bound)

    p = sub.add_parser("estimate-q", help="empirical contraction coefficient on one chunk")
    _add_data_args(p)
    _add_trainer_args(p)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--R", type=int, required=True)
    p.add_argument("--gamma", type=float, default=0.05)
    p.add_argument("--rff-dim", type=int, default=4000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_estimate_q)

    p = sub.add_parser("selftest", help="run the built-in oracle suite")
    p.set_defaults(func=cmd_selftest)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
