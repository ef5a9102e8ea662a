"""Monte-Carlo harness: repeated trials, K/R/n sweeps, CSV persistence.

A trial redraws client datasets from the pool, runs the protocol, and
scores the final aggregate.  Trial randomness depends only on
(master seed, trial index), so execution order and worker count never
change results; sweeps over the (K, R, n) grid reuse one frozen feature
map so that variation reflects data and algorithm randomness only.
"""

from __future__ import annotations

import itertools
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .bounds import BoundParams, margin_bound
from .data_ingest import ClientData, LabeledSet, distribute_to_clients, inject_client_noise
from .errors import ConfigError, SchemaError
from .features import FeatureMap, apply_map, build_feature_map
from .fl_sim import FLConfig, run_fl
from .risk import RiskReport, empirical_margin_risk, population_risk
from .rng import derive_seed
from .trainer import TrainerConfig

_TAG_FEATURES = 20
_TAG_TRIAL = 21
_TAG_DISTRIBUTE = 22
_TAG_NOISE = 23
_TAG_FL = 24

CSV_HEADER = "K,R,n,M,theta,q,B,heterogeneous,seed,gen_mean,gen_std,emp_mean,pop_mean,bound_t5"


@dataclass(frozen=True)
class SweepRow:
    K: int
    R: int
    n: int
    M: int
    theta: float
    q: float
    B: float
    heterogeneous: bool
    seed: int
    gen_mean: float
    gen_std: float
    emp_mean: float
    pop_mean: float
    bound_t5: float


@dataclass(frozen=True)
class ExperimentConfig:
    k_list: tuple = (10, 20, 50)
    r_list: tuple = (1, 2, 4, 5, 10, 20)
    n_list: tuple = (100,)
    trials: int = 20
    theta: float = 0.5
    q: float = 0.5
    alpha: float = 1.0
    b_override: float | None = None
    gamma: float = 0.05
    rff_dim: int = 4000
    epochs: int = 40
    batch: int = 1
    eta0: float = 0.01
    lr_decay: float = 0.2
    patience: int = 10
    min_improvement: float = 0.01
    l2: float = 1e-4
    project: bool = False
    heterogeneous: bool = False
    noise_sigma: float = 0.2
    noise_fraction: float = 0.2
    seed: int = 0
    out_csv: str = "sweep.csv"

    def trainer(self) -> TrainerConfig:
        return TrainerConfig(
            epochs=self.epochs,
            batch_size=self.batch,
            eta0=self.eta0,
            lr_decay=self.lr_decay,
            patience=self.patience,
            min_improvement=self.min_improvement,
            l2=self.l2,
            project=self.project,
        )

    def grid(self) -> list:
        return list(itertools.product(self.k_list, self.r_list, self.n_list))


def worker_count() -> int:
    env = os.environ.get("FEDGEN_THREADS", "").strip()
    if env:
        count = int(env)
        if count < 1:
            raise ConfigError("FEDGEN_THREADS must be >= 1")
        return count
    return os.cpu_count() or 1


def map_dataset(fmap: FeatureMap, dataset: LabeledSet) -> LabeledSet:
    return LabeledSet(apply_map(fmap, dataset.X), dataset.y)


def run_trial(
    pool: LabeledSet,
    test: LabeledSet,
    fmap: FeatureMap,
    flcfg: FLConfig,
    trial_index: int,
    theta: float,
    heterogeneous: bool = False,
    noise_sigma: float = 0.2,
    noise_fraction: float = 0.2,
    test_features: LabeledSet | None = None,
) -> RiskReport:
    """One Monte-Carlo draw: distribute, (optionally) noise, train, score.

    flcfg.seed is the master seed; everything below derives from
    (master, trial_index).  test_features may carry the clean test set
    already mapped, purely to avoid re-mapping it every trial.
    """
    trial_seed = derive_seed(flcfg.seed, _TAG_TRIAL, trial_index)
    clients = distribute_to_clients(
        pool, flcfg.K, flcfg.n, flcfg.R, derive_seed(trial_seed, _TAG_DISTRIBUTE)
    )
    if heterogeneous:
        clients, tests = inject_client_noise(
            clients, test, noise_sigma, noise_fraction, derive_seed(trial_seed, _TAG_NOISE)
        )
    else:
        tests = [test] * flcfg.K

    clean_test_f = test_features if test_features is not None else map_dataset(fmap, test)
    clients_f = [
        ClientData(c.client_id, [map_dataset(fmap, chunk) for chunk in c.rounds])
        for c in clients
    ]
    if heterogeneous:
        tests_f = [clean_test_f if t is test else map_dataset(fmap, t) for t in tests]
    else:
        # K identical clean test sets average to the pooled test risk.
        tests_f = [clean_test_f]

    final, _ = run_fl(clients_f, replace(flcfg, seed=derive_seed(trial_seed, _TAG_FL)))

    train_union = LabeledSet(
        np.concatenate([chunk.X for c in clients_f for chunk in c.rounds]),
        np.concatenate([chunk.y for c in clients_f for chunk in c.rounds]),
    )
    emp = empirical_margin_risk(train_union, final, theta)
    pop = population_risk(tests_f, final)
    return RiskReport.build(emp_margin=emp, pop=pop, theta=theta)


def estimate_ball_radius(fmap: FeatureMap, pool: LabeledSet, block: int = 2048) -> float:
    """Max feature-space norm over the pool (the bound's input-ball radius)."""
    best = 0.0
    for start in range(0, len(pool), block):
        Z = apply_map(fmap, pool.X[start : start + block])
        best = max(best, float(np.sqrt((Z * Z).sum(axis=1)).max()))
    return best


def run_sweep(pool: LabeledSet, test: LabeledSet, cfg: ExperimentConfig, progress=None) -> list:
    """Average cfg.trials trials per (K, R, n) grid point; attach the bound."""
    if cfg.trials < 1:
        raise ConfigError("trials must be >= 1")
    fmap = build_feature_map(
        cfg.gamma, cfg.rff_dim, derive_seed(cfg.seed, _TAG_FEATURES), input_dim=pool.X.shape[1]
    )
    test_f = map_dataset(fmap, test)
    ball = cfg.b_override if cfg.b_override is not None else estimate_ball_radius(fmap, pool)

    rows = []
    for K, R, n in cfg.grid():
        if len(pool) < K * n:
            raise ConfigError(
                f"grid point (K={K}, R={R}, n={n}) needs {K * n} samples, pool has {len(pool)}"
            )
        flcfg = FLConfig(K=K, R=R, n=n, trainer=cfg.trainer(), seed=cfg.seed)

        def one(trial: int) -> RiskReport:
            return run_trial(
                pool,
                test,
                fmap,
                flcfg,
                trial,
                theta=cfg.theta,
                heterogeneous=cfg.heterogeneous,
                noise_sigma=cfg.noise_sigma,
                noise_fraction=cfg.noise_fraction,
                test_features=test_f,
            )

        with ThreadPoolExecutor(max_workers=worker_count()) as pool_exec:
            reports = list(pool_exec.map(one, range(cfg.trials)))

        gen = np.array([r.gen for r in reports])
        emp = np.array([r.emp_margin for r in reports])
        pop = np.array([r.pop for r in reports])
        row = SweepRow(
            K=K,
            R=R,
            n=n,
            M=cfg.trials,
            theta=cfg.theta,
            q=cfg.q,
            B=ball,
            heterogeneous=cfg.heterogeneous,
            seed=cfg.seed,
            gen_mean=float(gen.mean()),
            gen_std=float(gen.std()),  # ddof=0 so M=1 gives exactly 0
            emp_mean=float(emp.mean()),
            pop_mean=float(pop.mean()),
            bound_t5=margin_bound(
                BoundParams(n=n, K=K, R=R, theta=cfg.theta, B=ball, q=cfg.q, alpha=cfg.alpha)
            ),
        )
        rows.append(row)
        if progress is not None:
            progress(row)
    return rows


# -- CSV persistence ---------------------------------------------------------


def _format_real(v: float) -> str:
    return f"{v:.9g}"


def write_csv(rows: list, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write(CSV_HEADER + "\n")
        for r in rows:
            f.write(
                ",".join(
                    [
                        str(r.K),
                        str(r.R),
                        str(r.n),
                        str(r.M),
                        _format_real(r.theta),
                        _format_real(r.q),
                        _format_real(r.B),
                        "true" if r.heterogeneous else "false",
                        str(r.seed),
                        _format_real(r.gen_mean),
                        _format_real(r.gen_std),
                        _format_real(r.emp_mean),
                        _format_real(r.pop_mean),
                        _format_real(r.bound_t5),
                    ]
                )
                + "\n"
            )


def read_csv(path) -> list:
    with open(path, "r", encoding="utf-8") as f:
        lines = [line.rstrip("\n") for line in f if line.strip()]
    if not lines or lines[0] != CSV_HEADER:
        raise SchemaError(f"bad header: expected '{CSV_HEADER}'")
    rows = []
    for i, line in enumerate(lines[1:], start=2):
        parts = line.split(",")
        if len(parts) != 14:
            raise SchemaError(f"line {i}: expected 14 fields, got {len(parts)}")
        if parts[7] not in ("true", "false"):
            raise SchemaError(f"line {i}: heterogeneous must be true/false")
        rows.append(
            SweepRow(
                K=int(parts[0]),
                R=int(parts[1]),
                n=int(parts[2]),
                M=int(parts[3]),
                theta=float(parts[4]),
                q=float(parts[5]),
                B=float(parts[6]),
                heterogeneous=parts[7] == "true",
                seed=int(parts[8]),
                gen_mean=float(parts[9]),
                gen_std=float(parts[10]),
                emp_mean=float(parts[11]),
                pop_mean=float(parts[12]),
                bound_t5=float(parts[13]),
            )
        )
    return rows


# -- config files ------------------------------------------------------------

_INT_KEYS = {"trials", "rff_dim", "epochs", "batch", "patience", "seed"}
_FLOAT_KEYS = {
    "theta",
    "q",
    "alpha",
    "b_override",
    "gamma",
    "eta0",
    "lr_decay",
    "min_improvement",
    "l2",
    "noise_sigma",
    "noise_fraction",
}
_BOOL_KEYS = {"project", "heterogeneous"}
_LIST_KEYS = {"k_list", "r_list", "n_list"}
_STR_KEYS = {"out_csv"}
_ALL_KEYS = _INT_KEYS | _FLOAT_KEYS | _BOOL_KEYS | _LIST_KEYS | _STR_KEYS


def parse_config(path) -> ExperimentConfig:
    """Read a flat `key = value` file; unknown keys are an error.

    Lists are comma-separated ints, booleans are true/false, blank lines
    and lines starting with # are ignored.
    """
    values = {}
    with open(path, "r", encoding="utf-8") as f:
        for lineno, raw in enumerate(f, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ConfigError(f"line {lineno}: expected 'key = value', got '{line}'")
            key, _, value = line.partition("=")
            key = key.strip()
            value = value.strip()
            if key not in _ALL_KEYS:
                raise ConfigError(f"line {lineno}: unknown key '{key}'")
            if key in values:
                raise ConfigError(f"line {lineno}: duplicate key '{key}'")
            try:
                if key in _LIST_KEYS:
                    values[key] = tuple(int(v.strip()) for v in value.split(","))
                elif key in _INT_KEYS:
                    values[key] = int(value)
                elif key in _FLOAT_KEYS:
                    values[key] = float(value)
                elif key in _BOOL_KEYS:
                    if value not in ("true", "false"):
                        raise ValueError(value)
                    values[key] = value == "true"
                else:
                    values[key] = value
            except ValueError as exc:
                raise ConfigError(f"line {lineno}: bad value for '{key}': {value}") from exc
    return ExperimentConfig(**values)
