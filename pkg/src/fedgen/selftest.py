"""Built-in oracle suite behind the `selftest` CLI command.

Every check recomputes its expected value through an independent route
(hand arithmetic, a dense grid search, a step-by-step replay) and compares
the implementation against it.  No external data is required, so a fresh
checkout passes or fails on its own.
"""

from __future__ import annotations

import math
import struct
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import bounds, data_ingest, experiment, features, fl_sim, risk, trainer
from .data_ingest import LabeledSet
from .rng import Stream


def _check_load_mnist_idx() -> None:
    # Two 2x2 images written byte by byte per the IDX layout.
    images = bytes(
        struct.pack(">IIII", 0x00000803, 2, 2, 2) + bytes([0, 1, 2, 3, 250, 251, 252, 253])
    )
    labels = bytes(struct.pack(">II", 0x00000801, 2) + bytes([1, 6]))
    with tempfile.TemporaryDirectory() as tmp:
        ipath, lpath = Path(tmp) / "img", Path(tmp) / "lab"
        ipath.write_bytes(images)
        lpath.write_bytes(labels)
        raw = data_ingest.load_mnist_idx(ipath, lpath)
    assert raw.count == 2
    assert raw.images.tolist() == [[[0, 1], [2, 3]], [[250, 251], [252, 253]]]
    assert raw.labels.tolist() == [1, 6]


def _check_standardize() -> None:
    X = np.array([[0.0, 5.0, 1.0], [2.0, 5.0, 2.0], [4.0, 5.0, 6.0]])
    train = LabeledSet(X, np.array([1.0, -1.0, 1.0]))
    out, _, mean, std = data_ingest.standardize(train, [])
    # spreadsheet recomputation: means (2, 5, 3), stds (sqrt(8/3), 0, sqrt(14/3))
    exp_mean = np.array([2.0, 5.0, 3.0])
    exp_std = np.array([math.sqrt(8.0 / 3.0), 0.0, math.sqrt(14.0 / 3.0)])
    assert np.allclose(mean, exp_mean, atol=1e-12)
    assert np.allclose(std, exp_std, atol=1e-12)
    exp = (X - exp_mean) / np.where(exp_std == 0, 1.0, exp_std)
    assert np.allclose(out.X, exp, atol=1e-12)


def _check_apply_map() -> None:
    fmap = features.build_feature_map(0.05, 4000, seed=97, input_dim=784)
    pair_stream = Stream(1234)
    errors = []
    for i in range(100):
        x = pair_stream.normals(784) * 0.1
        x2 = x + pair_stream.normals(784) * (0.01 + 0.003 * i)
        approx = float(np.dot(features.apply_map(fmap, x), features.apply_map(fmap, x2)))
        exact = features.rbf_kernel(x, x2, 0.05)
        errors.append(abs(approx - exact))
        if i == 0:
            z = features.apply_map(fmap, x)
            assert abs(float(np.dot(z, z)) - 1.0) <= 0.1
    assert float(np.mean(errors)) <= 0.05, f"mean kernel error {np.mean(errors)}"


def _check_hinge_loss() -> None:
    val = trainer.hinge_loss(np.array([1.0, 0.0]), 1.0, np.array([0.5, 0.0]))
    assert abs(val - 0.5) < 1e-15  # 1 - 0.5 by hand


def _check_sgd_step() -> None:
    cfg = trainer.TrainerConfig(l2=0.0, project=True)
    w = trainer.sgd_step(
        np.zeros(2), np.array([[1.0, 0.0]]), np.array([1.0]), 0.1, cfg
    )
    assert np.allclose(w, [0.1, 0.0], atol=1e-15)


def _check_train_round() -> None:
    # 4-sample chunk, 2 epochs of batch-1 updates replayed step by step.
    X = np.array([[1.0, 0.0], [0.0, 1.0], [-1.0, 0.5], [0.5, -1.0]])
    y = np.array([1.0, -1.0, -1.0, 1.0])
    cfg = trainer.TrainerConfig(epochs=2, batch_size=1, eta0=0.1, l2=0.0, project=False)
    result = trainer.train_round(np.zeros(2), LabeledSet(X, y), cfg, seed=555)

    w = np.zeros(2)
    shuffler = Stream(555)
    for epoch in range(2):
        for i in shuffler.spawn(epoch).permutation(4):
            if y[i] * float(X[i] @ w) < 1.0:
                w = w + 0.1 * y[i] * X[i]
    assert np.array_equal(result.model, w), f"{result.model} vs replay {w}"


def _check_run_fl() -> None:
    # Two mirrored one-sample clients, R=1, e=1, b=1, eta0=0.1:
    # each local model is one hinge step from zero, aggregate is the mean.
    cfg = trainer.TrainerConfig(epochs=1, batch_size=1, eta0=0.1, l2=0.0)
    clients = [
        data_ingest.ClientData(0, [LabeledSet(np.array([[1.0, 0.0]]), np.array([1.0]))]),
        data_ingest.ClientData(1, [LabeledSet(np.array([[0.0, 1.0]]), np.array([-1.0]))]),
    ]
    final, trace = fl_sim.run_fl(clients, fl_sim.FLConfig(K=2, R=1, n=1, trainer=cfg, seed=3))
    # hand trace: w0 = (0.1, 0); w1 = (0, -0.1); mean = (0.05, -0.05)
    assert np.allclose(final, [0.05, -0.05], atol=1e-15)
    assert len(trace) == 1


def _check_margin_loss() -> None:
    X = np.array([[1.0, 0.0], [0.0, 1.0]])
    y = np.array([1.0, -1.0])
    w = np.array([1.0, 0.0])
    losses = risk.margin_losses(LabeledSet(X, y), w, 0.5)
    assert losses.tolist() == [0.0, 1.0]  # margins 1 and 0 by hand
    assert risk.empirical_margin_risk(LabeledSet(X, y), w, 0.5) == 0.5


def _check_population_risk() -> None:
    w = np.array([1.0])
    # client A: 9 correct, 1 wrong -> 0.1; client B: 7 correct, 3 wrong -> 0.3
    a = LabeledSet(np.ones((10, 1)), np.array([1.0] * 9 + [-1.0]))
    b = LabeledSet(np.ones((10, 1)), np.array([1.0] * 7 + [-1.0] * 3))
    val = risk.population_risk([a, b], w)
    assert abs(val - 0.2) < 1e-15


def _grid_oracle(r: int, p: bounds.BoundParams, step: float = 1e-5) -> float:
    t_lo = p.q ** (p.R - r)
    t_hi = max(t_lo, p.K * p.theta / p.B) + 1.0
    grid = np.arange(t_lo, t_hi, step)
    extra = [t_lo, t_hi]
    kink = p.K * p.theta / (2.0 * p.B)
    if t_lo <= kink <= t_hi:
        extra.append(kink)
    grid = np.concatenate([grid, np.array(extra)])
    vals = grid * np.log(np.maximum(p.K * p.theta / (p.B * grid), 2.0))
    return float(vals.min())


def _check_round_term() -> None:
    p = bounds.BoundParams(n=99, K=10, R=3, theta=0.5, B=1.0, q=0.5)
    got3 = bounds.round_term(3, p)
    assert abs(got3 - math.log(5.0)) < 1e-6, got3  # attained at t = 1
    assert abs(got3 - _grid_oracle(3, p)) < 1e-6
    got1 = bounds.round_term(1, p)
    assert abs(got1 - 0.25 * math.log(20.0)) < 1e-6, got1  # attained at t = 0.25
    assert abs(got1 - _grid_oracle(1, p)) < 1e-6


def _check_margin_bound() -> None:
    p = bounds.BoundParams(n=100, K=10, R=1, theta=0.5, B=1.0, q=0.5)
    got = bounds.margin_bound(p)
    # independent arithmetic: sqrt(log(100*10*sqrt(10)) * log 5 / 2500)
    exp = math.sqrt(math.log(100 * 10 * math.sqrt(10)) * math.log(5.0) / 2500.0)
    assert abs(got - exp) < 1e-9, (got, exp)
    assert abs(got - 0.0720) < 5e-4


def _client_count_condition() -> None:
    base = dict(n=100, R=4, theta=0.5, B=1.0, q=0.5, alpha=1.0)
    # simplified: K^2 >= max(2, 48) = 48
    _, simplified7 = bounds.client_count_condition(bounds.BoundParams(K=7, **base))
    _, simplified6 = bounds.client_count_condition(bounds.BoundParams(K=6, **base))
    assert simplified7 and not simplified6
    # full rhs by direct arithmetic: 2 * max(2*max(.25,.125), 12*max(.5,.5,.375)) = 2*6 = 12
    holds4, _ = bounds.client_count_condition(bounds.BoundParams(K=4, **base))
    holds3, _ = bounds.client_count_condition(bounds.BoundParams(K=3, **base))
    assert holds4 and not holds3


def _check_kl_gaussian_iso() -> None:
    got = bounds.kl_gaussian_iso(np.array([1.0]), 1.0, np.array([0.0]), 1.0)
    assert abs(got - 0.5) < 1e-15  # mu^2/2 closed form


def _check_pac_bayes_expectation() -> None:
    got = bounds.pac_bayes_expectation_bound(1.0, 100, 1, 0.5, 0.05)
    exp = math.sqrt((1.0 + math.log(4000.0)) / 199.0)
    assert abs(got - exp) < 1e-12
    assert abs(got - 0.216) < 1e-3


def _check_pac_bayes_tail() -> None:
    post = bounds.GaussianPosterior(
        mean=np.array([0.0]), variance=1.0, prior_mean=np.array([1.0]), prior_variance=1.0
    )
    got = bounds.pac_bayes_tail_logratio(np.array([0.0]), post)
    assert abs(got - 0.5) < 1e-15  # quadratic forms by hand


def _check_estimate_contraction() -> None:
    # no active hinge terms, one full-batch step: pure (1 - eta*l2) shrinkage
    X = np.array([[10.0, 0.0], [-10.0, 0.0]])
    y = np.array([1.0, -1.0])
    cfg = trainer.TrainerConfig(
        epochs=1, batch_size=2, eta0=0.1, l2=0.5, project=False, min_improvement=0.0
    )
    got = bounds.estimate_contraction(
        LabeledSet(X, y),
        cfg,
        np.array([0.2, 0.0]),  # margins 2 and 4: hinge inactive from both inits
        np.array([0.4, 0.0]),
        seed=7,
    )
    assert abs(got - (1.0 - 0.1 * 0.5)) < 1e-12, got


def _check_csv_roundtrip() -> None:
    rows = [
        experiment.SweepRow(10, 5, 100, 20, 0.5, 0.5, 1.01, False, 42, 0.0123, 0.004, 0.02, 0.0323, 0.0721),
        experiment.SweepRow(50, 1, 100, 20, 0.5, 0.5, 1.01, True, 42, -0.001, 0.0, 0.5, 0.499, 0.031),
    ]
    with tempfile.TemporaryDirectory() as tmp:
        path = Path(tmp) / "rows.csv"
        experiment.write_csv(rows, path)
        back = experiment.read_csv(path)
    assert len(back) == 2
    for a, b in zip(rows, back):
        assert (a.K, a.R, a.n, a.M, a.heterogeneous, a.seed) == (b.K, b.R, b.n, b.M, b.heterogeneous, b.seed)
        for name in ("theta", "q", "B", "gen_mean", "gen_std", "emp_mean", "pop_mean", "bound_t5"):
            assert abs(getattr(a, name) - getattr(b, name)) < 1e-9


CHECKS = [
    ("data_ingest.load_mnist_idx", _check_load_mnist_idx),
    ("data_ingest.standardize", _check_standardize),
    ("features.apply_map", _check_apply_map),
    ("trainer.hinge_loss", _check_hinge_loss),
    ("trainer.sgd_step", _check_sgd_step),
    ("trainer.train_round", _check_train_round),
    ("fl_sim.run_fl", _check_run_fl),
    ("risk.margin_loss", _check_margin_loss),
    ("risk.population_risk", _check_population_risk),
    ("bounds.round_term", _check_round_term),
    ("bounds.margin_bound", _check_margin_bound),
    ("bounds.client_count_condition", _client_count_condition),
    ("bounds.kl_gaussian_iso", _check_kl_gaussian_iso),
    ("bounds.pac_bayes_expectation_bound", _check_pac_bayes_expectation),
    ("bounds.pac_bayes_tail_logratio", _check_pac_bayes_tail),
    ("bounds.estimate_contraction", _check_estimate_contraction),
    ("experiment.write_csv", _check_csv_roundtrip),
]


def run_selftest(out=None) -> list:
    """Run every check; returns the names of the failures."""
    out = out or sys.stdout
    failures = []
    for name, check in CHECKS:
        try:
            check()
        except Exception as exc:  # report and keep going
            failures.append(name)
            print(f"{name} FAIL ({exc})", file=out)
        else:
            print(f"{name} pass", file=out)
    return failures
