"""Local mini-batch hinge-loss SGD with an adaptive learning-rate rule.

One call to train_round trains one client on one round-chunk: e epochs,
each preceded by a reshuffle, with the learning rate starting at eta0 and
multiplied by lr_decay whenever the epoch loss has failed to improve on
the round's best by at least min_improvement for patience consecutive
epochs.  The epoch loss driving that rule is the mean hinge loss over the
whole chunk, evaluated with the weights at the end of the epoch
(regularization excluded).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin

from .data_ingest import LabeledSet
from .errors import DimensionError
from .rng import Stream

# Defaults: 40 epochs of batch-1 SGD at eta0 = 0.01, decayed x0.2 after 10
# stale epochs (improvement threshold 0.01); small L2 on by default,
# projection onto the unit ball off by default.
DEFAULT_EPOCHS = 40
DEFAULT_BATCH = 1
DEFAULT_ETA0 = 0.01
DEFAULT_LR_DECAY = 0.2
DEFAULT_PATIENCE = 10
DEFAULT_MIN_IMPROVEMENT = 0.01
DEFAULT_L2 = 1e-4


@dataclass(frozen=True)
class TrainerConfig:
    epochs: int = DEFAULT_EPOCHS
    batch_size: int = DEFAULT_BATCH
    eta0: float = DEFAULT_ETA0
    lr_decay: float = DEFAULT_LR_DECAY
    patience: int = DEFAULT_PATIENCE
    min_improvement: float = DEFAULT_MIN_IMPROVEMENT
    l2: float = DEFAULT_L2
    project: bool = False

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.eta0 <= 0.0:
            raise ValueError("eta0 must be > 0")
        if not 0.0 < self.lr_decay <= 1.0:
            raise ValueError("lr_decay must be in (0, 1]")
        if self.patience < 1:
            raise ValueError("patience must be >= 1")
        if self.min_improvement < 0.0:
            raise ValueError("min_improvement must be >= 0")
        if self.l2 < 0.0:
            raise ValueError("l2 must be >= 0")


@dataclass
class RoundResult:
    model: np.ndarray
    epoch_losses: list[float] = field(default_factory=list)
    epoch_etas: list[float] = field(default_factory=list)


def hinge_loss(x: np.ndarray, y: float, w: np.ndarray) -> float:
    """max(0, 1 - y<x, w>)."""
    if x.shape != w.shape:
        raise DimensionError(f"sample dim {x.shape} != weight dim {w.shape}")
    return max(0.0, 1.0 - y * float(np.dot(x, w)))


def mean_hinge(chunk: LabeledSet, w: np.ndarray) -> float:
    margins = chunk.y * (chunk.X @ w)
    return float(np.maximum(0.0, 1.0 - margins).mean())


def sgd_step(
    w: np.ndarray, X: np.ndarray, y: np.ndarray, eta: float, cfg: TrainerConfig
) -> np.ndarray:
    """One mini-batch update: subgradient of the mean hinge plus L2.

    Active samples (margin < 1) contribute -y*x; the step is
    w - eta*(mean subgradient + l2*w), then projection onto the unit
    ball when enabled.
    """
    if X.shape[0] == 0:
        raise ValueError("empty batch")
    if eta <= 0.0:
        raise ValueError("eta must be > 0")
    if X.shape[1] != w.shape[0]:
        raise DimensionError(f"batch dim {X.shape[1]} != weight dim {w.shape[0]}")
    margins = y * (X @ w)
    active = margins < 1.0
    grad = -(y[active, None] * X[active]).sum(axis=0) / X.shape[0]
    w = w - eta * (grad + cfg.l2 * w)
    if cfg.project:
        norm = float(np.linalg.norm(w))
        if norm > 1.0:
            w = w / norm
    return w


def train_round(
    w_init: np.ndarray, chunk: LabeledSet, cfg: TrainerConfig, seed: int
) -> RoundResult:
    """Run cfg.epochs epochs of mini-batch SGD over one round-chunk.

    Epoch i reshuffles the chunk with the child stream (seed, i) and walks
    it in consecutive batches of cfg.batch_size (trailing batch smaller if
    the sizes don't divide).  Deterministic given (w_init, chunk, cfg,
    seed).
    """
    if len(chunk) == 0:
        raise ValueError("cannot train on an empty chunk")
    w = np.array(w_init, dtype=np.float64)
    shuffler = Stream(seed)
    eta = cfg.eta0
    best = np.inf
    stale = 0
    losses: list[float] = []
    etas: list[float] = []
    m = len(chunk)
    b = cfg.batch_size
    for epoch in range(cfg.epochs):
        etas.append(eta)
        order = shuffler.spawn(epoch).permutation(m)
        X = chunk.X[order]
        y = chunk.y[order]
        if b == 1:
            # Tight loop bitwise-equal to sgd_step on single-sample batches.
            l2 = cfg.l2
            project = cfg.project
            zeros = np.zeros_like(w)
            for i in range(m):
                xi = X[i]
                grad = -(y[i] * xi) if y[i] * float(xi @ w) < 1.0 else zeros
                w = w - eta * (grad + l2 * w)
                if project:
                    norm = float(np.linalg.norm(w))
                    if norm > 1.0:
                        w = w / norm
        else:
            for start in range(0, m, b):
                w = sgd_step(w, X[start : start + b], y[start : start + b], eta, cfg)
        loss = mean_hinge(chunk, w)
        losses.append(loss)
        if loss <= best - cfg.min_improvement:
            best = loss
            stale = 0
        else:
            best = min(best, loss)
            stale += 1
            if stale >= cfg.patience:
                eta *= cfg.lr_decay
                stale = 0
    return RoundResult(model=w, epoch_losses=losses, epoch_etas=etas)


class HingeSGD(BaseEstimator, ClassifierMixin):
    """sklearn-style face of train_round for standalone use.

    fit(X, y) trains from zeros (or coef_init) as a single round over the
    full dataset; predict returns signs with the tie counted as -1.
    """

    def __init__(
        self,
        epochs: int = DEFAULT_EPOCHS,
        batch_size: int = DEFAULT_BATCH,
        eta0: float = DEFAULT_ETA0,
        lr_decay: float = DEFAULT_LR_DECAY,
        patience: int = DEFAULT_PATIENCE,
        min_improvement: float = DEFAULT_MIN_IMPROVEMENT,
        l2: float = DEFAULT_L2,
        project: bool = False,
        seed: int = 0,
    ):
        self.epochs = epochs
        self.batch_size = batch_size
        self.eta0 = eta0
        self.lr_decay = lr_decay
        self.patience = patience
        self.min_improvement = min_improvement
        self.l2 = l2
        self.project = project
        self.seed = seed

    def _config(self) -> TrainerConfig:
        return TrainerConfig(
            epochs=self.epochs,
            batch_size=self.batch_size,
            eta0=self.eta0,
            lr_decay=self.lr_decay,
            patience=self.patience,
            min_improvement=self.min_improvement,
            l2=self.l2,
            project=self.project,
        )

    def fit(self, X, y, coef_init=None):
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        w0 = np.zeros(X.shape[1]) if coef_init is None else np.asarray(coef_init, float)
        result = train_round(w0, LabeledSet(X, y), self._config(), self.seed)
        self.coef_ = result.model
        self.epoch_losses_ = result.epoch_losses
        return self

    def decision_function(self, X):
        return np.asarray(X, dtype=np.float64) @ self.coef_

    def predict(self, X):
        return np.where(self.decision_function(X) > 0.0, 1.0, -1.0)
