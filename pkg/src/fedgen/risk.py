"""0-1 and margin losses, empirical/population risks, generalization error.

Loss convention: a sample is charged loss 1 when its signed margin
y<x, w> fails to exceed the threshold (ties included), so theta = 0 is the
0-1 misclassification loss with zero margins counted as errors.  Under
this convention the zero model has risk 1 everywhere.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data_ingest import LabeledSet


@dataclass(frozen=True)
class RiskReport:
    emp_margin: float  # empirical margin risk on the training pool
    pop: float  # 0-1 risk averaged over per-client test sets
    gen: float  # pop - emp_margin
    theta: float

    def __post_init__(self):
        if not 0.0 <= self.emp_margin <= 1.0 or not 0.0 <= self.pop <= 1.0:
            raise ValueError("risks must lie in [0, 1]")

    @classmethod
    def build(cls, emp_margin: float, pop: float, theta: float) -> "RiskReport":
        return cls(emp_margin=emp_margin, pop=pop, gen=pop - emp_margin, theta=theta)


def margin_loss(x: np.ndarray, y: float, w: np.ndarray, theta: float) -> int:
    """1 when the signed margin y<x, w> is <= theta, else 0."""
    if theta < 0.0:
        raise ValueError("theta must be >= 0")
    return int(y * float(np.dot(x, w)) <= theta)


def margin_losses(dataset: LabeledSet, w: np.ndarray, theta: float) -> np.ndarray:
    if theta < 0.0:
        raise ValueError("theta must be >= 0")
    margins = dataset.y * (dataset.X @ w)
    return (margins <= theta).astype(np.float64)


def empirical_margin_risk(dataset: LabeledSet, w: np.ndarray, theta: float) -> float:
    if len(dataset) == 0:
        raise ValueError("empirical risk of an empty dataset")
    return float(margin_losses(dataset, w, theta).mean())


def population_risk(per_client_tests: list, w: np.ndarray) -> float:
    """Mean over clients of the 0-1 test risk (zero margins are errors)."""
    if not per_client_tests:
        raise ValueError("need at least one client test set")
    risks = []
    for test in per_client_tests:
        if len(test) == 0:
            raise ValueError("client test set is empty")
        risks.append(empirical_margin_risk(test, w, 0.0))
    return float(np.mean(risks))


def gen_error(emp_margin: float, pop: float) -> float:
    return pop - emp_margin
