"""Round-based federated training: local SGD per client, averaged per round.

Round r trains every client from the previous aggregate on that client's
round-r chunk only, then replaces the aggregate with the arithmetic mean
of the K local models.  The initial aggregate is the zero vector.  Seeds
for client k's round r derive from the run seed and (k, r), so they travel
with the client identity rather than its list position.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError
from .rng import derive_seed
from .trainer import TrainerConfig, train_round

_SEED_TAG_ROUND = 11


@dataclass(frozen=True)
class FLConfig:
    K: int
    R: int
    n: int
    trainer: TrainerConfig
    seed: int = 0

    def __post_init__(self):
        if self.K < 1:
            raise ValueError("K must be >= 1")
        if self.R < 1:
            raise ValueError("R must be >= 1")
        if self.n % self.R != 0:
            raise ValueError(f"R={self.R} must divide n={self.n}")


@dataclass
class RoundTrace:
    """Per-round local models and their aggregate, in round order."""

    locals_per_round: list  # list[list[np.ndarray]], one inner list per round
    aggregates: list  # list[np.ndarray]

    def __len__(self) -> int:
        return len(self.aggregates)


def aggregate(models: list) -> np.ndarray:
    """Coordinatewise arithmetic mean of K weight vectors."""
    if not models:
        raise ValueError("nothing to aggregate")
    dim = models[0].shape
    for m in models[1:]:
        if m.shape != dim:
            raise DimensionError(f"model shapes differ: {dim} vs {m.shape}")
    return np.mean(np.stack(models, axis=0), axis=0)


def run_fl(clients: list, cfg: FLConfig) -> tuple:
    """Run the full R-round protocol; returns (final model, trace).

    Each client must hold exactly cfg.R chunks of cfg.n / cfg.R samples in
    a common feature space.
    """
    if len(clients) != cfg.K:
        raise ValueError(f"got {len(clients)} clients, config says K={cfg.K}")
    n_r = cfg.n // cfg.R
    for client in clients:
        if len(client.rounds) != cfg.R:
            raise ValueError(
                f"client {client.client_id} has {len(client.rounds)} chunks, expected R={cfg.R}"
            )
        if any(len(chunk) != n_r for chunk in client.rounds):
            raise ValueError(f"client {client.client_id} has chunks of size != n/R={n_r}")
    dim = clients[0].rounds[0].X.shape[1]
    w_bar = np.zeros(dim)
    locals_per_round = []
    aggregates = []
    for r in range(cfg.R):
        local_models = []
        for client in clients:
            seed = derive_seed(cfg.seed, _SEED_TAG_ROUND, client.client_id, r)
            result = train_round(w_bar, client.rounds[r], cfg.trainer, seed)
            local_models.append(result.model)
        w_bar = aggregate(local_models)
        locals_per_round.append(local_models)
        aggregates.append(w_bar)
    return w_bar, RoundTrace(locals_per_round=locals_per_round, aggregates=aggregates)
