"""Random Fourier feature map approximating the RBF kernel.

One frozen map is shared by every client, round, and trial of a run so
that averaged weight vectors live in a common feature space.  The map is
the single-cosine variant: z_i(x) = sqrt(2/d) * cos(omega_i . x + phase_i)
with omega rows ~ N(0, 2*gamma*I) and phases ~ Uniform[0, 2*pi), so
<z(x), z(x')> is unbiased for exp(-gamma * ||x - x'||^2).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .errors import DimensionError, ParameterError
from .rng import Stream, derive_seed


@dataclass(frozen=True)
class FeatureMap:
    omega: np.ndarray  # (d, input_dim) frequencies
    phase: np.ndarray  # (d,) offsets in [0, 2*pi)
    gamma: float
    d: int
    seed: int

    @property
    def input_dim(self) -> int:
        return int(self.omega.shape[1])


def build_feature_map(gamma: float, d: int, seed: int, input_dim: int = 784) -> FeatureMap:
    """Sample and freeze a feature map. Deterministic given seed."""
    if gamma <= 0.0:
        raise ParameterError(f"gamma must be > 0, got {gamma}")
    if d < 1:
        raise ParameterError(f"feature dimension must be >= 1, got {d}")
    if input_dim < 1:
        raise ParameterError(f"input dimension must be >= 1, got {input_dim}")
    omega_stream = Stream(derive_seed(seed, 1))
    phase_stream = Stream(derive_seed(seed, 2))
    omega = omega_stream.normals(d * input_dim).reshape(d, input_dim) * np.sqrt(2.0 * gamma)
    phase = phase_stream.uniforms(d) * 2.0 * np.pi
    return FeatureMap(omega=omega, phase=phase, gamma=gamma, d=d, seed=seed)


def apply_map(fmap: FeatureMap, x: np.ndarray) -> np.ndarray:
    """Map one vector or a (m, input_dim) batch into the feature space."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != fmap.input_dim:
        raise DimensionError(
            f"input has dimension {x.shape[-1]}, map expects {fmap.input_dim}"
        )
    return np.sqrt(2.0 / fmap.d) * np.cos(x @ fmap.omega.T + fmap.phase)


def rbf_kernel(x: np.ndarray, x2: np.ndarray, gamma: float) -> float:
    """Exact kernel value, the oracle the map approximates."""
    diff = np.asarray(x, dtype=np.float64) - np.asarray(x2, dtype=np.float64)
    return float(np.exp(-gamma * np.dot(diff, diff)))


class RandomFourierFeatures(BaseEstimator, TransformerMixin):
    """sklearn-style wrapper around the frozen map.

    fit() reads only the input dimension from X; transform() applies the
    map.  Parameters mirror build_feature_map.
    """

    def __init__(self, gamma: float = 0.05, n_components: int = 4000, seed: int = 0):
        self.gamma = gamma
        self.n_components = n_components
        self.seed = seed

    def fit(self, X, y=None):
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2:
            raise DimensionError("X must be 2-dimensional")
        self.feature_map_ = build_feature_map(
            self.gamma, self.n_components, self.seed, input_dim=X.shape[1]
        )
        return self

    def transform(self, X):
        if not hasattr(self, "feature_map_"):
            raise ParameterError("transformer not fitted")
        return apply_map(self.feature_map_, np.asarray(X, dtype=np.float64))
