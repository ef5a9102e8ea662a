"""MNIST-style IDX ingestion and client-side data preparation.

Pipeline order matters and is fixed: decode IDX bytes, extract the binary
task (pixels scaled to [0,1], labels to +/-1), standardize with statistics
from the training pool only, distribute to clients, then (optionally)
inject per-client Gaussian noise in the standardized space.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .errors import CapacityError, ConsistencyError, DivisibilityError, IdxFormatError
from .rng import Stream, derive_seed

IMAGES_MAGIC = 0x00000803
LABELS_MAGIC = 0x00000801


@dataclass(frozen=True)
class RawImageSet:
    """Decoded IDX pair: uint8 images (count, rows, cols) + digit labels."""

    images: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        if self.images.shape[0] != self.labels.shape[0]:
            raise ConsistencyError(
                f"image count {self.images.shape[0]} != label count {self.labels.shape[0]}"
            )
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() > 9):
            raise ConsistencyError("labels must be digits in [0, 9]")

    @property
    def count(self) -> int:
        return int(self.images.shape[0])


@dataclass(frozen=True)
class LabeledSet:
    """A binary-task dataset: feature rows X and labels y in {-1, +1}."""

    X: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        if self.X.shape[0] != self.y.shape[0]:
            raise ConsistencyError(f"{self.X.shape[0]} rows but {self.y.shape[0]} labels")

    def __len__(self) -> int:
        return int(self.X.shape[0])

    def subset(self, idx) -> "LabeledSet":
        return LabeledSet(self.X[idx], self.y[idx])


@dataclass(frozen=True)
class ClientData:
    """One client's training data split into per-round chunks."""

    client_id: int
    rounds: list  # list[LabeledSet], disjoint, equal sizes

    @property
    def n(self) -> int:
        return sum(len(c) for c in self.rounds)


def load_mnist_idx(images_path, labels_path) -> RawImageSet:
    """Decode a big-endian IDX image/label file pair."""
    with open(images_path, "rb") as f:
        blob = f.read()
    if len(blob) < 16:
        raise IdxFormatError(f"{images_path}: truncated header")
    magic, count, rows, cols = struct.unpack(">IIII", blob[:16])
    if magic != IMAGES_MAGIC:
        raise IdxFormatError(
            f"{images_path}: magic 0x{magic:08X}, expected 0x{IMAGES_MAGIC:08X}"
        )
    expected = 16 + count * rows * cols
    if len(blob) != expected:
        raise IdxFormatError(f"{images_path}: {len(blob)} bytes, expected {expected}")
    images = np.frombuffer(blob, dtype=np.uint8, offset=16).reshape(count, rows, cols)

    with open(labels_path, "rb") as f:
        blob = f.read()
    if len(blob) < 8:
        raise IdxFormatError(f"{labels_path}: truncated header")
    magic, lcount = struct.unpack(">II", blob[:8])
    if magic != LABELS_MAGIC:
        raise IdxFormatError(
            f"{labels_path}: magic 0x{magic:08X}, expected 0x{LABELS_MAGIC:08X}"
        )
    if len(blob) != 8 + lcount:
        raise IdxFormatError(f"{labels_path}: {len(blob)} bytes, expected {8 + lcount}")
    labels = np.frombuffer(blob, dtype=np.uint8, offset=8)

    if count != lcount:
        raise ConsistencyError(f"images hold {count} samples but labels hold {lcount}")
    return RawImageSet(images=images, labels=labels)


def write_idx(raw: RawImageSet, images_path, labels_path) -> None:
    """Inverse of load_mnist_idx; round-trips bit-exactly."""
    count, rows, cols = raw.images.shape
    with open(images_path, "wb") as f:
        f.write(struct.pack(">IIII", IMAGES_MAGIC, count, rows, cols))
        f.write(raw.images.astype(np.uint8).tobytes())
    with open(labels_path, "wb") as f:
        f.write(struct.pack(">II", LABELS_MAGIC, count))
        f.write(raw.labels.astype(np.uint8).tobytes())


def extract_binary_task(raw: RawImageSet, pos_digit: int, neg_digit: int) -> LabeledSet:
    """Keep two digit classes, relabel to +/-1, scale pixels to [0, 1]."""
    if pos_digit == neg_digit:
        raise ValueError("positive and negative digits must differ")
    for d in (pos_digit, neg_digit):
        if not 0 <= d <= 9:
            raise ValueError(f"digit {d} outside [0, 9]")
    for d in (pos_digit, neg_digit):
        if not np.any(raw.labels == d):
            raise ValueError(f"no samples for digit {d}")
    keep = (raw.labels == pos_digit) | (raw.labels == neg_digit)
    X = raw.images[keep].reshape(int(keep.sum()), -1).astype(np.float64) / 255.0
    y = np.where(raw.labels[keep] == pos_digit, 1.0, -1.0)
    return LabeledSet(X=X, y=y)


def standardize(train: LabeledSet, others: list) -> tuple:
    """Zero-mean/unit-variance per feature, statistics from train only.

    Zero-variance features are left centered but not scaled (divide by 1).
    Returns (train_std, others_std, mean, std).
    """
    if len(train) == 0:
        raise ValueError("cannot standardize an empty training set")
    mean = train.X.mean(axis=0)
    std = train.X.std(axis=0)
    scale = np.where(std == 0.0, 1.0, std)
    t = LabeledSet((train.X - mean) / scale, train.y)
    o = [LabeledSet((s.X - mean) / scale, s.y) for s in others]
    return t, o, mean, std


def distribute_to_clients(pool: LabeledSet, K: int, n: int, R: int, seed: int) -> list:
    """Draw K*n samples without replacement and chunk them per client/round.

    Client k receives draws [k*n, (k+1)*n); its round r chunk is the next
    n/R of those in draw order.
    """
    if R <= 0 or n % R != 0:
        raise DivisibilityError(f"round count {R} must divide per-client size {n}")
    if len(pool) < K * n:
        raise CapacityError(f"pool holds {len(pool)} samples, need K*n = {K * n}")
    stream = Stream(seed)
    picked = stream.sample_indices(len(pool), K * n)
    n_r = n // R
    clients = []
    for k in range(K):
        mine = picked[k * n : (k + 1) * n]
        rounds = [pool.subset(mine[r * n_r : (r + 1) * n_r]) for r in range(R)]
        clients.append(ClientData(client_id=k, rounds=rounds))
    return clients


def inject_client_noise(
    clients: list,
    test: LabeledSet,
    sigma: float,
    fraction: float,
    seed: int,
) -> tuple:
    """Add N(0, sigma^2) noise to every feature of a fraction of clients.

    The ceil(fraction*K) clients at the head of a seeded shuffle of client
    indices are noisy.  Every client gets a test copy: a freshly-noised one
    for noisy clients, the shared clean set otherwise.  Returns
    (clients_out, per_client_tests).
    """
    if not 0.0 <= fraction <= 1.0:
        raise ValueError(f"fraction {fraction} outside [0, 1]")
    if sigma < 0.0:
        raise ValueError(f"sigma {sigma} must be >= 0")
    K = len(clients)
    n_noisy = int(np.ceil(fraction * K))
    order = Stream(derive_seed(seed, 1)).permutation(K)
    noisy_ids = set(order[:n_noisy])

    out_clients = []
    tests = []
    for client in clients:
        if client.client_id in noisy_ids and sigma > 0.0:
            cstream = Stream(derive_seed(seed, 2, client.client_id))
            rounds = []
            for chunk in client.rounds:
                noise = cstream.normals(chunk.X.size).reshape(chunk.X.shape) * sigma
                rounds.append(LabeledSet(chunk.X + noise, chunk.y))
            out_clients.append(ClientData(client.client_id, rounds))
            tstream = Stream(derive_seed(seed, 3, client.client_id))
            tnoise = tstream.normals(test.X.size).reshape(test.X.shape) * sigma
            tests.append(LabeledSet(test.X + tnoise, test.y))
        else:
            out_clients.append(client)
            tests.append(test)
    return out_clients, tests
