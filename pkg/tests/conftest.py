"""Shared fixtures: a deterministic MNIST-shaped synthetic task.

Real MNIST IDX files are used when FEDGEN_MNIST_DIR points at a directory
holding the four standard files; otherwise tests fall back to a generated
stroke-vs-ring task with the same geometry (28x28 uint8 images, digit
labels, the same 1135/958 positive/negative test split of 2093), pushed
through the identical ingest pipeline.
"""

from __future__ import annotations

import functools
import os
from pathlib import Path

import numpy as np
import pytest

from fedgen.data_ingest import (
    RawImageSet,
    extract_binary_task,
    load_mnist_idx,
    standardize,
    write_idx,
)
from fedgen.rng import Stream


def pytest_runtest_logreport(report):
    """One visible PASS/FAIL/SKIP line per acceptance criterion."""
    if "test_acceptance.py" not in report.nodeid:
        return
    name = report.nodeid.split("::")[-1]
    if report.when == "call" and report.passed:
        print(f"\nACCEPTANCE {name}: PASS")
    elif report.failed:
        print(f"\nACCEPTANCE {name}: FAIL")
    elif report.skipped:
        print(f"\nACCEPTANCE {name}: SKIP")


MNIST_ENV = "FEDGEN_MNIST_DIR"
MNIST_FILES = {
    "train_images": "train-images-idx3-ubyte",
    "train_labels": "train-labels-idx1-ubyte",
    "test_images": "t10k-images-idx3-ubyte",
    "test_labels": "t10k-labels-idx1-ubyte",
}

_YY, _XX = np.mgrid[0:28, 0:28]


def _draw_one(stream: Stream) -> np.ndarray:
    """Vertical stroke with jittered position, slant, width, intensity."""
    c = 9 + stream.randbelow(10)
    slant = (stream.randbelow(9) - 4) / 10.0
    width = 1.2 + stream.randbelow(14) / 10.0
    top = 3 + stream.randbelow(4)
    bottom = 22 + stream.randbelow(4)
    intensity = 150 + stream.randbelow(106)
    center = c + slant * (_YY - 14)
    img = np.where(
        (np.abs(_XX - center) <= width) & (_YY >= top) & (_YY <= bottom),
        float(intensity),
        0.0,
    )
    return img


def _draw_six(stream: Stream) -> np.ndarray:
    """Ring plus tail with jittered center, radius, thickness, intensity."""
    cx = 11 + stream.randbelow(7)
    cy = 13 + stream.randbelow(6)
    radius = 4.0 + stream.randbelow(30) / 10.0
    thick = 1.1 + stream.randbelow(12) / 10.0
    intensity = 150 + stream.randbelow(106)
    dist = np.sqrt((_XX - cx) ** 2 + (_YY - cy) ** 2)
    ring = np.abs(dist - radius) <= thick
    tail = (np.abs(_XX - (cx + radius * 0.4)) <= thick) & (_YY >= cy - radius - 6) & (_YY <= cy)
    return np.where(ring | tail, float(intensity), 0.0)


def _draw_other(stream: Stream) -> np.ndarray:
    """Horizontal bar, used for digits that the binary task must drop."""
    row = 8 + stream.randbelow(12)
    intensity = 150 + stream.randbelow(106)
    return np.where(np.abs(_YY - row) <= 1.5, float(intensity), 0.0)


def _finish(img: np.ndarray, stream: Stream, noise_sd: float) -> np.ndarray:
    # Speckle the ink only: backgrounds stay exactly zero, as in scanned
    # digits, so constant pixels survive per-feature standardization.
    noise = stream.normals(784).reshape(28, 28) * noise_sd
    noisy = img + noise * (img > 0)
    return np.clip(noisy, 0.0, 255.0).astype(np.uint8)


@functools.lru_cache(maxsize=8)
def synthetic_raw(
    n_ones: int,
    n_sixes: int,
    n_other: int,
    seed: int,
    noise_sd: float = 25.0,
    confuse_pct: int = 12,
):
    """Deterministic RawImageSet with interleaved classes.

    confuse_pct percent of the binary-task samples are drawn with the other
    class's shape while keeping their own label: irreducibly hard examples
    that keep hinge gradients conflicting, as heavily overlapping real
    digits do.
    """
    stream = Stream(seed)
    drawers = {1: _draw_one, 6: _draw_six, 3: _draw_other}
    order = [1] * n_ones + [6] * n_sixes + [3] * n_other
    Stream(seed ^ 0x5EED).shuffle(order)
    images = []
    for digit in order:
        shape = digit
        if digit in (1, 6) and stream.randbelow(100) < confuse_pct:
            shape = 7 - digit
        images.append(_finish(drawers[shape](stream), stream, noise_sd))
    return RawImageSet(images=np.stack(images), labels=np.array(order, dtype=np.uint8))


def mnist_dir() -> Path | None:
    root = os.environ.get(MNIST_ENV, "").strip()
    if not root:
        return None
    root = Path(root)
    if all((root / name).exists() for name in MNIST_FILES.values()):
        return root
    return None


@pytest.fixture(scope="session")
def raw_train():
    root = mnist_dir()
    if root is not None:
        return load_mnist_idx(root / MNIST_FILES["train_images"], root / MNIST_FILES["train_labels"])
    return synthetic_raw(6500, 6500, 300, seed=20250808)


@pytest.fixture(scope="session")
def raw_test():
    root = mnist_dir()
    if root is not None:
        return load_mnist_idx(root / MNIST_FILES["test_images"], root / MNIST_FILES["test_labels"])
    return synthetic_raw(1135, 958, 100, seed=20250809)


@pytest.fixture(scope="session")
def task(raw_train, raw_test):
    """Standardized (train, test) binary task, digits 1 vs 6."""
    train = extract_binary_task(raw_train, 1, 6)
    test = extract_binary_task(raw_test, 1, 6)
    train_std, (test_std,), _, _ = standardize(train, [test])
    return train_std, test_std


@pytest.fixture()
def idx_files(tmp_path):
    """Small synthetic IDX files on disk, for CLI-level tests."""
    train = synthetic_raw(700, 700, 40, seed=11)
    test = synthetic_raw(160, 140, 20, seed=12)
    paths = {
        "train_images": tmp_path / "train-images-idx3-ubyte",
        "train_labels": tmp_path / "train-labels-idx1-ubyte",
        "test_images": tmp_path / "t10k-images-idx3-ubyte",
        "test_labels": tmp_path / "t10k-labels-idx1-ubyte",
    }
    write_idx(train, paths["train_images"], paths["train_labels"])
    write_idx(test, paths["test_images"], paths["test_labels"])
    return paths
