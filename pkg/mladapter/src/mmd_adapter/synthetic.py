"""Planted-signal feature generator for training sanity checks.

Truthful pairs tie the text vector to its image through a fixed class
direction; falsified classes swap in a different direction. The signal
is close to linearly separable by construction, which gives an external
yardstick: a least-squares linear probe should already score well, and a
trained detector should score at least as well.
"""

from __future__ import annotations

import numpy as np

from .training import ArraySplit

_IMAGE_WEIGHT = 0.4
_CLASS_WEIGHT = 1.0
_NOISE_WEIGHT = 0.05


def _unit_rows(rows: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(rows, axis=1, keepdims=True)
    return rows / norms


def make_planted_split(n: int, dim: int, classes: int, rng: np.random.Generator) -> ArraySplit:
    if dim < classes + 1:
        raise ValueError("dim too small to hold the class directions")
    # Fixed orthonormal class directions, one per class, shared across draws.
    directions = np.eye(dim)[:classes]
    labels = np.arange(n) % classes
    image = _unit_rows(rng.standard_normal((n, dim)))
    noise = rng.standard_normal((n, dim))
    text = _IMAGE_WEIGHT * image + _CLASS_WEIGHT * directions[labels] + _NOISE_WEIGHT * noise
    text = _unit_rows(text)
    return ArraySplit(
        image=image.astype(np.float32),
        text=text.astype(np.float32),
        labels=labels.astype(np.int64),
    )


def make_planted_task(
    n_train: int,
    n_val: int,
    dim: int = 48,
    classes: int = 2,
    seed: int = 0,
) -> tuple[ArraySplit, ArraySplit]:
    rng = np.random.default_rng(seed)
    train = make_planted_split(n_train, dim, classes, rng)
    val = make_planted_split(n_val, dim, classes, rng)
    return train, val


def linear_probe_accuracy(train: ArraySplit, val: ArraySplit) -> float:
    """Least-squares one-hot probe on concatenated features.

    Solved in closed form with numpy only; serves as an independent lower
    bound on what a trained detector should reach.
    """
    x_train = np.concatenate([train.image, train.text], axis=1).astype(np.float64)
    x_val = np.concatenate([val.image, val.text], axis=1).astype(np.float64)
    ones = np.ones((len(x_train), 1))
    x_train = np.concatenate([x_train, ones], axis=1)
    x_val = np.concatenate([x_val, np.ones((len(x_val), 1))], axis=1)
    classes = int(train.labels.max()) + 1
    onehot = np.eye(classes)[train.labels]
    weights, *_ = np.linalg.lstsq(x_train, onehot, rcond=None)
    preds = (x_val @ weights).argmax(axis=1)
    return float((preds == val.labels).mean())
