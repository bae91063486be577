"""Grid training for the feature-space detector.

The hyperparameter sweep is fixed: layers {1, 4} x width {128, 1024} x
heads {2, 8} x learning rate {1e-4, 5e-5}, sixteen runs per dataset.
Every run is seeded, trains with Adam and cross entropy for at most 30
epochs, and stops early once validation accuracy has not improved for 10
epochs. The selected checkpoint is the epoch snapshot with the highest
validation accuracy across the whole grid.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import torch
from torch import nn

from .detector import MODALITIES, DtTransformer
from .errors import DivergedTraining, ShapeMismatch
from .formats import BINARY_LABELS, TERNARY_LABELS

GRID_LAYERS = (1, 4)
GRID_WIDTHS = (128, 1024)
GRID_HEADS = (2, 8)
GRID_LRS = (1e-4, 5e-5)

LABELS_BY_CLASSES = {2: BINARY_LABELS, 3: TERNARY_LABELS}


@dataclass(frozen=True)
class DetectorConfig:
    layers: int
    width: int
    heads: int
    lr: float
    dropout: float = 0.1
    batch_size: int = 512
    max_epochs: int = 30
    patience: int = 10
    classes: int = 2
    modality: str = "multimodal"
    seed: int = 0

    def __post_init__(self):
        if self.layers < 1:
            raise ValueError("layers must be positive")
        if self.width < 1 or self.heads < 1 or self.width % self.heads != 0:
            raise ValueError("width must be a positive multiple of heads")
        if self.lr <= 0:
            raise ValueError("learning rate must be positive")
        if not (0.0 <= self.dropout < 1.0):
            raise ValueError("dropout must be in [0, 1)")
        if self.batch_size < 1:
            raise ValueError("batch size must be positive")
        if self.max_epochs < 1 or self.patience < 1:
            raise ValueError("max_epochs and patience must be positive")
        if self.classes not in LABELS_BY_CLASSES:
            raise ValueError("classes must be 2 or 3")
        if self.modality not in MODALITIES:
            raise ValueError(f"modality must be one of {MODALITIES}")

    def label(self) -> str:
        return f"L{self.layers}-d{self.width}-h{self.heads}-lr{self.lr:g}"


def default_grid(
    classes: int = 2,
    modality: str = "multimodal",
    seed: int = 0,
    max_epochs: int = 30,
    batch_size: int = 512,
) -> tuple[DetectorConfig, ...]:
    """Enumerate the full sweep: exactly 16 configurations, fixed order."""
    configs = []
    for layers, width, heads, lr in itertools.product(GRID_LAYERS, GRID_WIDTHS, GRID_HEADS, GRID_LRS):
        configs.append(
            DetectorConfig(
                layers=layers,
                width=width,
                heads=heads,
                lr=lr,
                classes=classes,
                modality=modality,
                seed=seed,
                max_epochs=max_epochs,
                batch_size=batch_size,
            )
        )
    return tuple(configs)


@dataclass(frozen=True)
class ArraySplit:
    """One split of encoder features plus integer labels."""

    image: np.ndarray
    text: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        n = len(self.labels)
        if self.image.ndim != 2 or self.text.ndim != 2:
            raise ShapeMismatch("feature arrays must be two-dimensional")
        if self.image.shape[0] != n or self.text.shape[0] != n:
            raise ShapeMismatch(
                f"split sizes disagree: image {self.image.shape[0]}, "
                f"text {self.text.shape[0]}, labels {n}"
            )
        if n == 0:
            raise ShapeMismatch("empty split")

    def __len__(self) -> int:
        return len(self.labels)


@dataclass
class EpochLog:
    epoch: int
    train_loss: float
    val_accuracy: float


@dataclass
class ConfigLog:
    config: DetectorConfig
    epochs: list[EpochLog] = field(default_factory=list)
    best_epoch: int = 0
    best_val_accuracy: float = 0.0
    stopped_early: bool = False


@dataclass
class TrainResult:
    """Grid outcome: the winning snapshot plus the full per-config log."""

    best_log: ConfigLog
    best_state: dict
    image_dim: int
    text_dim: int
    logs: list[ConfigLog]

    @property
    def best_config(self) -> DetectorConfig:
        return self.best_log.config

    @property
    def best_val_accuracy(self) -> float:
        return self.best_log.best_val_accuracy


def _feed(config: DetectorConfig, image: torch.Tensor, text: torch.Tensor) -> dict:
    if config.modality == "image-only":
        return {"image": image}
    if config.modality == "text-only":
        return {"text": text}
    return {"image": image, "text": text}


def _to_tensors(split: ArraySplit) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
    image = torch.from_numpy(np.ascontiguousarray(split.image, dtype=np.float32))
    text = torch.from_numpy(np.ascontiguousarray(split.text, dtype=np.float32))
    labels = torch.from_numpy(np.ascontiguousarray(split.labels, dtype=np.int64))
    return image, text, labels


def evaluate_accuracy(model: DtTransformer, split: ArraySplit) -> float:
    image, text, labels = _to_tensors(split)
    config_modality = model.modality
    model.eval()
    with torch.no_grad():
        if config_modality == "image-only":
            logits = model(image=image)
        elif config_modality == "text-only":
            logits = model(text=text)
        else:
            logits = model(image=image, text=text)
        correct = (logits.argmax(dim=1) == labels).sum().item()
    return correct / len(split)


def train_one(config: DetectorConfig, train: ArraySplit, val: ArraySplit) -> tuple[ConfigLog, dict]:
    """Train a single configuration; returns its log and best state dict."""
    if train.image.shape[1] != val.image.shape[1] or train.text.shape[1] != val.text.shape[1]:
        raise ShapeMismatch("train and validation feature dimensions disagree")
    if int(train.labels.min()) < 0 or int(train.labels.max()) >= config.classes:
        raise ShapeMismatch(f"labels must lie in [0, {config.classes})")
    torch.manual_seed(config.seed)
    model = DtTransformer(
        image_dim=train.image.shape[1],
        text_dim=train.text.shape[1],
        width=config.width,
        layers=config.layers,
        heads=config.heads,
        classes=config.classes,
        modality=config.modality,
        dropout=config.dropout,
    )
    optimizer = torch.optim.Adam(model.parameters(), lr=config.lr)
    criterion = nn.CrossEntropyLoss()
    image, text, labels = _to_tensors(train)
    n = len(train)
    generator = torch.Generator().manual_seed(config.seed)

    log = ConfigLog(config=config)
    best_state: dict = {}
    since_best = 0
    for epoch in range(1, config.max_epochs + 1):
        model.train()
        perm = torch.randperm(n, generator=generator)
        total_loss = 0.0
        for start in range(0, n, config.batch_size):
            idx = perm[start : start + config.batch_size]
            optimizer.zero_grad()
            logits = model(**_feed(config, image[idx], text[idx]))
            loss = criterion(logits, labels[idx])
            if not torch.isfinite(loss):
                raise DivergedTraining(config.label(), epoch)
            loss.backward()
            optimizer.step()
            total_loss += loss.item() * len(idx)
        val_accuracy = evaluate_accuracy(model, val)
        log.epochs.append(EpochLog(epoch=epoch, train_loss=total_loss / n, val_accuracy=val_accuracy))
        if not log.best_epoch or val_accuracy > log.best_val_accuracy:
            log.best_epoch = epoch
            log.best_val_accuracy = val_accuracy
            best_state = {k: v.detach().clone() for k, v in model.state_dict().items()}
            since_best = 0
        else:
            since_best += 1
            if since_best >= config.patience:
                log.stopped_early = True
                break
    return log, best_state


def run_grid(
    train: ArraySplit,
    val: ArraySplit,
    grid: Iterable[DetectorConfig] | None = None,
    classes: int = 2,
    modality: str = "multimodal",
    seed: int = 0,
    progress=None,
) -> TrainResult:
    """Train every grid configuration and keep the best checkpoint.

    The winner is the configuration whose best epoch reached the highest
    validation accuracy; ties go to the earlier configuration in grid
    order.
    """
    configs = tuple(grid) if grid is not None else default_grid(classes=classes, modality=modality, seed=seed)
    if not configs:
        raise ValueError("empty grid")
    logs: list[ConfigLog] = []
    best_log: ConfigLog | None = None
    best_state: dict = {}
    for config in configs:
        log, state = train_one(config, train, val)
        logs.append(log)
        if best_log is None or log.best_val_accuracy > best_log.best_val_accuracy:
            best_log = log
            best_state = state
        if progress is not None:
            progress(log)
    assert best_log is not None
    return TrainResult(
        best_log=best_log,
        best_state=best_state,
        image_dim=train.image.shape[1],
        text_dim=train.text.shape[1],
        logs=logs,
    )


def build_model(config: DetectorConfig, image_dim: int, text_dim: int) -> DtTransformer:
    return DtTransformer(
        image_dim=image_dim,
        text_dim=text_dim,
        width=config.width,
        layers=config.layers,
        heads=config.heads,
        classes=config.classes,
        modality=config.modality,
        dropout=config.dropout,
    )


def predict(model: DtTransformer, image: np.ndarray | None, text: np.ndarray | None) -> tuple[list[str], np.ndarray]:
    """Label a batch; returns (labels, softmax scores of shape (n, classes))."""
    model.eval()
    kwargs = {}
    if model.image_proj is not None:
        if image is None:
            raise ShapeMismatch("image features are required")
        kwargs["image"] = torch.from_numpy(np.ascontiguousarray(image, dtype=np.float32))
    if model.text_proj is not None:
        if text is None:
            raise ShapeMismatch("text features are required")
        kwargs["text"] = torch.from_numpy(np.ascontiguousarray(text, dtype=np.float32))
    with torch.no_grad():
        logits = model(**kwargs)
        scores = torch.softmax(logits, dim=1).cpu().numpy()
    names = LABELS_BY_CLASSES[model.classes]
    labels = [names[i] for i in scores.argmax(axis=1)]
    return labels, scores


def save_checkpoint(result: TrainResult, path: str | Path) -> None:
    payload = {
        "config": asdict(result.best_config),
        "image_dim": result.image_dim,
        "text_dim": result.text_dim,
        "best_val_accuracy": result.best_val_accuracy,
        "state": result.best_state,
    }
    torch.save(payload, path)


def load_checkpoint(path: str | Path) -> tuple[DetectorConfig, DtTransformer]:
    payload = torch.load(path, map_location="cpu", weights_only=True)
    config = DetectorConfig(**payload["config"])
    model = build_model(config, payload["image_dim"], payload["text_dim"])
    model.load_state_dict(payload["state"])
    model.eval()
    return config, model


def grid_log_json(result: TrainResult) -> str:
    """Serialize the per-config training history for audit."""
    obj = {
        "best": {
            "config": asdict(result.best_config),
            "epoch": result.best_log.best_epoch,
            "val_accuracy": result.best_val_accuracy,
        },
        "configs": [
            {
                "config": asdict(log.config),
                "best_epoch": log.best_epoch,
                "best_val_accuracy": log.best_val_accuracy,
                "stopped_early": log.stopped_early,
                "epochs": [asdict(e) for e in log.epochs],
            }
            for log in result.logs
        ],
    }
    return json.dumps(obj, indent=2) + "\n"
