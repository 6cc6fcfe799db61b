"""Training loop, prediction export and MAE reporting.

Deterministic under a fixed seed up to framework nondeterminism: torch CPU
kernels are deterministic in practice, but bit-reproducibility across torch
versions is not guaranteed and not required.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
from torch import nn

from .config import TrainConfig
from .data import Manifest, Registry, load_images, load_manifest, vectors_of
from .model import ControlRegressor


@dataclass
class TrainResult:
    model: ControlRegressor
    history: list  # dicts: epoch, lr, train_loss, val_mae
    best_val_mae: float
    checkpoint_path: str


def _lr_factor(epoch: int, epochs: int) -> float:
    """Linear warmup into cosine decay, by epoch."""
    warmup = max(1, epochs // 20)
    if epoch < warmup:
        return (epoch + 1) / warmup
    span = max(1, epochs - warmup)
    return 0.5 * (1.0 + math.cos(math.pi * (epoch - warmup) / span))


def pooled_mae(pred: np.ndarray, truth: np.ndarray) -> float:
    """Mean over all 30*N pooled absolute errors."""
    errors = np.sort(np.abs(pred - truth), axis=None)
    return float(errors.mean())


def predict(model: ControlRegressor, images: np.ndarray, batch_size: int = 256) -> np.ndarray:
    model.eval()
    outs = []
    with torch.no_grad():
        for s in range(0, len(images), batch_size):
            x = torch.from_numpy(images[s : s + batch_size])
            outs.append(model(x).double().numpy())
    return np.concatenate(outs)


def train(cfg: TrainConfig, manifest: Manifest | None = None) -> TrainResult:
    if manifest is None:
        manifest = load_manifest(cfg.manifest)
    registry = Registry.load(manifest.root / "registry.json")

    train_records = manifest.split("train")
    if not train_records:
        raise ValueError("train split is empty")

    torch.manual_seed(cfg.seed)
    rng = np.random.default_rng(cfg.seed)

    # carve a validation subset off the train split for checkpoint selection
    order = rng.permutation(len(train_records))
    n_val = min(len(train_records) - 1, int(round(cfg.val_fraction * len(train_records))))
    val_records = [train_records[i] for i in order[:n_val]]
    fit_records = [train_records[i] for i in order[n_val:]]
    if not val_records:
        # degenerate split (tiny datasets / val_fraction 0): validate in-sample
        val_records = fit_records

    x_fit = load_images(manifest.root, fit_records, cfg.input_size)
    y_fit = vectors_of(fit_records).astype(np.float32)
    x_val = load_images(manifest.root, val_records, cfg.input_size)
    y_val = registry.clamp(vectors_of(val_records))

    model = ControlRegressor(cfg.input_size)
    opt = torch.optim.AdamW(model.parameters(), lr=cfg.lr, weight_decay=cfg.weight_decay)
    loss_fn = nn.HuberLoss(delta=cfg.huber_delta)

    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    ckpt_path = out_dir / "best.pt"

    history = []
    best_val = float("inf")
    n = len(x_fit)
    for epoch in range(cfg.epochs):
        factor = _lr_factor(epoch, cfg.epochs)
        for g in opt.param_groups:
            g["lr"] = cfg.lr * factor

        model.train()
        perm = torch.randperm(n)
        total = 0.0
        batches = 0
        for s in range(0, n, cfg.batch_size):
            idx = perm[s : s + cfg.batch_size]
            x = torch.from_numpy(x_fit[idx.numpy()])
            y = torch.from_numpy(y_fit[idx.numpy()])
            opt.zero_grad()
            loss = loss_fn(model(x), y)
            loss.backward()
            opt.step()
            total += float(loss.detach())
            batches += 1

        val_pred = registry.clamp(predict(model, x_val))
        val_mae = pooled_mae(val_pred, y_val)
        history.append(
            {"epoch": epoch, "lr": cfg.lr * factor, "train_loss": total / batches,
             "val_mae": val_mae}
        )
        if val_mae < best_val:
            best_val = val_mae
            torch.save(model.state_dict(), ckpt_path)

    model.load_state_dict(torch.load(ckpt_path, weights_only=True))
    with open(out_dir / "history.csv", "w", newline="") as f:
        w = csv.DictWriter(f, fieldnames=["epoch", "lr", "train_loss", "val_mae"])
        w.writeheader()
        w.writerows(history)
    cfg.save(out_dir / "config.json")
    return TrainResult(model, history, best_val, str(ckpt_path))


def export_predictions(model: ControlRegressor, manifest: Manifest, cfg: TrainConfig,
                       path, split: str = "test") -> float:
    """Write prediction JSONL for a split and return the pooled MAE.

    Predictions are clamped into registry ranges before both export and
    scoring, so the file reproduces this function's MAE when re-scored.
    """
    registry = Registry.load(manifest.root / "registry.json")
    records = manifest.split(split)
    if not records:
        raise ValueError(f"{split} split is empty")
    images = load_images(manifest.root, records, cfg.input_size)
    pred = registry.clamp(predict(model, images))
    with open(path, "w") as f:
        for r, p in zip(records, pred):
            f.write(json.dumps({"id": r.id, "vector": [float(v) for v in p]}) + "\n")
    return pooled_mae(pred, vectors_of(records))
