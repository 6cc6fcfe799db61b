"""Command-line entry point: train a regressor and export predictions."""

from __future__ import annotations

import sys
from pathlib import Path

import click

from .config import TrainConfig
from .data import DataError, load_manifest
from .train import export_predictions, train


@click.group()
def main():
    """Image-to-control regressor trainer."""


@main.command("train")
@click.option("--manifest", required=True, type=click.Path(exists=True))
@click.option("--epochs", type=int, default=100, show_default=True)
@click.option("--batch-size", type=int, default=128, show_default=True)
@click.option("--lr", type=float, default=1e-3, show_default=True)
@click.option("--weight-decay", type=float, default=0.05, show_default=True)
@click.option("--huber-delta", type=float, default=0.01, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--input-size", type=int, default=64, show_default=True)
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--predictions", "pred_path", type=click.Path(), default=None,
              help="also export test-split predictions to this JSONL")
def train_cmd(manifest, epochs, batch_size, lr, weight_decay, huber_delta, seed,
              input_size, out_dir, pred_path):
    """Train on the manifest's train split; keep the best-by-validation model."""
    cfg = TrainConfig(
        manifest=manifest, epochs=epochs, batch_size=batch_size, lr=lr,
        weight_decay=weight_decay, huber_delta=huber_delta, seed=seed,
        input_size=input_size, out_dir=out_dir,
    )
    try:
        m = load_manifest(manifest)
        result = train(cfg, m)
    except (DataError, ValueError, OSError) as e:
        click.echo(f"error: {e}", err=True)
        sys.exit(1)
    click.echo(f"best val MAE {result.best_val_mae:.6f}, checkpoint {result.checkpoint_path}")
    if pred_path:
        mae = export_predictions(result.model, m, cfg, pred_path)
        click.echo(f"test MAE {mae:.6f}, predictions {pred_path}")


@main.command("export")
@click.option("--manifest", required=True, type=click.Path(exists=True))
@click.option("--run", "run_dir", required=True, type=click.Path(exists=True),
              help="training output directory holding best.pt and config.json")
@click.option("--split", default="test", show_default=True)
@click.option("--out", "pred_path", required=True, type=click.Path())
def export_cmd(manifest, run_dir, split, pred_path):
    """Export predictions from a saved checkpoint."""
    import json

    import torch

    from .model import ControlRegressor

    run = Path(run_dir)
    with open(run / "config.json") as f:
        cfg = TrainConfig.from_json(json.load(f))
    model = ControlRegressor(cfg.input_size)
    model.load_state_dict(torch.load(run / "best.pt", weights_only=True))
    try:
        m = load_manifest(manifest)
        mae = export_predictions(model, m, cfg, pred_path, split=split)
    except (DataError, ValueError, OSError) as e:
        click.echo(f"error: {e}", err=True)
        sys.exit(1)
    click.echo(f"{split} MAE {mae:.6f}, predictions {pred_path}")


if __name__ == "__main__":
    main()
