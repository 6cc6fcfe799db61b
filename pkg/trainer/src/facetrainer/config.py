"""Training configuration."""

from __future__ import annotations

import json
from dataclasses import dataclass, asdict


@dataclass
class TrainConfig:
    manifest: str = ""
    epochs: int = 100
    batch_size: int = 128
    lr: float = 1e-3  # initial rate; cosine decay with linear warmup
    weight_decay: float = 0.05
    huber_delta: float = 0.01
    seed: int = 0
    input_size: int = 64  # images are downscaled to this before the encoder
    val_fraction: float = 0.1  # carved off the train split for checkpointing
    out_dir: str = "runs/default"

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, doc: dict) -> "TrainConfig":
        return cls(**doc)

    def save(self, path) -> None:
        with open(path, "w") as f:
            json.dump(self.to_json(), f, indent=2)
