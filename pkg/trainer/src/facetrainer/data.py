"""Dataset file access.

The trainer talks to the dataset pipeline exclusively through its on-disk
formats: the manifest JSONL (meta line first, one record per line), the
registry JSON next to it, and the PNG images the records point at.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image


class DataError(RuntimeError):
    pass


@dataclass
class Registry:
    names: list
    lows: np.ndarray
    highs: np.ndarray
    neutrals: np.ndarray

    @classmethod
    def load(cls, path) -> "Registry":
        with open(path) as f:
            doc = json.load(f)
        if len(doc) != 30:
            raise DataError(f"{path}: expected 30 channels, found {len(doc)}")
        return cls(
            names=[c["name"] for c in doc],
            lows=np.array([c["min"] for c in doc], dtype=np.float64),
            highs=np.array([c["max"] for c in doc], dtype=np.float64),
            neutrals=np.array([c["neutral"] for c in doc], dtype=np.float64),
        )

    def clamp(self, vectors: np.ndarray) -> np.ndarray:
        return np.clip(vectors, self.lows, self.highs)


@dataclass
class ManifestRecord:
    id: str
    image_path: str
    vector: np.ndarray
    split: str


@dataclass
class Manifest:
    root: Path
    records: list
    meta: dict

    def split(self, which: str) -> list:
        return [r for r in self.records if r.split == which]


def load_manifest(path) -> Manifest:
    path = Path(path)
    records = []
    with open(path) as f:
        meta = json.loads(f.readline())
        if meta.get("kind") != "meta":
            raise DataError(f"{path}: first line must be the meta object")
        for line in f:
            if not line.strip():
                continue
            d = json.loads(line)
            records.append(
                ManifestRecord(
                    id=d["id"],
                    image_path=d["image_path"],
                    vector=np.asarray(d["vector"], dtype=np.float64),
                    split=d["split"],
                )
            )
    return Manifest(root=path.parent, records=records, meta=meta)


def load_images(root, records, input_size: int) -> np.ndarray:
    """Load and downscale record images to (n, 1, s, s) float32 in [0, 1]."""
    root = Path(root)
    out = np.empty((len(records), 1, input_size, input_size), dtype=np.float32)
    for i, r in enumerate(records):
        p = root / r.image_path
        if not p.exists():
            raise DataError(f"missing image for record {r.id}: {p}")
        with Image.open(p) as im:
            im = im.convert("L")
            if im.size != (input_size, input_size):
                im = im.resize((input_size, input_size), Image.BILINEAR)
            out[i, 0] = np.asarray(im, dtype=np.float32) / 255.0
    return out


def vectors_of(records) -> np.ndarray:
    return np.stack([r.vector for r in records])
