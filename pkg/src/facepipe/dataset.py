"""Dataset assembly: sample clips, render frames, dedup, write a versioned manifest.

Dataset directory layout:

    <root>/
      manifest.jsonl     # meta line (schema, build config, registry) + one record per line
      geometry.json      # renderer geometry used for every image
      registry.json      # control registry snapshot
      clips/<name>.json  # the source clips (kept so records stay re-derivable)
      images/<id>.png    # 8-bit grayscale frames
      dedup/<clip>.json  # per-clip dedup audit reports
"""

from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from . import clips as clips_mod
from .controls import ControlRegistry, neutral_vector, registry_default
from .clips import AnimationClip, sample_clip, save_clip
from .render import FaceGeometry, load_png, render, save_png
from .ssim import SsimParams, dedup

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1

TRAIN = "train"
TEST = "test"


class BuildError(RuntimeError):
    pass


class EmptyManifestError(ValueError):
    pass


@dataclass
class BuildConfig:
    timestep: float = 0.02
    theta: float = 0.99
    ssim_window: tuple | None = (8, 8)
    split_fraction: float = 0.8
    split_mode: str = "record"  # "record" or "clip"
    seed: int = 0
    resolution: int = 512
    workers: int = 1

    def to_json(self) -> dict:
        d = asdict(self)
        d["ssim_window"] = list(self.ssim_window) if self.ssim_window else None
        return d

    @classmethod
    def from_json(cls, doc: dict) -> "BuildConfig":
        d = dict(doc)
        if d.get("ssim_window") is not None:
            d["ssim_window"] = tuple(d["ssim_window"])
        return cls(**d)


@dataclass
class Record:
    id: str
    image_path: str
    clip_name: str
    timestamp: float
    vector: list
    split: str = TRAIN

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "image_path": self.image_path,
            "clip_name": self.clip_name,
            "timestamp": self.timestamp,
            "vector": self.vector,
            "split": self.split,
        }


@dataclass
class DatasetManifest:
    records: list
    registry_snapshot: list
    build_config: dict
    geometry: dict

    def split(self, which: str) -> list:
        return [r for r in self.records if r.split == which]


def _records_for_clip(clip: AnimationClip, cfg: BuildConfig, registry, geo, root: Path):
    seq = sample_clip(clip, cfg.timestep, registry)
    frames = [
        render(seq.vectors[i], geo, cfg.resolution, timestamp=float(seq.timestamps[i]))
        for i in range(len(seq))
    ]
    params = SsimParams(window=cfg.ssim_window)
    report = dedup(frames, cfg.theta, params)
    report.save(root / "dedup" / f"{clip.name}.json")
    records = []
    for i in report.kept_indices:
        rid = f"{clip.name}_{i:05d}"
        rel = f"images/{rid}.png"
        save_png(frames[i], root / rel)
        records.append(
            Record(
                id=rid,
                image_path=rel,
                clip_name=clip.name,
                timestamp=float(seq.timestamps[i]),
                vector=[float(x) for x in seq.vectors[i]],
            )
        )
    return records


def build(clips: list, cfg: BuildConfig, root, registry: ControlRegistry | None = None,
          geo: FaceGeometry | None = None) -> DatasetManifest:
    """Sample -> render -> dedup every clip, assign splits, write the manifest.

    Deterministic for a fixed config regardless of worker count: per-clip
    results are merged in clip order and the split shuffle is seeded.
    """
    registry = registry or registry_default()
    geo = geo or FaceGeometry.default(registry)
    root = Path(root)
    for sub in ("images", "clips", "dedup"):
        (root / sub).mkdir(parents=True, exist_ok=True)

    names = [c.name for c in clips]
    if len(set(names)) != len(names):
        raise BuildError("duplicate clip names would collide in record ids")

    for clip in clips:
        save_clip(clip, root / "clips" / f"{clip.name}.json", registry)

    if cfg.workers > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            per_clip = list(
                pool.map(lambda c: _records_for_clip(c, cfg, registry, geo, root), clips)
            )
    else:
        per_clip = [_records_for_clip(c, cfg, registry, geo, root) for c in clips]

    records = [r for lst in per_clip for r in lst]
    records.sort(key=lambda r: (r.clip_name, r.timestamp))
    ids = [r.id for r in records]
    if len(set(ids)) != len(ids):
        raise BuildError("duplicate record ids")

    _assign_split(records, cfg)

    manifest = DatasetManifest(
        records=records,
        registry_snapshot=registry.to_json(),
        build_config=cfg.to_json(),
        geometry=geo.to_json(),
    )
    registry.save(root / "registry.json")
    geo.save(root / "geometry.json")
    save_manifest(manifest, root / "manifest.jsonl")
    return manifest


def _assign_split(records: list, cfg: BuildConfig) -> None:
    rng = np.random.default_rng(cfg.seed)
    if cfg.split_mode == "clip":
        names = sorted({r.clip_name for r in records})
        order = rng.permutation(len(names))
        n_train = int(round(cfg.split_fraction * len(names)))
        train_names = {names[i] for i in order[:n_train]}
        for r in records:
            r.split = TRAIN if r.clip_name in train_names else TEST
    else:
        order = rng.permutation(len(records))
        n_train = int(round(cfg.split_fraction * len(records)))
        train_idx = set(order[:n_train].tolist())
        for i, r in enumerate(records):
            r.split = TRAIN if i in train_idx else TEST


def save_manifest(manifest: DatasetManifest, path) -> None:
    with open(path, "w") as f:
        meta = {
            "kind": "meta",
            "schema_version": SCHEMA_VERSION,
            "build_config": manifest.build_config,
            "registry": manifest.registry_snapshot,
            "geometry": manifest.geometry,
        }
        f.write(json.dumps(meta, sort_keys=True) + "\n")
        for r in manifest.records:
            f.write(json.dumps(r.to_json(), sort_keys=True) + "\n")


def load_manifest(path) -> DatasetManifest:
    with open(path) as f:
        meta = json.loads(f.readline())
        if meta.get("kind") != "meta":
            raise ValueError(f"{path}: first line must be the meta object")
        records = []
        for line in f:
            if line.strip():
                d = json.loads(line)
                records.append(Record(**d))
    return DatasetManifest(
        records=records,
        registry_snapshot=meta["registry"],
        build_config=meta["build_config"],
        geometry=meta["geometry"],
    )


# --- statistics -------------------------------------------------------------

@dataclass
class ChannelStats:
    names: list
    abbrevs: list
    mean: np.ndarray
    std: np.ndarray
    vmax: np.ndarray
    vmin: np.ndarray
    vneu: np.ndarray

    def rows(self):
        for i, name in enumerate(self.names):
            yield {
                "name": name,
                "abbrev": self.abbrevs[i],
                "mean": float(self.mean[i]),
                "std": float(self.std[i]),
                "vmax": float(self.vmax[i]),
                "vmin": float(self.vmin[i]),
                "vneu": float(self.vneu[i]),
            }


def stats(manifest: DatasetManifest) -> ChannelStats:
    """Population moments and extrema per channel, over both splits."""
    if not manifest.records:
        raise EmptyManifestError("cannot compute stats of an empty manifest")
    registry = ControlRegistry.from_json(manifest.registry_snapshot)
    mat = np.array([r.vector for r in manifest.records])
    return ChannelStats(
        names=registry.names(),
        abbrevs=registry.abbrevs(),
        mean=mat.mean(axis=0),
        std=mat.std(axis=0),  # population sigma (divide by N)
        vmax=mat.max(axis=0),
        vmin=mat.min(axis=0),
        vneu=neutral_vector(registry),
    )


def histograms(manifest: DatasetManifest, bins: int) -> dict:
    """Per-channel equal-width histograms over [range_min, range_max]."""
    if bins < 2:
        raise ValueError("bins must be >= 2")
    if not manifest.records:
        raise EmptyManifestError("cannot compute histograms of an empty manifest")
    registry = ControlRegistry.from_json(manifest.registry_snapshot)
    mat = np.array([r.vector for r in manifest.records])
    out = {}
    for i, ch in enumerate(registry.channels):
        counts, edges = np.histogram(mat[:, i], bins=bins, range=(ch.range_min, ch.range_max))
        out[ch.name] = {"counts": counts.tolist(), "edges": edges.tolist()}
    return out


# --- verification -----------------------------------------------------------

@dataclass
class VerifyResult:
    checked: int = 0
    vector_violations: list = field(default_factory=list)
    image_violations: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.vector_violations and not self.image_violations


def verify(root, check_images: bool = True) -> VerifyResult:
    """Re-derive every record from its clip: the stored vector must be bit-equal
    to re-sampling the clip at the stored timestamp and the stored image must be
    bit-equal to a fresh render of the stored vector."""
    root = Path(root)
    manifest = load_manifest(root / "manifest.jsonl")
    registry = ControlRegistry.from_json(manifest.registry_snapshot)
    geo = FaceGeometry.from_json(manifest.geometry)
    cfg = BuildConfig.from_json(manifest.build_config)
    result = VerifyResult()
    by_clip = {}
    for r in manifest.records:
        by_clip.setdefault(r.clip_name, []).append(r)
    for clip_name, recs in sorted(by_clip.items()):
        clip = clips_mod.load_clip(root / "clips" / f"{clip_name}.json", registry)
        seq = sample_clip(clip, cfg.timestep, registry)
        ts_index = {float(t): i for i, t in enumerate(seq.timestamps)}
        for r in recs:
            result.checked += 1
            i = ts_index.get(r.timestamp)
            if i is None:
                result.vector_violations.append((r.id, "timestamp not on the sampling grid"))
                continue
            if not np.array_equal(np.array(r.vector), seq.vectors[i]):
                result.vector_violations.append((r.id, "vector mismatch"))
            if check_images:
                stored = load_png(root / r.image_path)
                fresh = render(np.array(r.vector), geo, cfg.resolution)
                if not np.array_equal(stored.pixels, fresh.pixels):
                    result.image_violations.append((r.id, "image mismatch"))
    return result
