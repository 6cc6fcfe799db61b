"""Command-line entry point for the whole pipeline.

Config precedence: explicit flags > --config JSON file > built-in defaults.
The resolved config is embedded in every manifest for provenance.  The
dataset root may also come from the FACEPIPE_DATA_ROOT environment variable.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click
import numpy as np

from . import clips as clips_mod
from . import dataset as ds
from .controls import registry_default
from .evaluation import (
    FilePredictor,
    NearestNeighborPredictor,
    RandomControlPredictor,
    RandomTrainingPredictor,
    compare,
    load_split_images,
    reports_to_csv,
    score,
    score_prediction_file,
)


def _fail(message: str) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(1)


def _resolve_cfg(config_path, **flags) -> ds.BuildConfig:
    base = {}
    if config_path:
        with open(config_path) as f:
            base = json.load(f)
    merged = dict(base)
    for k, v in flags.items():
        if v is not None:
            merged[k] = v
    return ds.BuildConfig.from_json({**ds.BuildConfig().to_json(), **merged})


def _dataset_root(value) -> Path:
    import os

    if value:
        return Path(value)
    env = os.environ.get("FACEPIPE_DATA_ROOT")
    if env:
        return Path(env)
    _fail("no dataset root given (flag or FACEPIPE_DATA_ROOT)")


@click.group()
def main():
    """Facial-control animation dataset pipeline."""


@main.command("gen-clips")
@click.option("--n", type=int, default=20, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", "out_dir", required=True, type=click.Path())
def gen_clips(n, seed, out_dir):
    """Generate deterministic synthetic animation clips."""
    registry = registry_default()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for clip in clips_mod.make_synthetic_clips(n, seed, registry):
        clips_mod.save_clip(clip, out / f"{clip.name}.json", registry)
    click.echo(f"wrote {n} clips to {out}")


@main.command()
@click.option("--clip", "clip_path", required=True, type=click.Path(exists=True))
@click.option("--timestep", type=float, default=None, help="sampling timestep in seconds")
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--out", "out_path", required=True, type=click.Path())
def sample(clip_path, timestep, config_path, out_path):
    """Sample one clip to a JSONL of (timestamp, vector) rows."""
    cfg = _resolve_cfg(config_path, timestep=timestep)
    registry = registry_default()
    try:
        clip = clips_mod.load_clip(clip_path, registry)
    except clips_mod.ClipParseError as e:
        _fail(str(e))
    seq = clips_mod.sample_clip(clip, cfg.timestep, registry)
    with open(out_path, "w") as f:
        for i in range(len(seq)):
            f.write(
                json.dumps(
                    {"timestamp": float(seq.timestamps[i]), "vector": list(seq.vectors[i])}
                )
                + "\n"
            )
    click.echo(f"wrote {len(seq)} samples to {out_path}")


@main.command()
@click.option("--clips", "clips_dir", required=True, type=click.Path(exists=True))
@click.option("--out", "out_dir", type=click.Path(), default=None)
@click.option("--timestep", type=float, default=None)
@click.option("--theta", type=float, default=None)
@click.option("--split", "split_fraction", type=float, default=None)
@click.option("--split-mode", type=click.Choice(["record", "clip"]), default=None)
@click.option("--seed", type=int, default=None)
@click.option("--resolution", type=int, default=None)
@click.option("--workers", type=int, default=None)
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
def build(clips_dir, out_dir, timestep, theta, split_fraction, split_mode, seed,
          resolution, workers, config_path):
    """Build a dataset from a directory of clip files."""
    cfg = _resolve_cfg(
        config_path,
        timestep=timestep,
        theta=theta,
        split_fraction=split_fraction,
        split_mode=split_mode,
        seed=seed,
        resolution=resolution,
        workers=workers,
    )
    root = _dataset_root(out_dir)
    registry = registry_default()
    paths = sorted(Path(clips_dir).glob("*.json"))
    if not paths:
        _fail(f"no clip files in {clips_dir}")
    try:
        clips = [clips_mod.load_clip(p, registry) for p in paths]
    except clips_mod.ClipParseError as e:
        _fail(str(e))
    try:
        manifest = ds.build(clips, cfg, root, registry)
    except (ds.BuildError, OSError) as e:
        _fail(str(e))
    click.echo(f"built {len(manifest.records)} records in {root}")


@main.command()
@click.option("--dataset", "dataset_dir", type=click.Path(), default=None)
@click.option("--out", "out_path", type=click.Path(), default=None, help="CSV output path")
def stats(dataset_dir, out_path):
    """Per-channel summary statistics of a built dataset."""
    root = _dataset_root(dataset_dir)
    manifest = ds.load_manifest(root / "manifest.jsonl")
    st = ds.stats(manifest)
    rows = list(st.rows())
    header = f"{'channel':<28}{'mean':>8}{'std':>8}{'vmax':>8}{'vmin':>8}{'vneu':>8}"
    click.echo(header)
    for row in rows:
        click.echo(
            f"{row['name']:<28}{row['mean']:>8.3f}{row['std']:>8.3f}"
            f"{row['vmax']:>8.3f}{row['vmin']:>8.3f}{row['vneu']:>8.3f}"
        )
    if out_path:
        import csv

        with open(out_path, "w", newline="") as f:
            w = csv.DictWriter(f, fieldnames=list(rows[0]))
            w.writeheader()
            w.writerows(rows)


@main.command()
@click.option("--dataset", "dataset_dir", type=click.Path(), default=None)
@click.option("--bins", type=int, default=20, show_default=True)
@click.option("--out", "out_path", type=click.Path(), default=None, help="JSON output path")
def hist(dataset_dir, bins, out_path):
    """Per-channel value histograms."""
    root = _dataset_root(dataset_dir)
    manifest = ds.load_manifest(root / "manifest.jsonl")
    h = ds.histograms(manifest, bins)
    if out_path:
        with open(out_path, "w") as f:
            json.dump(h, f)
        click.echo(f"wrote histograms to {out_path}")
    else:
        for name, d in h.items():
            click.echo(f"{name}: {d['counts']}")


@main.command()
@click.option("--dataset", "dataset_dir", type=click.Path(), default=None)
@click.option("--bins", type=int, default=20, show_default=True)
@click.option("--out", "out_path", required=True, type=click.Path())
def plot(dataset_dir, bins, out_path):
    """Static SVG grid of channel value distributions."""
    root = _dataset_root(dataset_dir)
    manifest = ds.load_manifest(root / "manifest.jsonl")
    _plot_distributions(manifest, bins, out_path)
    click.echo(f"wrote {out_path}")


def _plot_distributions(manifest, bins, out_path):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    from .controls import ControlRegistry

    registry = ControlRegistry.from_json(manifest.registry_snapshot)
    mat = np.array([r.vector for r in manifest.records])
    group_colors = {
        "Brows": "tab:blue", "Lids": "tab:orange", "Gaze": "tab:green",
        "Nose": "tab:red", "Mouth": "tab:purple", "Head": "tab:brown",
        "Neck": "tab:pink",
    }
    fig, axes = plt.subplots(5, 6, figsize=(16, 11))
    for i, ch in enumerate(registry.channels):
        ax = axes.flat[i]
        ax.hist(mat[:, i], bins=bins, range=(ch.range_min, ch.range_max),
                color=group_colors[ch.group])
        ax.axvline(ch.neutral, color="black", ls="--", lw=0.8)
        ax.set_title(ch.abbrev, fontsize=9)
        ax.tick_params(labelsize=6)
    fig.tight_layout()
    fig.savefig(out_path, format="svg")
    plt.close(fig)


@main.command()
@click.option("--dataset", "dataset_dir", type=click.Path(), default=None)
@click.option("--predictors", default="rc,rt,nn", show_default=True,
              help="comma-separated: rc, rt, nn")
@click.option("--predictions", "prediction_files", multiple=True, type=click.Path(exists=True),
              help="JSONL prediction file(s) scored as external predictors")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", "out_path", type=click.Path(), default=None, help="CSV output path")
@click.option("--json-out", "json_path", type=click.Path(), default=None)
def eval(dataset_dir, predictors, prediction_files, seed, out_path, json_path):
    """Score reference predictors (and optional prediction files) on the test split."""
    root = _dataset_root(dataset_dir)
    manifest = ds.load_manifest(root / "manifest.jsonl")
    registry = registry_default()
    test = manifest.split(ds.TEST)
    train = manifest.split(ds.TRAIN)
    if not test:
        _fail("test split is empty")
    truths = np.array([r.vector for r in test])
    wanted = [p.strip() for p in predictors.split(",") if p.strip()]
    reports = []
    test_images = None
    for name in wanted:
        if name == "rc":
            reports.append(score(RandomControlPredictor(registry, seed), truths, name="rc"))
        elif name == "rt":
            if not train:
                _fail("rt predictor needs a non-empty train split")
            vecs = [r.vector for r in train]
            reports.append(score(RandomTrainingPredictor(vecs, seed), truths, name="rt"))
        elif name == "nn":
            if not train:
                _fail("nn predictor needs a non-empty train split")
            if test_images is None:
                test_images = load_split_images(root, test)
            nn = NearestNeighborPredictor(
                [r.id for r in train],
                load_split_images(root, train),
                [r.vector for r in train],
            )
            reports.append(score(nn, truths, images=test_images, name="nn"))
        else:
            _fail(f"unknown predictor {name!r}")
    for path in prediction_files:
        fp = FilePredictor(path)
        reports.append(score_prediction_file(fp, test))
    click.echo(compare(reports))
    if out_path:
        reports_to_csv(reports, out_path)
    if json_path:
        with open(json_path, "w") as f:
            json.dump([r.to_json() for r in reports], f, indent=2)


@main.command()
@click.option("--dataset", "dataset_dir", type=click.Path(), default=None)
@click.option("--skip-images", is_flag=True, default=False,
              help="only re-derive vectors, skip bit-exact image checks")
def verify(dataset_dir, skip_images):
    """Re-run the alignment audit on a built dataset."""
    root = _dataset_root(dataset_dir)
    try:
        result = ds.verify(root, check_images=not skip_images)
    except FileNotFoundError as e:
        _fail(str(e))
    click.echo(
        f"checked {result.checked} records: "
        f"{len(result.vector_violations)} vector violation(s), "
        f"{len(result.image_violations)} image violation(s)"
    )
    if not result.ok:
        for rid, why in (result.vector_violations + result.image_violations)[:20]:
            click.echo(f"  {rid}: {why}", err=True)
        sys.exit(1)


if __name__ == "__main__":
    main()
