"""Micro-benchmark of the numba kernels against the pure-numpy fallbacks.

Usage: python3 benchmarks/compare_backends.py [--repeats N]

Covers the four hot paths: track evaluation, face rasterization, sliding
SSIM and nearest-neighbor pixel distances.  The first numba call of each
kernel is excluded (jit warmup).
"""

import argparse
import time

import numpy as np

from facepipe import backend
from facepipe.clips import make_synthetic_clips
from facepipe.controls import registry_default
from facepipe.curves import sample_track
from facepipe.evaluation import NearestNeighborPredictor
from facepipe.render import FaceGeometry, render
from facepipe.ssim import ssim


def timeit(fn, repeats):
    fn()  # warmup (jit compile / cache load)
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeats", type=int, default=5)
    args = ap.parse_args()

    registry = registry_default()
    geo = FaceGeometry.default(registry)
    rng = np.random.default_rng(0)

    clip = make_synthetic_clips(1, 0, registry)[0]
    track = max(clip.tracks, key=lambda t: len(t.keys))
    ts = np.linspace(0.0, clip.duration, 20_000)

    vec = rng.uniform(registry.lows, registry.highs)
    img_a = rng.integers(0, 256, (512, 512), dtype=np.uint8)
    img_b = rng.integers(0, 256, (512, 512), dtype=np.uint8)

    train_imgs = [rng.integers(0, 256, (128, 128), dtype=np.uint8) for _ in range(200)]
    train_vecs = rng.uniform(-1, 1, (200, 30))
    nn = NearestNeighborPredictor([f"r{i:03d}" for i in range(200)], train_imgs, train_vecs)
    query = rng.integers(0, 256, (128, 128), dtype=np.uint8)

    cases = {
        "track eval (20k samples)": lambda: sample_track(track, ts),
        "render 512x512": lambda: render(vec, geo, 512),
        "ssim sliding 512x512": lambda: ssim(img_a, img_b),
        "nn distances (200 x 128^2)": lambda: nn.predict(query),
    }

    print(f"{'kernel':<28}{'numba':>12}{'numpy':>12}{'speedup':>10}")
    for name, fn in cases.items():
        backend.set_backend("numba")
        t_nb = timeit(fn, args.repeats)
        backend.set_backend("numpy")
        t_np = timeit(fn, args.repeats)
        backend.set_backend("auto")
        print(f"{name:<28}{t_nb * 1e3:>10.2f}ms{t_np * 1e3:>10.2f}ms{t_np / t_nb:>9.1f}x")


if __name__ == "__main__":
    main()
