"""Structural similarity and near-duplicate frame removal.

Global mode computes the SSIM formula over whole-image population moments
(analytically checkable); the default sliding mode averages the same
formula over 8x8 patches, stride 8.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .backend import using_numba


class SsimDimensionError(ValueError):
    """Images passed to ssim() differ in shape."""


@dataclass(frozen=True)
class SsimParams:
    K1: float = 0.01
    K2: float = 0.03
    L: float = 255.0
    window: tuple | None = (8, 8)  # (size, stride); None = global

    @property
    def C1(self) -> float:
        return (self.K1 * self.L) ** 2

    @property
    def C2(self) -> float:
        return (self.K2 * self.L) ** 2


GLOBAL = SsimParams(window=None)
DEFAULT = SsimParams()


def _pixels(x) -> np.ndarray:
    arr = getattr(x, "pixels", x)
    return np.asarray(arr)


def _ssim_formula(mx, my, vx, vy, cov, c1, c2):
    return ((2.0 * mx * my + c1) * (2.0 * cov + c2)) / (
        (mx * mx + my * my + c1) * (vx + vy + c2)
    )


def _ssim_global(a, b, c1, c2):
    mx = a.mean()
    my = b.mean()
    vx = a.var()
    vy = b.var()
    cov = ((a - mx) * (b - my)).mean()
    return float(_ssim_formula(mx, my, vx, vy, cov, c1, c2))


def _ssim_windows_numpy(a, b, size, stride, c1, c2):
    wa = np.lib.stride_tricks.sliding_window_view(a, (size, size))[::stride, ::stride]
    wb = np.lib.stride_tricks.sliding_window_view(b, (size, size))[::stride, ::stride]
    mx = wa.mean(axis=(2, 3))
    my = wb.mean(axis=(2, 3))
    vx = wa.var(axis=(2, 3))
    vy = wb.var(axis=(2, 3))
    cov = ((wa - mx[..., None, None]) * (wb - my[..., None, None])).mean(axis=(2, 3))
    return float(_ssim_formula(mx, my, vx, vy, cov, c1, c2).mean())


def _ssim_windows_core(a, b, size, stride, c1, c2):
    h, w = a.shape
    total = 0.0
    count = 0
    npix = size * size
    for y0 in range(0, h - size + 1, stride):
        for x0 in range(0, w - size + 1, stride):
            sx = 0.0
            sy = 0.0
            sxx = 0.0
            syy = 0.0
            sxy = 0.0
            for dy in range(size):
                for dx in range(size):
                    pa = a[y0 + dy, x0 + dx]
                    pb = b[y0 + dy, x0 + dx]
                    sx += pa
                    sy += pb
                    sxx += pa * pa
                    syy += pb * pb
                    sxy += pa * pb
            mx = sx / npix
            my = sy / npix
            vx = sxx / npix - mx * mx
            vy = syy / npix - my * my
            cov = sxy / npix - mx * my
            total += ((2.0 * mx * my + c1) * (2.0 * cov + c2)) / (
                (mx * mx + my * my + c1) * (vx + vy + c2)
            )
            count += 1
    return total / count


_ssim_windows_numba = None


def _get_numba_ssim():
    global _ssim_windows_numba
    if _ssim_windows_numba is None:
        from numba import njit

        _ssim_windows_numba = njit(cache=True)(_ssim_windows_core)
    return _ssim_windows_numba


def ssim(x, y, params: SsimParams = DEFAULT) -> float:
    """SSIM between two equal-size grayscale images, in (-1, 1]."""
    a = _pixels(x).astype(np.float64)
    b = _pixels(y).astype(np.float64)
    if a.shape != b.shape:
        raise SsimDimensionError(f"image shapes differ: {a.shape} vs {b.shape}")
    c1, c2 = params.C1, params.C2
    if params.window is None:
        return _ssim_global(a, b, c1, c2)
    size, stride = params.window
    if size > min(a.shape):
        raise SsimDimensionError(f"window size {size} exceeds image size {a.shape}")
    if using_numba():
        return float(_get_numba_ssim()(a, b, size, stride, c1, c2))
    return _ssim_windows_numpy(a, b, size, stride, c1, c2)


@dataclass
class DedupReport:
    threshold: float
    kept_indices: list = field(default_factory=list)
    removed_indices: list = field(default_factory=list)
    pairwise_scores: list = field(default_factory=list)  # (kept_anchor, candidate, ssim)

    def to_json(self) -> dict:
        return {
            "threshold": self.threshold,
            "kept_indices": self.kept_indices,
            "removed_indices": self.removed_indices,
            "pairwise_scores": [[i, j, s] for i, j, s in self.pairwise_scores],
        }

    def save(self, path) -> None:
        with open(path, "w") as f:
            json.dump(self.to_json(), f)


def dedup(frames, threshold: float, params: SsimParams = DEFAULT) -> DedupReport:
    """Forward pass keeping the first frame; a frame is dropped iff its SSIM
    to the most recently *kept* frame strictly exceeds the threshold.

    Comparing against the kept anchor (not the immediate predecessor) stops
    slow drifts from collapsing to a single frame.
    """
    if not 0.0 < threshold <= 1.0:
        raise ValueError(f"threshold must be in (0, 1], got {threshold}")
    report = DedupReport(threshold=threshold)
    if len(frames) == 0:
        return report
    report.kept_indices.append(0)
    anchor = 0
    for i in range(1, len(frames)):
        score = ssim(frames[anchor], frames[i], params)
        report.pairwise_scores.append((anchor, i, score))
        if score > threshold:
            report.removed_indices.append(i)
        else:
            report.kept_indices.append(i)
            anchor = i
    return report
