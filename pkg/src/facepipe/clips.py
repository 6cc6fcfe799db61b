"""Multi-channel animation clips: JSON IO, fixed-step sampling, synthetic authoring.

Clip file schema (one JSON document per clip):

    {
      "name": str,
      "duration_s": float,
      "tracks": [
        {"channel": "<Table-name string>",
         "keys": [{"t": float, "v": float, "mode": "cubic_bezier"|"linear"|"step",
                   "out_handle": [t, v]?, "in_handle": [t, v]?}, ...]},
        ...
      ],
      "metadata": {str: str}
    }
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .controls import ControlRegistry, neutral_vector
from .curves import MODE_BEZIER, MODE_NAMES, MODE_STRINGS, Keyframe, Track, TrackError, sample_track

log = logging.getLogger(__name__)

DEFAULT_TIMESTEP = 0.02

DURATION_MIN = 1.0
DURATION_MAX = 15.0


class ClipError(ValueError):
    """Structurally invalid clip."""


class ClipParseError(ClipError):
    """Clip file violates the schema; message names the offending path."""


@dataclass
class AnimationClip:
    name: str
    duration: float
    tracks: list[Track]
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.duration <= 0:
            raise ClipError(f"{self.name}: duration must be positive")
        if not DURATION_MIN <= self.duration <= DURATION_MAX:
            log.warning(
                "clip %s duration %.3fs outside the usual 1-15s regime", self.name, self.duration
            )
        seen = set()
        for tr in self.tracks:
            if tr.channel_index in seen:
                raise ClipError(f"{self.name}: duplicate track for channel {tr.channel_index}")
            seen.add(tr.channel_index)
            last = tr.keys[-1].time
            if last > self.duration:
                raise ClipError(
                    f"{self.name}: keyframe at t={last} exceeds duration {self.duration}"
                )


@dataclass
class SampledSequence:
    clip_name: str
    timestep: float
    timestamps: np.ndarray  # (n,)
    vectors: np.ndarray  # (n, 30), clamped

    def __len__(self) -> int:
        return len(self.timestamps)


def sample_count(duration: float, timestep: float) -> int:
    # Tiny epsilon guards against 2.0/0.02 landing just below an integer.
    return int(math.floor(duration / timestep + 1e-9)) + 1


def sample_clip(clip: AnimationClip, timestep: float, registry: ControlRegistry) -> SampledSequence:
    """Sample every channel at t = 0, s, 2s, ... <= duration.

    Channels without a track hold their neutral value; all vectors are
    clamped into registry ranges.
    """
    if timestep <= 0:
        raise ValueError("timestep must be positive")
    n = sample_count(clip.duration, timestep)
    ts = np.array([k * timestep for k in range(n)])
    vectors = np.tile(neutral_vector(registry), (n, 1))
    for tr in clip.tracks:
        vectors[:, tr.channel_index] = sample_track(tr, ts)
    lows = registry._lows
    highs = registry._highs
    clipped = np.clip(vectors, lows, highs)
    n_clamped = int(np.sum(clipped != vectors))
    if n_clamped:
        log.warning("clip %s: clamped %d sampled value(s) into range", clip.name, n_clamped)
    return SampledSequence(clip.name, timestep, ts, clipped)


# --- JSON IO ---------------------------------------------------------------

def clip_to_json(clip: AnimationClip, registry: ControlRegistry) -> dict:
    tracks = []
    for tr in sorted(clip.tracks, key=lambda t: t.channel_index):
        keys = []
        for k in tr.keys:
            d = {"t": k.time, "v": k.value, "mode": MODE_STRINGS[k.mode]}
            if k.out_handle is not None:
                d["out_handle"] = list(k.out_handle)
            if k.in_handle is not None:
                d["in_handle"] = list(k.in_handle)
            keys.append(d)
        tracks.append({"channel": registry[tr.channel_index].name, "keys": keys})
    return {
        "name": clip.name,
        "duration_s": clip.duration,
        "tracks": tracks,
        "metadata": dict(clip.metadata),
    }


def clip_from_json(doc: dict, registry: ControlRegistry) -> AnimationClip:
    def need(obj, key, where):
        if not isinstance(obj, dict) or key not in obj:
            raise ClipParseError(f"missing field at {where}.{key}")
        return obj[key]

    name = need(doc, "name", "$")
    duration = need(doc, "duration_s", "$")
    tracks = []
    for ti, tdoc in enumerate(need(doc, "tracks", "$")):
        where = f"$.tracks[{ti}]"
        cname = need(tdoc, "channel", where)
        try:
            cidx = registry.index_of(cname)
        except KeyError:
            raise ClipParseError(f"unknown channel name {cname!r} at {where}.channel") from None
        keys = []
        for ki, kdoc in enumerate(need(tdoc, "keys", where)):
            kw = f"{where}.keys[{ki}]"
            mode_s = need(kdoc, "mode", kw)
            if mode_s not in MODE_NAMES:
                raise ClipParseError(f"unknown mode {mode_s!r} at {kw}.mode")
            oh = kdoc.get("out_handle")
            ih = kdoc.get("in_handle")
            keys.append(
                Keyframe(
                    time=float(need(kdoc, "t", kw)),
                    value=float(need(kdoc, "v", kw)),
                    mode=MODE_NAMES[mode_s],
                    out_handle=tuple(oh) if oh is not None else None,
                    in_handle=tuple(ih) if ih is not None else None,
                )
            )
        try:
            tracks.append(Track(cidx, keys))
        except TrackError as e:
            raise ClipParseError(f"invalid track at {where}: {e}") from None
    try:
        return AnimationClip(name, float(duration), tracks, dict(doc.get("metadata", {})))
    except ClipError as e:
        raise ClipParseError(str(e)) from None


def save_clip(clip: AnimationClip, path, registry: ControlRegistry) -> None:
    with open(path, "w") as f:
        json.dump(clip_to_json(clip, registry), f, indent=2, sort_keys=True)


def load_clip(path, registry: ControlRegistry) -> AnimationClip:
    with open(path) as f:
        try:
            doc = json.load(f)
        except json.JSONDecodeError as e:
            raise ClipParseError(f"{path}: not valid JSON ({e})") from None
    return clip_from_json(doc, registry)


# --- synthetic authoring ---------------------------------------------------

def make_synthetic_clips(n: int, seed: int, registry: ControlRegistry) -> list[AnimationClip]:
    """Deterministic batch of range-sweeping clips.

    Durations lie in [1, 15] s (skewed short so desk-scale builds stay fast),
    every channel gets a track in most clips, keyframe values sweep each
    channel's full range across the batch, and the first clip carries an
    explicitly asymmetric brow setting.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    lows = registry._lows
    highs = registry._highs
    clips = []
    for ci in range(n):
        duration = round(1.0 + 14.0 * float(rng.beta(1.2, 5.0)), 2)
        tracks = []
        for ch in range(30):
            if rng.random() < 0.15 and ci > 0:
                continue  # occasionally leave a channel at neutral
            nk = int(rng.integers(2, 9))
            times = np.sort(rng.uniform(0.0, duration, nk - 2)) if nk > 2 else np.empty(0)
            times = np.concatenate(([0.0], times, [duration]))
            # enforce strict increase
            times = np.unique(np.round(times, 4))
            if len(times) < 2:
                times = np.array([0.0, duration])
            lo, hi = lows[ch], highs[ch]
            if ci % 3 == 0:
                # range-sweeping clip: push values toward the extremes
                vals = lo + (hi - lo) * rng.beta(0.35, 0.35, len(times))
            else:
                vals = rng.uniform(lo, hi, len(times))
            keys = []
            for i, (t, v) in enumerate(zip(times, vals)):
                mode = int(rng.choice([MODE_BEZIER, 1, 2], p=[0.5, 0.35, 0.15]))
                oh = ih = None
                if i + 1 < len(times):
                    span = times[i + 1] - t
                    oh = (t + span * rng.uniform(0.1, 0.5), rng.uniform(lo, hi))
                if i > 0:
                    span = t - times[i - 1]
                    ih = (t - span * rng.uniform(0.1, 0.5), rng.uniform(lo, hi))
                keys.append(Keyframe(float(t), float(v), mode, oh, ih))
            # a segment is bezier only if both handles exist; force validity
            keys = _fix_bezier_handles(keys)
            tracks.append(Track(ch, keys))
        clip = AnimationClip(f"synthetic_{seed}_{ci:04d}", duration, tracks, {"author": "synthetic"})
        clips.append(clip)
    if n >= 1:
        _force_asymmetry(clips[0], registry)
    return clips


def _fix_bezier_handles(keys):
    fixed = []
    for i, k in enumerate(keys):
        mode = k.mode
        if mode == MODE_BEZIER and (
            i + 1 >= len(keys) or k.out_handle is None or keys[i + 1].in_handle is None
        ):
            mode = 1
        fixed.append(Keyframe(k.time, k.value, mode, k.out_handle, k.in_handle))
    return fixed


def _force_asymmetry(clip: AnimationClip, registry: ControlRegistry) -> None:
    bil = registry.index_of("Brow Inner Left")
    bir = registry.index_of("Brow Inner Right")
    d = clip.duration
    left = Track(bil, [Keyframe(0.0, 0.95), Keyframe(d, 0.9)])
    right = Track(bir, [Keyframe(0.0, 0.05), Keyframe(d, 0.1)])
    clip.tracks = [t for t in clip.tracks if t.channel_index not in (bil, bir)] + [left, right]
