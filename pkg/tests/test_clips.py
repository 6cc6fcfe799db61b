import json
import logging

import numpy as np
import pytest

from facepipe.clips import (
    AnimationClip,
    ClipError,
    ClipParseError,
    clip_from_json,
    clip_to_json,
    load_clip,
    make_synthetic_clips,
    sample_clip,
    sample_count,
    save_clip,
)
from facepipe.controls import neutral_vector
from facepipe.curves import MODE_LINEAR, Keyframe, Track


def simple_clip(registry, name="c0"):
    jp = registry.index_of("Jaw Pitch")
    hy = registry.index_of("Head Yaw")
    return AnimationClip(
        name,
        2.0,
        [
            Track(jp, [Keyframe(0.0, 0.0, MODE_LINEAR), Keyframe(2.0, 1.0)]),
            Track(hy, [Keyframe(0.0, -0.5, MODE_LINEAR), Keyframe(2.0, 0.5)]),
        ],
        {"author": "test"},
    )


class TestSampleCount:
    def test_two_seconds_at_20ms_gives_101(self):
        assert sample_count(2.0, 0.02) == 101

    def test_examples(self):
        assert sample_count(1.0, 0.02) == 51
        assert sample_count(15.0, 0.05) == 301
        assert sample_count(0.1, 0.02) == 6
        # 0.06 / 0.02 is 2.9999... in floats; the count must still be 4
        assert sample_count(0.06, 0.02) == 4


class TestSampleClip:
    def test_shape_and_timestamps(self, registry):
        seq = sample_clip(simple_clip(registry), 0.02, registry)
        assert seq.vectors.shape == (101, 30)
        assert seq.timestamps[0] == 0.0
        assert seq.timestamps[-1] == pytest.approx(2.0, abs=1e-9)

    def test_tracked_channels_follow_curves(self, registry):
        seq = sample_clip(simple_clip(registry), 0.02, registry)
        jp = registry.index_of("Jaw Pitch")
        assert seq.vectors[0, jp] == 0.0
        assert seq.vectors[50, jp] == pytest.approx(0.5, abs=1e-9)
        assert seq.vectors[100, jp] == pytest.approx(1.0, abs=1e-9)

    def test_untracked_channels_hold_neutral(self, registry):
        seq = sample_clip(simple_clip(registry), 0.02, registry)
        neu = neutral_vector(registry)
        nw = registry.index_of("Nose Wrinkle")
        eul = registry.index_of("Eyelid Upper Left")
        assert np.all(seq.vectors[:, nw] == neu[nw])
        assert np.all(seq.vectors[:, eul] == neu[eul])

    def test_out_of_range_values_clamped_with_warning(self, registry, caplog):
        jp = registry.index_of("Jaw Pitch")
        clip = AnimationClip(
            "hot", 1.0,
            [Track(jp, [Keyframe(0.0, 0.0, MODE_LINEAR), Keyframe(1.0, 2.0)])],
        )
        with caplog.at_level(logging.WARNING, logger="facepipe.clips"):
            seq = sample_clip(clip, 0.02, registry)
        assert seq.vectors[:, jp].max() == 1.0
        assert "clamped" in caplog.text

    def test_bad_timestep(self, registry):
        with pytest.raises(ValueError):
            sample_clip(simple_clip(registry), 0.0, registry)


class TestClipStructure:
    def test_duplicate_channel_rejected(self, registry):
        jp = registry.index_of("Jaw Pitch")
        tr = Track(jp, [Keyframe(0.0, 0.5)])
        with pytest.raises(ClipError):
            AnimationClip("dup", 2.0, [tr, Track(jp, [Keyframe(0.0, 0.2)])])

    def test_key_past_duration_rejected(self, registry):
        jp = registry.index_of("Jaw Pitch")
        with pytest.raises(ClipError):
            AnimationClip("late", 1.0, [Track(jp, [Keyframe(2.0, 0.5)])])

    def test_duration_outside_regime_warns(self, caplog):
        with caplog.at_level(logging.WARNING, logger="facepipe.clips"):
            AnimationClip("long", 20.0, [])
        assert "regime" in caplog.text


class TestJsonIO:
    def test_roundtrip(self, registry, tmp_path):
        clip = simple_clip(registry)
        path = tmp_path / "c0.json"
        save_clip(clip, path, registry)
        again = load_clip(path, registry)
        assert clip_to_json(again, registry) == clip_to_json(clip, registry)

    def test_synthetic_roundtrip(self, registry, tmp_path):
        clip = make_synthetic_clips(3, 7, registry)[2]
        path = tmp_path / "s.json"
        save_clip(clip, path, registry)
        again = load_clip(path, registry)
        a = sample_clip(clip, 0.05, registry)
        b = sample_clip(again, 0.05, registry)
        assert np.array_equal(a.vectors, b.vectors)

    def test_missing_field_names_path(self, registry):
        doc = {"name": "x", "duration_s": 2.0,
               "tracks": [{"channel": "Jaw Pitch", "keys": [{"t": 0.0, "mode": "linear"}]}]}
        with pytest.raises(ClipParseError, match=r"\$\.tracks\[0\]\.keys\[0\]\.v"):
            clip_from_json(doc, registry)

    def test_unknown_channel(self, registry):
        doc = {"name": "x", "duration_s": 2.0,
               "tracks": [{"channel": "Elbow Pitch", "keys": []}]}
        with pytest.raises(ClipParseError, match="Elbow Pitch"):
            clip_from_json(doc, registry)

    def test_unknown_mode(self, registry):
        doc = {"name": "x", "duration_s": 2.0,
               "tracks": [{"channel": "Jaw Pitch",
                           "keys": [{"t": 0.0, "v": 0.5, "mode": "quintic"}]}]}
        with pytest.raises(ClipParseError, match="quintic"):
            clip_from_json(doc, registry)

    def test_invalid_json_file(self, registry, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{not json")
        with pytest.raises(ClipParseError):
            load_clip(path, registry)

    def test_file_is_sorted_deterministic(self, registry, tmp_path):
        clip = simple_clip(registry)
        p1, p2 = tmp_path / "a.json", tmp_path / "b.json"
        save_clip(clip, p1, registry)
        save_clip(clip, p2, registry)
        assert p1.read_bytes() == p2.read_bytes()
        json.loads(p1.read_text())  # well-formed


class TestSynthetic:
    def test_deterministic(self, registry):
        a = make_synthetic_clips(5, 42, registry)
        b = make_synthetic_clips(5, 42, registry)
        for ca, cb in zip(a, b):
            assert clip_to_json(ca, registry) == clip_to_json(cb, registry)

    def test_durations_in_range(self, registry):
        for clip in make_synthetic_clips(20, 0, registry):
            assert 1.0 <= clip.duration <= 15.0

    def test_range_coverage(self, registry):
        """Sampled values cover at least 90% of every channel's span."""
        clips = make_synthetic_clips(30, 0, registry)
        mats = [sample_clip(c, 0.05, registry).vectors for c in clips]
        mat = np.concatenate(mats)
        span = registry.highs - registry.lows
        covered = (mat.max(axis=0) - mat.min(axis=0)) / span
        assert covered.min() >= 0.9

    def test_first_clip_asymmetric_brows(self, registry):
        clip = make_synthetic_clips(2, 3, registry)[0]
        seq = sample_clip(clip, 0.05, registry)
        bil = registry.index_of("Brow Inner Left")
        bir = registry.index_of("Brow Inner Right")
        assert np.all(seq.vectors[:, bil] > 0.8)
        assert np.all(seq.vectors[:, bir] < 0.2)

    def test_bad_n(self, registry):
        with pytest.raises(ValueError):
            make_synthetic_clips(0, 0, registry)
