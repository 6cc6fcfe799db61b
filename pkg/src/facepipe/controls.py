"""The 30-channel facial control vocabulary.

Channel names, value ranges, neutral values and expression-unit groups.
The registry order is fixed; every control vector in the pipeline is a
30-float array indexed in this order.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

GROUPS = ("Brows", "Lids", "Gaze", "Nose", "Mouth", "Head", "Neck")

N_CHANNELS = 30


class DimensionError(ValueError):
    """A control vector does not have exactly 30 entries."""


@dataclass(frozen=True)
class ControlChannel:
    name: str
    abbrev: str
    range_min: float
    range_max: float
    neutral: float
    group: str

    def __post_init__(self):
        if not self.range_min < self.range_max:
            raise ValueError(f"{self.name}: range_min must be < range_max")
        if not self.range_min <= self.neutral <= self.range_max:
            raise ValueError(f"{self.name}: neutral outside range")
        if self.group not in GROUPS:
            raise ValueError(f"{self.name}: unknown group {self.group!r}")


# (name, abbrev, min, max, neutral, group), in canonical order.
_CHANNEL_TABLE = (
    ("Jaw Pitch", "JP", 0.0, 1.0, 1.0, "Mouth"),
    ("Jaw Yaw", "JY", 0.0, 1.0, 0.5, "Mouth"),
    ("Lip Bottom Curl", "LBC", 0.0, 1.0, 0.46, "Mouth"),
    ("Lip Bottom Depress Left", "LBDL", 0.0, 1.0, 0.56, "Mouth"),
    ("Lip Bottom Depress Middle", "LBDM", 0.0, 1.0, 0.43, "Mouth"),
    ("Lip Bottom Depress Right", "LBDR", 0.0, 1.0, 0.54, "Mouth"),
    ("Lip Corner Raise Left", "LCRL", 0.0, 1.0, 0.47, "Mouth"),
    ("Lip Corner Raise Right", "LCRR", 0.0, 1.0, 0.62, "Mouth"),
    ("Lip Corner Stretch Left", "LCSL", 0.0, 1.0, 0.64, "Mouth"),
    ("Lip Corner Stretch Right", "LCSR", 0.0, 1.0, 0.31, "Mouth"),
    ("Lip Top Curl", "LTC", 0.0, 1.0, 0.41, "Mouth"),
    ("Lip Top Raise Left", "LTRL", 0.0, 1.0, 0.48, "Mouth"),
    ("Lip Top Raise Middle", "LTRM", 0.0, 1.0, 0.30, "Mouth"),
    ("Lip Top Raise Right", "LTRR", 0.0, 1.0, 0.45, "Mouth"),
    ("Nose Wrinkle", "NW", 0.0, 1.0, 0.0, "Nose"),
    ("Brow Inner Left", "BIL", 0.0, 1.0, 0.5, "Brows"),
    ("Brow Inner Right", "BIR", 0.0, 1.0, 0.5, "Brows"),
    ("Brow Outer Left", "BOL", 0.0, 1.0, 0.5, "Brows"),
    ("Brow Outer Right", "BOR", 0.0, 1.0, 0.5, "Brows"),
    ("Eyelid Lower Left", "ELL", -1.0, 2.0, 1.0, "Lids"),
    ("Eyelid Lower Right", "ELR", -1.0, 2.0, 1.0, "Lids"),
    ("Eyelid Upper Left", "EUL", -1.0, 2.0, 1.0, "Lids"),
    ("Eyelid Upper Right", "EUR", -1.0, 2.0, 1.0, "Lids"),
    ("Gaze Target Phi", "GTP", -2.3, 2.3, 0.0, "Gaze"),
    ("Gaze Target Theta", "GTT", -1.1, 1.1, 0.0, "Gaze"),
    ("Head Pitch", "HP", -0.5, 0.3, 0.0, "Head"),
    ("Head Roll", "HR", -0.3, 0.3, 0.0, "Head"),
    ("Head Yaw", "HY", -0.5, 0.5, 0.0, "Head"),
    ("Neck Pitch", "NP", -0.3, 0.5, 0.0, "Neck"),
    ("Neck Roll", "NR", -0.3, 0.3, 0.0, "Neck"),
)


class ControlRegistry:
    """Immutable ordered collection of the 30 control channels."""

    def __init__(self, channels):
        channels = tuple(channels)
        if len(channels) != N_CHANNELS:
            raise ValueError(f"registry needs exactly {N_CHANNELS} channels, got {len(channels)}")
        names = [c.name for c in channels]
        if len(set(names)) != N_CHANNELS:
            raise ValueError("channel names must be unique")
        self._channels = channels
        self._index = {c.name: i for i, c in enumerate(channels)}
        self._lows = np.array([c.range_min for c in channels])
        self._highs = np.array([c.range_max for c in channels])
        self._neutrals = np.array([c.neutral for c in channels])

    @property
    def channels(self) -> tuple[ControlChannel, ...]:
        return self._channels

    @property
    def lows(self) -> np.ndarray:
        return self._lows.copy()

    @property
    def highs(self) -> np.ndarray:
        return self._highs.copy()

    def __len__(self) -> int:
        return N_CHANNELS

    def __getitem__(self, key) -> ControlChannel:
        if isinstance(key, str):
            return self._channels[self._index[key]]
        return self._channels[key]

    def index_of(self, name: str) -> int:
        return self._index[name]

    def names(self) -> list[str]:
        return [c.name for c in self._channels]

    def abbrevs(self) -> list[str]:
        return [c.abbrev for c in self._channels]

    def to_json(self) -> list[dict]:
        return [
            {
                "name": c.name,
                "abbrev": c.abbrev,
                "min": c.range_min,
                "max": c.range_max,
                "neutral": c.neutral,
                "group": c.group,
            }
            for c in self._channels
        ]

    @classmethod
    def from_json(cls, doc) -> "ControlRegistry":
        return cls(
            ControlChannel(d["name"], d["abbrev"], d["min"], d["max"], d["neutral"], d["group"])
            for d in doc
        )

    def save(self, path) -> None:
        with open(path, "w") as f:
            json.dump(self.to_json(), f, indent=2)

    @classmethod
    def load(cls, path) -> "ControlRegistry":
        with open(path) as f:
            return cls.from_json(json.load(f))


def registry_default() -> ControlRegistry:
    return ControlRegistry(ControlChannel(*row) for row in _CHANNEL_TABLE)


def as_vector(values) -> np.ndarray:
    """Coerce to a float64 array of length 30."""
    v = np.asarray(values, dtype=np.float64)
    if v.shape != (N_CHANNELS,):
        raise DimensionError(f"control vector must have shape ({N_CHANNELS},), got {v.shape}")
    return v


def clamp(values, registry: ControlRegistry) -> np.ndarray:
    """Project a vector onto the legal per-channel ranges. Idempotent."""
    v = as_vector(values)
    return np.clip(v, registry._lows, registry._highs)


def is_legal(values, registry: ControlRegistry) -> bool:
    v = as_vector(values)
    return bool(np.all(v >= registry._lows) and np.all(v <= registry._highs))


def neutral_vector(registry: ControlRegistry) -> np.ndarray:
    return registry._neutrals.copy()
