"""Deterministic schematic rasterizer: control vector -> 512x512 grayscale face.

The renderer stands in for the proprietary robot simulator.  Every control
channel drives exactly one geometric parameter through an affine map
anchored at the channel's neutral value, so the neutral vector renders a
perfectly left-right symmetric face.  No anti-aliasing: goldens are
bit-exact across platforms and backends.

Feature layout lives in code constants; the per-channel affine gains (and
the neutral reference they are anchored to) form the versioned geometry
config that is serialized next to every dataset.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from PIL import Image

from .backend import using_numba
from .controls import ControlRegistry, as_vector, is_legal

DEFAULT_RESOLUTION = 512

# --- layout constants (face coordinates: u right, v down, roughly [-1, 1]) --

CANVAS_SCALE = 0.48  # face units -> fraction of canvas width

FACE_RX = 0.72
FACE_RY = 0.92
FACE_FILL = 235
FACE_EDGE_W = 0.015
FACE_EDGE_SHADE = 60

BROW_U_IN = 0.12
BROW_U_OUT = 0.50
BROW_SPAN = BROW_U_OUT - BROW_U_IN
BROW_IN_Y = -0.40
BROW_OUT_Y = -0.44
BROW_BOW = 0.06
BROW_HW = 0.022
BROW_SHADE = 40

EYE_CX = 0.27
EYE_CY = -0.16
EYE_A = 0.14
EYE_H0 = 0.055
EYE_FILL = 252
EYE_EDGE_W = 0.10
EYE_EDGE_SHADE = 50
EYE_MIN_H = 0.004
PUPIL_R = 0.05
PUPIL_SHADE = 15

NOSE_HW = 0.018
NOSE_V0 = -0.05
NOSE_V1 = 0.16
NOSE_SHADE = 90
NOSTRIL_U = 0.05
NOSTRIL_V = 0.17
NOSTRIL_R = 0.02
NOSTRIL_SHADE = 70

HATCH_Y0 = -0.02
HATCH_DY = 0.03
HATCH_HW = 0.006
HATCH_UEXT = 0.09
HATCH_SHADE = 80
HATCH_MAX = 6

MOUTH_VM = 0.42
MOUTH_W0 = 0.17
LIP_HW = 0.014
LIP_SHADE = 30
MOUTH_FILL = 130

BG_SHADE = 255

# per-channel affine gains, registry order (all nonzero: maps stay injective)
_DEFAULT_GAINS = (
    0.16,  # Jaw Pitch -> mouth opening (inverted: neutral 1.0 is closed)
    0.10,  # Jaw Yaw -> mouth horizontal shift
    0.05,  # Lip Bottom Curl
    0.07,  # Lip Bottom Depress Left
    0.07,  # Lip Bottom Depress Middle
    0.07,  # Lip Bottom Depress Right
    0.10,  # Lip Corner Raise Left
    0.10,  # Lip Corner Raise Right
    0.07,  # Lip Corner Stretch Left
    0.07,  # Lip Corner Stretch Right
    0.05,  # Lip Top Curl
    0.07,  # Lip Top Raise Left
    0.07,  # Lip Top Raise Middle
    0.07,  # Lip Top Raise Right
    6.0,   # Nose Wrinkle -> hatch line count
    0.16,  # Brow Inner Left
    0.16,  # Brow Inner Right
    0.16,  # Brow Outer Left
    0.16,  # Brow Outer Right
    0.032,  # Eyelid Lower Left
    0.032,  # Eyelid Lower Right
    0.032,  # Eyelid Upper Left
    0.032,  # Eyelid Upper Right
    0.028,  # Gaze Target Phi -> pupil dx (both eyes)
    0.045,  # Gaze Target Theta -> pupil dy (both eyes)
    1.0,   # Head Pitch -> vertical scale + shift
    0.9,   # Head Roll -> rotation
    0.45,  # Head Yaw -> horizontal shear
    0.35,  # Neck Pitch -> vertical translation
    0.8,   # Neck Roll -> rotation about a lower pivot
)

GEOMETRY_VERSION = "schematic-1"


class RenderContractError(ValueError):
    """render() was handed an unvalidated control vector."""


@dataclass(frozen=True)
class FaceGeometry:
    """Versioned control-to-parameter affine maps (gain per channel,
    anchored at the neutral reference)."""

    version: str
    neutral_ref: tuple
    gains: tuple

    @classmethod
    def default(cls, registry: ControlRegistry) -> "FaceGeometry":
        return cls(
            version=GEOMETRY_VERSION,
            neutral_ref=tuple(float(c.neutral) for c in registry.channels),
            gains=_DEFAULT_GAINS,
        )

    def to_json(self) -> dict:
        return {
            "version": self.version,
            "neutral_ref": list(self.neutral_ref),
            "gains": list(self.gains),
        }

    @classmethod
    def from_json(cls, doc: dict) -> "FaceGeometry":
        return cls(doc["version"], tuple(doc["neutral_ref"]), tuple(doc["gains"]))

    def save(self, path) -> None:
        with open(path, "w") as f:
            json.dump(self.to_json(), f, indent=2)

    @classmethod
    def load(cls, path) -> "FaceGeometry":
        with open(path) as f:
            return cls.from_json(json.load(f))


@dataclass
class Frame:
    pixels: np.ndarray  # (h, w) uint8
    source_timestamp: float = 0.0

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]


# --- parameter packing ------------------------------------------------------

# indices into the packed per-frame parameter vector
_P_A00, _P_A01, _P_A10, _P_A11, _P_OX, _P_OY = range(6)
_P_BIY_L, _P_BOY_L, _P_BIY_R, _P_BOY_R = range(6, 10)
_P_HU_L, _P_HL_L, _P_HU_R, _P_HL_R = range(10, 14)
_P_PDX, _P_PDY = 14, 15
_P_HATCH_N = 16
_P_MDU, _P_WL, _P_WR = 17, 18, 19
_P_UY0, _P_UY1_L, _P_UY2_L, _P_UY3_L, _P_UY1_R, _P_UY2_R, _P_UY3_R = range(20, 27)
_P_LY0, _P_LY1_L, _P_LY2_L, _P_LY1_R, _P_LY2_R = range(27, 32)
_N_PARAMS = 32


def _compose(a, b):
    # affine (m00, m01, m10, m11, tx, ty); returns a after b (a applied last)
    m00 = a[0] * b[0] + a[1] * b[2]
    m01 = a[0] * b[1] + a[1] * b[3]
    m10 = a[2] * b[0] + a[3] * b[2]
    m11 = a[2] * b[1] + a[3] * b[3]
    tx = a[0] * b[4] + a[1] * b[5] + a[4]
    ty = a[2] * b[4] + a[3] * b[5] + a[5]
    return (m00, m01, m10, m11, tx, ty)


def _head_transform(d_hp, d_hr, d_hy, d_np, d_nr):
    m = (1.0, 0.0, 0.0, 1.0, 0.0, 0.0)
    m = _compose((1.0, 0.0, 0.0, 1.0 + 0.5 * d_hp, 0.0, 0.18 * d_hp), m)
    c, s = math.cos(d_hr), math.sin(d_hr)
    m = _compose((c, -s, s, c, 0.0, 0.0), m)
    m = _compose((1.0, d_hy, 0.0, 1.0, 0.0, 0.0), m)
    m = _compose((1.0, 0.0, 0.0, 1.0, 0.0, d_np), m)
    c2, s2 = math.cos(d_nr), math.sin(d_nr)
    pivot = 0.75
    m = _compose((c2, -s2, s2, c2, pivot * s2, pivot * (1.0 - c2)), m)
    return m


def face_params(values, geo: FaceGeometry) -> np.ndarray:
    """Derive the flat per-frame shape parameter vector from a control vector."""
    v = as_vector(values)
    d = np.asarray(geo.gains) * (v - np.asarray(geo.neutral_ref))
    p = np.zeros(_N_PARAMS)

    m = _head_transform(d[25], d[26], d[27], d[28], d[29])
    det = m[0] * m[3] - m[1] * m[2]
    p[_P_A00] = m[3] / det
    p[_P_A01] = -m[1] / det
    p[_P_A10] = -m[2] / det
    p[_P_A11] = m[0] / det
    p[_P_OX] = m[4]
    p[_P_OY] = m[5]

    p[_P_BIY_L] = BROW_IN_Y - d[15]
    p[_P_BOY_L] = BROW_OUT_Y - d[17]
    p[_P_BIY_R] = BROW_IN_Y - d[16]
    p[_P_BOY_R] = BROW_OUT_Y - d[18]

    p[_P_HU_L] = EYE_H0 + d[21]
    p[_P_HL_L] = EYE_H0 + d[19]
    p[_P_HU_R] = EYE_H0 + d[22]
    p[_P_HL_R] = EYE_H0 + d[20]

    p[_P_PDX] = d[23]
    p[_P_PDY] = d[24]

    p[_P_HATCH_N] = min(HATCH_MAX, int(math.floor(d[14] + 1e-9)))

    opening = -d[0]  # neutral jaw pitch is 1.0 (closed); smaller values open
    p[_P_MDU] = d[1]
    p[_P_WL] = MOUTH_W0 + d[8]
    p[_P_WR] = MOUTH_W0 + d[9]

    p[_P_UY0] = MOUTH_VM - 0.035 - d[12]
    p[_P_UY1_L] = MOUTH_VM - 0.030 - d[11] - d[10]
    p[_P_UY2_L] = MOUTH_VM - 0.020 - 1.6 * d[10]
    p[_P_UY3_L] = MOUTH_VM - d[6]
    p[_P_UY1_R] = MOUTH_VM - 0.030 - d[13] - d[10]
    p[_P_UY2_R] = MOUTH_VM - 0.020 - 1.6 * d[10]
    p[_P_UY3_R] = MOUTH_VM - d[7]

    p[_P_LY0] = MOUTH_VM + opening + 0.035 + d[4]
    p[_P_LY1_L] = MOUTH_VM + opening + 0.030 + d[3] + d[2]
    p[_P_LY2_L] = MOUTH_VM + opening + 0.020 + 1.6 * d[2]
    p[_P_LY1_R] = MOUTH_VM + opening + 0.030 + d[5] + d[2]
    p[_P_LY2_R] = MOUTH_VM + opening + 0.020 + 1.6 * d[2]
    return p


# --- rasterization: scalar core (numba) ------------------------------------

def _raster_core(p, size, img):
    scale = CANVAS_SCALE * size
    half = size / 2.0
    a00 = p[_P_A00]
    a01 = p[_P_A01]
    a10 = p[_P_A10]
    a11 = p[_P_A11]
    ox = p[_P_OX]
    oy = p[_P_OY]
    n_hatch = int(p[_P_HATCH_N])
    face_out = (1.0 + FACE_EDGE_W) * (1.0 + FACE_EDGE_W)
    for yi in range(size):
        yb = (yi + 0.5 - half) / scale
        for xi in range(size):
            xb = (xi + 0.5 - half) / scale
            u = a00 * (xb - ox) + a01 * (yb - oy)
            v = a10 * (xb - ox) + a11 * (yb - oy)

            qx = u / FACE_RX
            qy = v / FACE_RY
            q = qx * qx + qy * qy
            if q > face_out:
                img[yi, xi] = BG_SHADE
                continue
            g = BG_SHADE
            if q <= 1.0:
                g = FACE_FILL
            sq = math.sqrt(q)
            if abs(sq - 1.0) <= FACE_EDGE_W:
                g = FACE_EDGE_SHADE

            if v < -0.25:
                # brows
                if -BROW_U_OUT <= u <= -BROW_U_IN:
                    w = (-BROW_U_IN - u) / BROW_SPAN
                    yb_c = (1.0 - w) * p[_P_BIY_L] + w * p[_P_BOY_L] - BROW_BOW * 4.0 * w * (1.0 - w)
                    if abs(v - yb_c) <= BROW_HW:
                        g = BROW_SHADE
                elif BROW_U_IN <= u <= BROW_U_OUT:
                    w = (u - BROW_U_IN) / BROW_SPAN
                    yb_c = (1.0 - w) * p[_P_BIY_R] + w * p[_P_BOY_R] - BROW_BOW * 4.0 * w * (1.0 - w)
                    if abs(v - yb_c) <= BROW_HW:
                        g = BROW_SHADE

            dy = v - EYE_CY
            if abs(dy) < 0.16:
                # left eye
                dx = u + EYE_CX
                if abs(dx) < 0.2:
                    h = p[_P_HU_L] if dy < 0.0 else p[_P_HL_L]
                    if h > EYE_MIN_H:
                        ex = dx / EYE_A
                        ey = dy / h
                        qe = ex * ex + ey * ey
                        inside = qe <= 1.0
                        if inside:
                            g = EYE_FILL
                        if abs(math.sqrt(qe) - 1.0) <= EYE_EDGE_W:
                            g = EYE_EDGE_SHADE
                        if inside:
                            px = u - (-EYE_CX + p[_P_PDX])
                            py = v - (EYE_CY + p[_P_PDY])
                            if px * px + py * py <= PUPIL_R * PUPIL_R:
                                g = PUPIL_SHADE
                # right eye
                dx = u - EYE_CX
                if abs(dx) < 0.2:
                    h = p[_P_HU_R] if dy < 0.0 else p[_P_HL_R]
                    if h > EYE_MIN_H:
                        ex = dx / EYE_A
                        ey = dy / h
                        qe = ex * ex + ey * ey
                        inside = qe <= 1.0
                        if inside:
                            g = EYE_FILL
                        if abs(math.sqrt(qe) - 1.0) <= EYE_EDGE_W:
                            g = EYE_EDGE_SHADE
                        if inside:
                            px = u - (EYE_CX + p[_P_PDX])
                            py = v - (EYE_CY + p[_P_PDY])
                            if px * px + py * py <= PUPIL_R * PUPIL_R:
                                g = PUPIL_SHADE

            au = abs(u)
            if au <= NOSE_HW and NOSE_V0 <= v <= NOSE_V1:
                g = NOSE_SHADE
            nx = au - NOSTRIL_U
            ny = v - NOSTRIL_V
            if nx * nx + ny * ny <= NOSTRIL_R * NOSTRIL_R:
                g = NOSTRIL_SHADE

            if n_hatch > 0 and au <= HATCH_UEXT and v <= HATCH_Y0 + HATCH_HW:
                for k in range(n_hatch):
                    if abs(v - (HATCH_Y0 - HATCH_DY * k)) <= HATCH_HW:
                        g = HATCH_SHADE

            if v > 0.2:
                x = u - p[_P_MDU]
                if x < 0.0:
                    xi_m = -x / p[_P_WL]
                    y1u = p[_P_UY1_L]
                    y2u = p[_P_UY2_L]
                    y3 = p[_P_UY3_L]
                    y1l = p[_P_LY1_L]
                    y2l = p[_P_LY2_L]
                else:
                    xi_m = x / p[_P_WR]
                    y1u = p[_P_UY1_R]
                    y2u = p[_P_UY2_R]
                    y3 = p[_P_UY3_R]
                    y1l = p[_P_LY1_R]
                    y2l = p[_P_LY2_R]
                if xi_m <= 1.0:
                    omx = 1.0 - xi_m
                    b0 = omx * omx * omx
                    b1 = 3.0 * omx * omx * xi_m
                    b2 = 3.0 * omx * xi_m * xi_m
                    b3 = xi_m * xi_m * xi_m
                    yu = b0 * p[_P_UY0] + b1 * y1u + b2 * y2u + b3 * y3
                    yl = b0 * p[_P_LY0] + b1 * y1l + b2 * y2l + b3 * y3
                    if yu < v < yl:
                        g = MOUTH_FILL
                    if abs(v - yu) <= LIP_HW:
                        g = LIP_SHADE
                    if abs(v - yl) <= LIP_HW:
                        g = LIP_SHADE

            img[yi, xi] = g
    return img


_raster_numba = None


def _get_numba_raster():
    global _raster_numba
    if _raster_numba is None:
        from numba import njit

        _raster_numba = njit(cache=True)(_raster_core)
    return _raster_numba


# --- rasterization: vectorized fallback ------------------------------------

def _raster_numpy(p, size, img):
    scale = CANVAS_SCALE * size
    half = size / 2.0
    coords = (np.arange(size) + 0.5 - half) / scale
    xb = coords[np.newaxis, :] - p[_P_OX]
    yb = coords[:, np.newaxis] - p[_P_OY]
    u = p[_P_A00] * xb + p[_P_A01] * yb
    v = p[_P_A10] * xb + p[_P_A11] * yb

    g = np.full((size, size), BG_SHADE, dtype=np.uint8)
    qx = u / FACE_RX
    qy = v / FACE_RY
    q = qx * qx + qy * qy
    g[q <= 1.0] = FACE_FILL
    sq = np.sqrt(q)
    g[np.abs(sq - 1.0) <= FACE_EDGE_W] = FACE_EDGE_SHADE

    for sgn, biy, boy in ((-1, p[_P_BIY_L], p[_P_BOY_L]), (1, p[_P_BIY_R], p[_P_BOY_R])):
        su = u * sgn
        band = (BROW_U_IN <= su) & (su <= BROW_U_OUT)
        w = (su - BROW_U_IN) / BROW_SPAN
        yb_c = (1.0 - w) * biy + w * boy - BROW_BOW * 4.0 * w * (1.0 - w)
        g[band & (np.abs(v - yb_c) <= BROW_HW)] = BROW_SHADE

    dy = v - EYE_CY
    for cx, hu, hl in ((-EYE_CX, p[_P_HU_L], p[_P_HL_L]), (EYE_CX, p[_P_HU_R], p[_P_HL_R])):
        dx = u - cx
        h = np.where(dy < 0.0, hu, hl)
        ok = h > EYE_MIN_H
        with np.errstate(divide="ignore", invalid="ignore"):
            ex = dx / EYE_A
            ey = dy / h
            qe = ex * ex + ey * ey
            inside = ok & (qe <= 1.0)
            g[inside] = EYE_FILL
            g[ok & (np.abs(np.sqrt(qe) - 1.0) <= EYE_EDGE_W)] = EYE_EDGE_SHADE
        px = u - (cx + p[_P_PDX])
        py = v - (EYE_CY + p[_P_PDY])
        g[inside & (px * px + py * py <= PUPIL_R * PUPIL_R)] = PUPIL_SHADE

    au = np.abs(u)
    g[(au <= NOSE_HW) & (NOSE_V0 <= v) & (v <= NOSE_V1)] = NOSE_SHADE
    nx = au - NOSTRIL_U
    ny = v - NOSTRIL_V
    g[nx * nx + ny * ny <= NOSTRIL_R * NOSTRIL_R] = NOSTRIL_SHADE

    for k in range(int(p[_P_HATCH_N])):
        yk = HATCH_Y0 - HATCH_DY * k
        g[(au <= HATCH_UEXT) & (np.abs(v - yk) <= HATCH_HW)] = HATCH_SHADE

    x = u - p[_P_MDU]
    left = x < 0.0
    xi_m = np.where(left, -x / p[_P_WL], x / p[_P_WR])
    y1u = np.where(left, p[_P_UY1_L], p[_P_UY1_R])
    y2u = np.where(left, p[_P_UY2_L], p[_P_UY2_R])
    y3 = np.where(left, p[_P_UY3_L], p[_P_UY3_R])
    y1l = np.where(left, p[_P_LY1_L], p[_P_LY1_R])
    y2l = np.where(left, p[_P_LY2_L], p[_P_LY2_R])
    inmouth = xi_m <= 1.0
    omx = 1.0 - xi_m
    b0 = omx * omx * omx
    b1 = 3.0 * omx * omx * xi_m
    b2 = 3.0 * omx * xi_m * xi_m
    b3 = xi_m * xi_m * xi_m
    yu = b0 * p[_P_UY0] + b1 * y1u + b2 * y2u + b3 * y3
    yl = b0 * p[_P_LY0] + b1 * y1l + b2 * y2l + b3 * y3
    g[inmouth & (yu < v) & (v < yl)] = MOUTH_FILL
    g[inmouth & (np.abs(v - yu) <= LIP_HW)] = LIP_SHADE
    g[inmouth & (np.abs(v - yl) <= LIP_HW)] = LIP_SHADE

    img[:, :] = g
    return img


# --- public API -------------------------------------------------------------

def render(values, geo: FaceGeometry, size: int = DEFAULT_RESOLUTION,
           timestamp: float = 0.0, registry: ControlRegistry | None = None) -> Frame:
    """Rasterize one clamped control vector. Pure and bit-deterministic."""
    if registry is not None and not is_legal(values, registry):
        raise RenderContractError("control vector must be clamped/validated before rendering")
    p = face_params(values, geo)
    img = np.empty((size, size), dtype=np.uint8)
    if using_numba():
        _get_numba_raster()(p, size, img)
    else:
        _raster_numpy(p, size, img)
    return Frame(img, timestamp)


def render_batch(seq, geo: FaceGeometry, size: int = DEFAULT_RESOLUTION) -> list:
    """Render a sampled sequence; each frame carries its sample's timestamp."""
    return [
        render(seq.vectors[i], geo, size, timestamp=float(seq.timestamps[i]))
        for i in range(len(seq))
    ]


def save_png(frame: Frame, path) -> None:
    Image.fromarray(frame.pixels, mode="L").save(path, format="PNG")


def load_png(path) -> Frame:
    with Image.open(path) as im:
        return Frame(np.asarray(im.convert("L"), dtype=np.uint8))
