"""Single-channel keyframe tracks and their three interpolation modes.

Cubic Bezier segments are authored in the (time, value) plane with handle
times clamped into the segment span, which keeps the time component of the
curve monotone and makes value-at-time lookup a well-posed inversion.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .backend import using_numba

log = logging.getLogger(__name__)

MODE_BEZIER = 0
MODE_LINEAR = 1
MODE_STEP = 2

MODE_NAMES = {"cubic_bezier": MODE_BEZIER, "linear": MODE_LINEAR, "step": MODE_STEP}
MODE_STRINGS = {v: k for k, v in MODE_NAMES.items()}

SOLVE_TOL = 1e-9
SOLVE_MAX_ITER = 100


class ParameterError(ValueError):
    """Curve parameter outside its legal domain."""


class RangeError(ValueError):
    """Timestamp outside the segment span."""


class NumericError(RuntimeError):
    """Iterative solve failed to converge."""


class TrackError(ValueError):
    """Structurally invalid track."""


@dataclass(frozen=True)
class Keyframe:
    time: float
    value: float
    mode: int = MODE_LINEAR  # governs the segment starting at this keyframe
    out_handle: Optional[tuple[float, float]] = None
    in_handle: Optional[tuple[float, float]] = None  # for the segment ending here

    def __post_init__(self):
        if self.time < 0:
            raise TrackError(f"keyframe time must be >= 0, got {self.time}")
        if self.mode not in (MODE_BEZIER, MODE_LINEAR, MODE_STEP):
            raise TrackError(f"unknown interpolation mode {self.mode!r}")


class Track:
    """Time-sorted keyframes for one control channel.

    Bezier handle times are clamped into their segment span on
    construction (with a warning) so the time curve is always monotone.
    """

    def __init__(self, channel_index: int, keys: Sequence[Keyframe]):
        keys = list(keys)
        if not keys:
            raise TrackError("track needs at least one keyframe")
        if not 0 <= channel_index < 30:
            raise TrackError(f"channel index {channel_index} out of range")
        times = [k.time for k in keys]
        if any(t1 >= t2 for t1, t2 in zip(times, times[1:])):
            raise TrackError("keyframe times must be strictly increasing")

        self.channel_index = channel_index
        self.keys = tuple(self._normalize(keys))
        self._packed = None

    @staticmethod
    def _normalize(keys: list[Keyframe]) -> list[Keyframe]:
        out = []
        clamped = 0
        for i, k in enumerate(keys):
            oh, ih = k.out_handle, k.in_handle
            if i + 1 < len(keys) and k.mode == MODE_BEZIER:
                if oh is None or keys[i + 1].in_handle is None:
                    raise TrackError(
                        f"cubic_bezier segment starting at t={k.time} is missing handles"
                    )
            if oh is not None and i + 1 < len(keys):
                lo, hi = k.time, keys[i + 1].time
                t = min(hi, max(lo, oh[0]))
                if t != oh[0]:
                    clamped += 1
                oh = (t, oh[1])
            if ih is not None and i > 0:
                lo, hi = keys[i - 1].time, k.time
                t = min(hi, max(lo, ih[0]))
                if t != ih[0]:
                    clamped += 1
                ih = (t, ih[1])
            out.append(Keyframe(k.time, k.value, k.mode, oh, ih))
        if clamped:
            log.warning("clamped %d handle time(s) into their segment span", clamped)
        return out

    def packed(self):
        """Flat arrays (times, values, modes, out/in handle t and v) for the kernels."""
        if self._packed is None:
            n = len(self.keys)
            times = np.array([k.time for k in self.keys])
            values = np.array([k.value for k in self.keys])
            modes = np.array([k.mode for k in self.keys], dtype=np.int64)
            hot = times.copy()
            hov = values.copy()
            hit = times.copy()
            hiv = values.copy()
            for i, k in enumerate(self.keys):
                if k.out_handle is not None:
                    hot[i], hov[i] = k.out_handle
                if k.in_handle is not None:
                    hit[i], hiv[i] = k.in_handle
            self._packed = (times, values, modes, hot, hov, hit, hiv)
        return self._packed


def eval_bezier_param(p0, p1, p2, p3, u: float) -> tuple[float, float]:
    """Cubic Bernstein blend of four (time, value) points at parameter u."""
    if not 0.0 <= u <= 1.0:
        raise ParameterError(f"u must be in [0, 1], got {u}")
    w0 = (1 - u) ** 3
    w1 = 3 * (1 - u) ** 2 * u
    w2 = 3 * (1 - u) * u**2
    w3 = u**3
    return (
        w0 * p0[0] + w1 * p1[0] + w2 * p2[0] + w3 * p3[0],
        w0 * p0[1] + w1 * p1[1] + w2 * p2[1] + w3 * p3[1],
    )


def _solve_time_scalar(x0, x1, x2, x3, t, tol, max_iter):
    # Horner coefficients of the time component.
    c3 = x3 - 3.0 * x2 + 3.0 * x1 - x0
    c2 = 3.0 * x2 - 6.0 * x1 + 3.0 * x0
    c1 = 3.0 * x1 - 3.0 * x0
    c0 = x0
    lo = 0.0
    hi = 1.0
    u = (t - x0) / (x3 - x0)
    if u < 0.0:
        u = 0.0
    elif u > 1.0:
        u = 1.0
    for _ in range(max_iter):
        f = ((c3 * u + c2) * u + c1) * u + c0 - t
        if abs(f) <= tol:
            return u
        if f > 0.0:
            hi = u
        else:
            lo = u
        fp = (3.0 * c3 * u + 2.0 * c2) * u + c1
        if fp > 0.0:
            un = u - f / fp
        else:
            un = -1.0
        if un <= lo or un >= hi:
            un = 0.5 * (lo + hi)
        u = un
    return -1.0


def solve_bezier_time(p0, p1, p2, p3, t: float, tol: float = SOLVE_TOL) -> float:
    """Invert the monotone time component: find u with |Bx(u) - t| <= tol."""
    if not p0[0] <= t <= p3[0]:
        raise RangeError(f"t={t} outside segment span [{p0[0]}, {p3[0]}]")
    if t == p0[0]:
        return 0.0
    if t == p3[0]:
        return 1.0
    u = _solve_time_scalar(p0[0], p1[0], p2[0], p3[0], t, tol, SOLVE_MAX_ITER)
    if u < 0.0:
        raise NumericError(f"time inversion did not converge for t={t}")
    return u


def eval_linear(p0, p1, t: float) -> float:
    """Straight-line transition between (t0, P0) and (t1, P1)."""
    t0, v0 = p0
    t1, v1 = p1
    if not t0 <= t <= t1:
        raise RangeError(f"t={t} outside [{t0}, {t1}]")
    return v0 + (v1 - v0) * (t - t0) / (t1 - t0)


def eval_step(p0, p1, t: float) -> float:
    """Hold P0 over [t0, t1); jump to P1 exactly at t1."""
    t0, _ = p0
    t1, v1 = p1
    if not t0 <= t <= t1:
        raise RangeError(f"t={t} outside [{t0}, {t1}]")
    return v1 if t == t1 else p0[1]


# --- batch kernels ---------------------------------------------------------

def _eval_keys_numpy(times, values, modes, hot, hov, hit, hiv, queries):
    out = np.empty(len(queries))
    n = len(times)
    idx = np.searchsorted(times, queries, side="right") - 1
    before = idx < 0
    out[before] = values[0]
    after = idx >= n - 1
    out[after] = values[-1]
    # idx now indexes the segment's left key for the remaining queries
    inside = ~(before | after)
    knot = inside & (times[np.clip(idx, 0, n - 1)] == queries)
    out[knot] = values[np.clip(idx, 0, n - 1)[knot]]
    todo = inside & ~knot
    for seg in np.unique(idx[todo]):
        sel = todo & (idx == seg)
        q = queries[sel]
        t0, t1 = times[seg], times[seg + 1]
        v0, v1 = values[seg], values[seg + 1]
        mode = modes[seg]
        if mode == MODE_LINEAR:
            out[sel] = v0 + (v1 - v0) * (q - t0) / (t1 - t0)
        elif mode == MODE_STEP:
            res = np.full(len(q), v0)
            res[q == t1] = v1
            out[sel] = res
        else:
            x0, x1, x2, x3 = t0, hot[seg], hit[seg + 1], t1
            c3 = x3 - 3.0 * x2 + 3.0 * x1 - x0
            c2 = 3.0 * x2 - 6.0 * x1 + 3.0 * x0
            c1 = 3.0 * x1 - 3.0 * x0
            lo = np.zeros(len(q))
            hi = np.ones(len(q))
            u = np.clip((q - x0) / (x3 - x0), 0.0, 1.0)
            done = np.zeros(len(q), dtype=bool)
            for _ in range(SOLVE_MAX_ITER):
                f = ((c3 * u + c2) * u + c1) * u + x0 - q
                done |= np.abs(f) <= SOLVE_TOL
                if done.all():
                    break
                pos = ~done & (f > 0.0)
                neg = ~done & (f <= 0.0)
                hi[pos] = u[pos]
                lo[neg] = u[neg]
                fp = (3.0 * c3 * u + 2.0 * c2) * u + c1
                with np.errstate(divide="ignore", invalid="ignore"):
                    un = u - f / fp
                bad = ~(fp > 0.0) | (un <= lo) | (un >= hi)
                un = np.where(bad, 0.5 * (lo + hi), un)
                u = np.where(done, u, un)
            if not done.all():
                out[sel] = np.nan
                continue
            y0, y1, y2, y3 = v0, hov[seg], hiv[seg + 1], v1
            d3 = y3 - 3.0 * y2 + 3.0 * y1 - y0
            d2 = 3.0 * y2 - 6.0 * y1 + 3.0 * y0
            d1 = 3.0 * y1 - 3.0 * y0
            out[sel] = ((d3 * u + d2) * u + d1) * u + y0
    return out


_eval_keys_numba = None


def _get_numba_eval():
    global _eval_keys_numba
    if _eval_keys_numba is None:
        from numba import njit

        solve = njit(cache=True)(_solve_time_scalar)

        @njit(cache=True)
        def kern(times, values, modes, hot, hov, hit, hiv, queries):
            n = len(times)
            out = np.empty(len(queries))
            for qi in range(len(queries)):
                t = queries[qi]
                if t <= times[0]:
                    out[qi] = values[0]
                    continue
                if t >= times[n - 1]:
                    out[qi] = values[n - 1]
                    continue
                seg = np.searchsorted(times, t, side="right") - 1
                if times[seg] == t:
                    out[qi] = values[seg]
                    continue
                t0 = times[seg]
                t1 = times[seg + 1]
                v0 = values[seg]
                v1 = values[seg + 1]
                mode = modes[seg]
                if mode == MODE_LINEAR:
                    out[qi] = v0 + (v1 - v0) * (t - t0) / (t1 - t0)
                elif mode == MODE_STEP:
                    out[qi] = v1 if t == t1 else v0
                else:
                    u = solve(t0, hot[seg], hit[seg + 1], t1, t, SOLVE_TOL, SOLVE_MAX_ITER)
                    if u < 0.0:
                        out[qi] = np.nan
                        continue
                    y0 = v0
                    y1 = hov[seg]
                    y2 = hiv[seg + 1]
                    y3 = v1
                    d3 = y3 - 3.0 * y2 + 3.0 * y1 - y0
                    d2 = 3.0 * y2 - 6.0 * y1 + 3.0 * y0
                    d1 = 3.0 * y1 - 3.0 * y0
                    out[qi] = ((d3 * u + d2) * u + d1) * u + y0
            return out

        _eval_keys_numba = kern
    return _eval_keys_numba


def sample_track(track: Track, queries) -> np.ndarray:
    """Evaluate a track at an array of timestamps (constant-hold outside keys)."""
    queries = np.asarray(queries, dtype=np.float64)
    packed = track.packed()
    if using_numba():
        out = _get_numba_eval()(*packed, queries)
    else:
        out = _eval_keys_numpy(*packed, queries)
    if np.isnan(out).any():
        raise NumericError("bezier time inversion failed for some timestamps")
    return out


def eval_track(track: Track, t: float) -> float:
    """Evaluate a track at one timestamp."""
    if t < 0:
        raise RangeError(f"t must be >= 0, got {t}")
    return float(sample_track(track, np.array([t]))[0])
