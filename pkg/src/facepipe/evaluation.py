"""Predictor scoring: pooled per-channel absolute errors with MAE/SD/SEM/95% CI,
plus the random-control, random-training-sample and nearest-neighbor baselines.
"""

from __future__ import annotations

import csv
import json
import math
import threading
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .backend import using_numba
from .controls import ControlRegistry, N_CHANNELS
from .render import load_png

Z95 = 1.96


class PredictorContractError(ValueError):
    """A predictor returned a malformed vector."""


@dataclass(frozen=True)
class EvalReport:
    name: str
    n: int
    mae: float
    sd: float
    sem: float
    ci_lo: float
    ci_hi: float

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "n": self.n,
            "mae": self.mae,
            "sd": self.sd,
            "sem": self.sem,
            "ci95": [self.ci_lo, self.ci_hi],
        }


def report_from_errors(name: str, errors) -> EvalReport:
    """Summarize a pooled sample of absolute errors.

    Sample SD (divide by n-1); SEM = SD/sqrt(n); CI = MAE +/- 1.96*SEM.
    Errors are sorted before reduction so the result is independent of
    evaluation order.
    """
    errors = np.sort(np.asarray(errors, dtype=np.float64))
    n = len(errors)
    if n == 0:
        raise ValueError("empty error sample")
    mae = float(errors.mean())
    sd = float(errors.std(ddof=1)) if n > 1 else 0.0
    sem = sd / math.sqrt(n)
    return EvalReport(name, n, mae, sd, sem, mae - Z95 * sem, mae + Z95 * sem)


def confidence_interval(mae: float, sem: float) -> tuple[float, float]:
    return (mae - Z95 * sem, mae + Z95 * sem)


class Predictor:
    """Interface: predict(image pixels) -> 30-vector. Stateless per call."""

    name = "predictor"

    def predict(self, image) -> np.ndarray:
        raise NotImplementedError


def score(predictor: Predictor, truths, images=None, name: str | None = None) -> EvalReport:
    """Pool the 30*N absolute errors of a predictor over a test set."""
    truths = np.asarray(truths, dtype=np.float64)
    if len(truths) == 0:
        raise ValueError("test split is empty")
    errors = np.empty((len(truths), N_CHANNELS))
    for i in range(len(truths)):
        img = images[i] if images is not None else None
        pred = np.asarray(predictor.predict(img), dtype=np.float64)
        if pred.shape != (N_CHANNELS,):
            raise PredictorContractError(
                f"{predictor.name} returned shape {pred.shape}, expected ({N_CHANNELS},)"
            )
        errors[i] = np.abs(pred - truths[i])
    return report_from_errors(name or predictor.name, errors.ravel())


# --- reference predictors ---------------------------------------------------

class RandomControlPredictor(Predictor):
    """Ignores the image; samples each channel uniformly within its range."""

    name = "rc"

    def __init__(self, registry: ControlRegistry, seed: int):
        self._lows = registry.lows
        self._highs = registry.highs
        self._seed = seed
        self._calls = 0
        self._lock = threading.Lock()

    def predict(self, image=None) -> np.ndarray:
        with self._lock:
            idx = self._calls
            self._calls += 1
        rng = np.random.default_rng((self._seed, idx))
        return rng.uniform(self._lows, self._highs)


class RandomTrainingPredictor(Predictor):
    """Ignores the image; returns a uniformly chosen training-set vector."""

    name = "rt"

    def __init__(self, train_vectors, seed: int):
        self._vectors = np.asarray(train_vectors, dtype=np.float64)
        if len(self._vectors) == 0:
            raise ValueError("training set is empty")
        self._seed = seed
        self._calls = 0
        self._lock = threading.Lock()

    def predict(self, image=None) -> np.ndarray:
        with self._lock:
            idx = self._calls
            self._calls += 1
        rng = np.random.default_rng((self._seed, idx))
        return self._vectors[int(rng.integers(len(self._vectors)))].copy()


def _nn_dists_core(train, query):
    n = train.shape[0]
    m = train.shape[1]
    out = np.empty(n, dtype=np.int64)
    for i in range(n):
        acc = 0
        for j in range(m):
            dv = int(train[i, j]) - int(query[j])
            acc += dv * dv
        out[i] = acc
    return out


_nn_dists_numba = None


def _get_numba_nn():
    global _nn_dists_numba
    if _nn_dists_numba is None:
        from numba import njit

        _nn_dists_numba = njit(cache=True)(_nn_dists_core)
    return _nn_dists_numba


def _nn_dists_numpy(train, query):
    out = np.empty(train.shape[0], dtype=np.int64)
    q = query.astype(np.int64)
    chunk = 64
    for s in range(0, train.shape[0], chunk):
        d = train[s : s + chunk].astype(np.int64) - q
        out[s : s + chunk] = (d * d).sum(axis=1)
    return out


class NearestNeighborPredictor(Predictor):
    """Returns the vector of the training image closest in pixel L2 distance.

    Ties break toward the lowest record id (rows are pre-sorted by id).
    """

    name = "nn"

    def __init__(self, train_ids, train_images, train_vectors):
        order = np.argsort(np.asarray(train_ids), kind="stable")
        self._images = np.stack(
            [np.asarray(train_images[i]).ravel() for i in order]
        ).astype(np.uint8)
        self._vectors = np.asarray(train_vectors, dtype=np.float64)[order]

    def predict(self, image) -> np.ndarray:
        q = np.asarray(image, dtype=np.uint8).ravel()
        if using_numba():
            dists = _get_numba_nn()(self._images, q)
        else:
            dists = _nn_dists_numpy(self._images, q)
        return self._vectors[int(np.argmin(dists))].copy()


class FilePredictor(Predictor):
    """Replays predictions from a JSONL file of {"id": ..., "vector": [...]}."""

    def __init__(self, path, name: str | None = None):
        self.name = name or Path(path).stem
        self._by_id = {}
        with open(path) as f:
            for line in f:
                if line.strip():
                    d = json.loads(line)
                    self._by_id[d["id"]] = np.asarray(d["vector"], dtype=np.float64)

    def ids(self):
        return set(self._by_id)

    def predict_id(self, record_id: str) -> np.ndarray:
        if record_id not in self._by_id:
            raise KeyError(f"no prediction for record {record_id}")
        return self._by_id[record_id]


def score_prediction_file(pred: FilePredictor, records) -> EvalReport:
    missing = [r.id for r in records if r.id not in pred.ids()]
    if missing:
        raise PredictorContractError(f"predictions missing for records: {missing[:5]}...")
    errors = np.empty((len(records), N_CHANNELS))
    for i, r in enumerate(records):
        p = pred.predict_id(r.id)
        if p.shape != (N_CHANNELS,):
            raise PredictorContractError(f"prediction for {r.id} has shape {p.shape}")
        errors[i] = np.abs(p - np.asarray(r.vector))
    return report_from_errors(pred.name, errors.ravel())


# --- harness ----------------------------------------------------------------

def load_split_images(root, records) -> list:
    return [load_png(Path(root) / r.image_path).pixels for r in records]


def compare(reports) -> str:
    """Aligned text table, one row per report."""
    header = f"{'predictor':<12}{'n':>9}{'MAE':>10}{'SD':>10}{'SEM':>10}  95% CI"
    lines = [header, "-" * len(header)]
    for r in reports:
        lines.append(
            f"{r.name:<12}{r.n:>9}{r.mae:>10.4f}{r.sd:>10.4f}{r.sem:>10.4f}"
            f"  [{r.ci_lo:.4f}, {r.ci_hi:.4f}]"
        )
    return "\n".join(lines)


def reports_to_csv(reports, path) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["predictor", "n", "mae", "sd", "sem", "ci_lo", "ci_hi"])
        for r in reports:
            w.writerow([r.name, r.n, r.mae, r.sd, r.sem, r.ci_lo, r.ci_hi])
