import json
import subprocess
import sys

import numpy as np
import pytest

from facetrainer.config import TrainConfig
from facetrainer.data import Registry, load_manifest, vectors_of
from facetrainer.train import _lr_factor, export_predictions, pooled_mae, train


def overfit_manifest(small_dataset, tmp_path, n=32):
    """Copy of the manifest keeping only n records, all marked train."""
    lines = (small_dataset / "manifest.jsonl").read_text().splitlines()
    out = [lines[0]]
    for line in lines[1 : n + 1]:
        d = json.loads(line)
        d["split"] = "train"
        out.append(json.dumps(d, sort_keys=True))
    p = tmp_path / "manifest.jsonl"
    p.write_text("\n".join(out) + "\n")
    for name in ("registry.json", "geometry.json"):
        (tmp_path / name).write_bytes((small_dataset / name).read_bytes())
    (tmp_path / "images").symlink_to(small_dataset / "images")
    return p


class TestSchedule:
    def test_warmup_then_cosine(self):
        factors = [_lr_factor(e, 100) for e in range(100)]
        assert factors[0] < factors[4] == 1.0  # 5-epoch warmup ends at full rate
        assert all(b <= a + 1e-12 for a, b in zip(factors[4:], factors[5:]))
        assert factors[-1] == pytest.approx(0.0, abs=1e-3)

    def test_tiny_run(self):
        assert _lr_factor(0, 1) == 1.0


class TestPooledMae:
    def test_hand_case(self):
        pred = np.array([[0.0, 0.0, 0.0, 0.4]])
        truth = np.zeros((1, 4))
        assert pooled_mae(pred, truth) == pytest.approx(0.1, abs=1e-12)

    def test_order_invariant(self):
        rng = np.random.default_rng(0)
        p, t = rng.normal(size=(5, 30)), rng.normal(size=(5, 30))
        assert pooled_mae(p, t) == pooled_mae(p[::-1], t[::-1])


@pytest.fixture(scope="module")
def trained(small_dataset, tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    cfg = TrainConfig(manifest=str(small_dataset / "manifest.jsonl"),
                      epochs=10, seed=0, out_dir=str(out))
    manifest = load_manifest(cfg.manifest)
    return cfg, manifest, train(cfg, manifest)


class TestTraining:
    def test_overfit_32_records(self, small_dataset, tmp_path):
        manifest_path = overfit_manifest(small_dataset, tmp_path)
        cfg = TrainConfig(manifest=str(manifest_path), epochs=400, seed=1,
                          val_fraction=0.0, out_dir=str(tmp_path / "run"))
        manifest = load_manifest(manifest_path)
        result = train(cfg, manifest)
        mae = export_predictions(result.model, manifest, cfg,
                                 tmp_path / "preds.jsonl", split="train")
        assert mae < 0.01

    def test_loss_finite_and_decreasing_early(self, trained):
        _, _, result = trained
        losses = [h["train_loss"] for h in result.history[:5]]
        assert all(np.isfinite(l) for l in losses)
        # moving-average trend over the first five epochs
        assert np.mean(losses[2:]) < np.mean(losses[:3])

    def test_artifacts_written(self, trained):
        cfg, _, result = trained
        from pathlib import Path

        out = Path(cfg.out_dir)
        assert (out / "best.pt").exists()
        assert (out / "config.json").exists()
        rows = (out / "history.csv").read_text().splitlines()
        assert rows[0] == "epoch,lr,train_loss,val_mae"
        assert len(rows) == 1 + cfg.epochs

    def test_checkpoint_is_best_by_validation(self, trained):
        _, _, result = trained
        assert result.best_val_mae == min(h["val_mae"] for h in result.history)

    def test_empty_train_split_rejected(self, small_dataset, tmp_path):
        lines = (small_dataset / "manifest.jsonl").read_text().splitlines()
        out = [lines[0]]
        for line in lines[1:6]:
            d = json.loads(line)
            d["split"] = "test"
            out.append(json.dumps(d))
        p = tmp_path / "manifest.jsonl"
        p.write_text("\n".join(out) + "\n")
        (tmp_path / "registry.json").write_bytes((small_dataset / "registry.json").read_bytes())
        cfg = TrainConfig(manifest=str(p), epochs=1, out_dir=str(tmp_path / "r"))
        with pytest.raises(ValueError):
            train(cfg, load_manifest(p))


class TestExport:
    def test_coverage_and_legality(self, small_dataset, trained, tmp_path):
        cfg, manifest, result = trained
        path = tmp_path / "preds.jsonl"
        export_predictions(result.model, manifest, cfg, path)
        rows = [json.loads(l) for l in path.read_text().splitlines()]
        test_records = manifest.split("test")
        assert len(rows) == len(test_records)
        assert [r["id"] for r in rows] == [r.id for r in test_records]
        reg = Registry.load(small_dataset / "registry.json")
        for row in rows:
            v = np.asarray(row["vector"])
            assert v.shape == (30,)
            assert np.all(v >= reg.lows) and np.all(v <= reg.highs)

    def test_reported_mae_matches_file(self, trained, tmp_path):
        cfg, manifest, result = trained
        path = tmp_path / "preds.jsonl"
        mae = export_predictions(result.model, manifest, cfg, path)
        rows = [json.loads(l) for l in path.read_text().splitlines()]
        pred = np.array([r["vector"] for r in rows])
        truth = vectors_of(manifest.split("test"))
        assert pooled_mae(pred, truth) == pytest.approx(mae, abs=1e-12)

    def test_cross_harness_agreement(self, small_dataset, trained, tmp_path):
        """The pipeline CLI must reproduce the trainer's MAE from the file."""
        cfg, manifest, result = trained
        path = tmp_path / "preds.jsonl"
        mae = export_predictions(result.model, manifest, cfg, path)
        json_out = tmp_path / "eval.json"
        res = subprocess.run(
            [sys.executable, "-m", "facepipe.cli", "eval",
             "--dataset", str(small_dataset), "--predictors", "",
             "--predictions", str(path), "--json-out", str(json_out)],
            capture_output=True, text=True,
        )
        assert res.returncode == 0, res.stderr
        report = json.loads(json_out.read_text())[0]
        assert abs(report["mae"] - mae) <= 1e-6
