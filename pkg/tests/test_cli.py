import json

import numpy as np
import pytest
from click.testing import CliRunner

from voxplore.cli import (EXIT_INPUT, EXIT_PRECONDITION, EXIT_STALE, main)
from voxplore.phantoms import nested_spheres

from voxplore.volume import save_volume

INR_FLAGS = ["--levels", "2", "--features-per-level", "2", "--table-size", "256",
             "--epochs", "2", "--batch-size", "512", "--seed", "0"]


@pytest.fixture(scope="module")
def phantom():
    return nested_spheres((16, 16, 16), seed=0)


@pytest.fixture(scope="module")
def volume_file(tmp_path_factory, phantom):
    return save_volume(phantom.vol, tmp_path_factory.mktemp("v") / "vol.json")


@pytest.fixture(scope="module")
def scribble_file(tmp_path_factory, phantom):
    labels = phantom.labels.labels
    mid = labels.shape[2] // 2
    doc = []
    for stroke, cid in enumerate([0, 1, 2, 3]):
        xs, ys = np.nonzero(labels[:, :, mid] == cid)
        for i in range(min(8, len(xs))):
            doc.append({"voxel": [int(xs[i]), int(ys[i]), mid], "class": cid,
                        "stroke": stroke, "slice": {"axis": 2, "index": mid}})
    path = tmp_path_factory.mktemp("s") / "scribbles.json"
    path.write_text(json.dumps(doc))
    return path


def run(args):
    return CliRunner().invoke(main, [str(a) for a in args])


class TestTrainCommand:
    def test_writes_checkpoint_and_losses(self, tmp_path, volume_file):
        out = tmp_path / "run"
        result = run(["train", "-v", volume_file, "-o", out] + INR_FLAGS)
        assert result.exit_code == 0, result.output
        assert (out / "checkpoint.vxpc").exists()
        assert (out / "features.vxfv").exists()
        losses = json.loads((out / "losses.json").read_text())
        assert len(losses) == 2

    def test_rerun_is_bit_identical(self, tmp_path, volume_file):
        out1, out2 = tmp_path / "a", tmp_path / "b"
        assert run(["train", "-v", volume_file, "-o", out1] + INR_FLAGS).exit_code == 0
        assert run(["train", "-v", volume_file, "-o", out2] + INR_FLAGS).exit_code == 0
        assert (out1 / "checkpoint.vxpc").read_bytes() == \
               (out2 / "checkpoint.vxpc").read_bytes()
        assert (out1 / "features.vxfv").read_bytes() == \
               (out2 / "features.vxfv").read_bytes()

    def test_missing_volume_exit_code(self, tmp_path):
        result = run(["train", "-v", tmp_path / "missing.json", "-o", tmp_path])
        assert result.exit_code == 2       # click validates the path

    def test_config_file_defaults(self, tmp_path, volume_file):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"epochs": 1, "levels": 2,
                                   "features_per_level": 2, "table_size": 256,
                                   "batch_size": 512}))
        out = tmp_path / "run"
        result = run(["train", "-v", volume_file, "-o", out, "-c", cfg])
        assert result.exit_code == 0, result.output
        losses = json.loads((out / "losses.json").read_text())
        assert len(losses) == 1


class TestClassifyCommand:
    def test_classify_without_features_is_stale_error(self, tmp_path,
                                                      volume_file, scribble_file):
        result = run(["classify", "-v", volume_file, "-s", scribble_file,
                      "-o", tmp_path / "out"])
        assert result.exit_code == EXIT_STALE
        assert "missing features" in result.output

    def test_full_classify_flow(self, tmp_path, volume_file, scribble_file):
        train_out = tmp_path / "train"
        assert run(["train", "-v", volume_file, "-o", train_out]
                   + INR_FLAGS).exit_code == 0
        out = tmp_path / "cls"
        result = run(["classify", "-v", volume_file, "-s", scribble_file,
                      "-f", train_out / "features.vxfv", "-o", out,
                      "--trees", "20"])
        assert result.exit_code == 0, result.output
        assert (out / "probabilities.vxpv").exists()
        assert (out / "predicted_labels.json").exists()
        assert (out / "forest.vxrf").exists()
        report = json.loads((out / "report.json").read_text())
        assert report["classes"] == [0, 1, 2, 3]

    def test_stale_features_rejected(self, tmp_path, volume_file, phantom,
                                     scribble_file):
        other = nested_spheres((16, 16, 16), seed=9)
        other_file = save_volume(other.vol, tmp_path / "other.json")
        train_out = tmp_path / "train"
        assert run(["train", "-v", other_file, "-o", train_out]
                   + INR_FLAGS).exit_code == 0
        result = run(["classify", "-v", volume_file, "-s", scribble_file,
                      "-f", train_out / "features.vxfv",
                      "-o", tmp_path / "out", "--trees", "5"])
        assert result.exit_code == EXIT_STALE
        assert "different volume" in result.output

    def test_degenerate_scribbles_precondition(self, tmp_path, volume_file):
        train_out = tmp_path / "train"
        assert run(["train", "-v", volume_file, "-o", train_out]
                   + INR_FLAGS).exit_code == 0
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps([{"voxel": [1, 1, 1], "class": 1}]))
        result = run(["classify", "-v", volume_file, "-s", bad,
                      "-f", train_out / "features.vxfv",
                      "-o", tmp_path / "out", "--trees", "5"])
        assert result.exit_code == EXIT_PRECONDITION


@pytest.fixture(scope="module")
def artifacts(tmp_path_factory, volume_file, scribble_file):
    base = tmp_path_factory.mktemp("artifacts")
    run(["train", "-v", volume_file, "-o", base / "train"] + INR_FLAGS)
    run(["classify", "-v", volume_file, "-s", scribble_file,
         "-f", base / "train" / "features.vxfv", "-o", base / "cls",
         "--trees", "10"])
    return base


class TestRenderAndSlices:

    def test_render_writes_png(self, tmp_path, volume_file, artifacts):
        out = tmp_path / "img.png"
        result = run(["render", "-v", volume_file,
                      "-p", artifacts / "cls" / "probabilities.vxpv",
                      "--width", "24", "--height", "24", "-o", out])
        assert result.exit_code == 0, result.output
        assert out.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"

    def test_render_deterministic(self, tmp_path, volume_file, artifacts):
        a, b = tmp_path / "a.png", tmp_path / "b.png"
        for out in (a, b):
            assert run(["render", "-v", volume_file,
                        "-p", artifacts / "cls" / "probabilities.vxpv",
                        "--width", "16", "--height", "16", "-o", out]).exit_code == 0
        assert a.read_bytes() == b.read_bytes()

    def test_slice_with_overlay(self, tmp_path, volume_file, artifacts,
                                scribble_file):
        out = tmp_path / "slice.png"
        result = run(["slices", "-v", volume_file, "--axis", "2", "--index", "8",
                      "--overlay", "scribbles", "-s", scribble_file, "-o", out])
        assert result.exit_code == 0, result.output
        assert out.exists()

    def test_slice_index_out_of_range(self, tmp_path, volume_file):
        result = run(["slices", "-v", volume_file, "--axis", "2",
                      "--index", "99", "-o", tmp_path / "x.png"])
        assert result.exit_code == EXIT_PRECONDITION

    def test_viewpoints_command(self, tmp_path, volume_file, artifacts):
        out = tmp_path / "views"
        result = run(["viewpoints", "-v", volume_file,
                      "-f", artifacts / "train" / "features.vxfv",
                      "--k", "6", "--m", "32", "--thumb-size", "24", "-o", out])
        assert result.exit_code == 0, result.output
        report = json.loads((out / "viewpoints.json").read_text())
        assert report["K"] == 6 and report["M"] == 32
        assert len(report["selected"]) >= 1
        thumbs = list(out.glob("viewpoint_*.png"))
        assert len(thumbs) == len(report["selected"])


class TestPhantomCommand:
    def test_phantom_writes_volume_and_labels(self, tmp_path):
        out = tmp_path / "ph.json"
        result = run(["phantom", "--kind", "engraved-cube", "--dims", "20",
                      "--seed", "3", "-o", out])
        assert result.exit_code == 0, result.output
        assert out.exists()
        assert (tmp_path / "ph_labels.json").exists()
        assert (tmp_path / "ph_descriptor.json").exists()

    def test_unknown_kind_is_input_error(self, tmp_path):
        result = run(["phantom", "--kind", "blob", "-o", tmp_path / "x.json"])
        assert result.exit_code == EXIT_INPUT
