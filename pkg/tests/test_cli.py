"""End-to-end command-line behavior: exit codes, artifacts, stdout contract."""

import csv
import io
import json
import os
import re
import textwrap
from contextlib import redirect_stdout
from types import SimpleNamespace

import numpy as np
import pytest

from xcnn import data as datamod
from xcnn.cli import main

from helpers import make_corpus, make_separable_corpus

FAMILIES = ["blue", "green", "red"]
PER_FAMILY = 14  # per family: 9 train / 2 val / 3 test


@pytest.fixture(autouse=True)
def _no_env_output_dir(monkeypatch):
    monkeypatch.delenv("XCNN_OUTPUT_DIR", raising=False)


def run(argv, capsys):
    """Invoke the CLI in process; argparse usage errors surface as SystemExit."""
    try:
        code = main(argv)
    except SystemExit as exc:
        code = int(exc.code) if exc.code else 0
    out, err = capsys.readouterr()
    return code, out, err


def write_cfg(path, root, out, epochs=3, extra=""):
    path.write_text(textwrap.dedent(f"""
        seed = 3
        output_dir = "{out}"
        [data]
        root = "{root}"
        input_size = 16
        [model]
        blocks = [4, 8]
        [train]
        epochs = {epochs}
        batch_size = 8
        learning_rate = 0.15
        momentum = 0.9
        weight_decay = 0.0001
        [eval]
        split = "val"
    """) + textwrap.dedent(extra), encoding="utf-8")
    return path


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    """One shared split + train run; read-only for the tests that use it."""
    os.environ.pop("XCNN_OUTPUT_DIR", None)
    base = tmp_path_factory.mktemp("cli_pipe")
    root = make_separable_corpus(base / "data", FAMILIES, PER_FAMILY)
    out = base / "out"
    cfg = write_cfg(base / "run.toml", root, out)
    buf = io.StringIO()
    with redirect_stdout(buf):
        assert main(["split", "-c", str(cfg)]) == 0
        assert main(["train", "-c", str(cfg)]) == 0
    return SimpleNamespace(base=base, root=root, out=out, cfg=cfg,
                           stdout=buf.getvalue())


class TestUsageErrors:
    @pytest.mark.parametrize("argv", [
        [],
        ["frobnicate"],
        ["split"],                                    # missing -c
        ["eval", "-c", "x.toml", "--split", "training"],
        ["explain", "-c", "x.toml", "--method", "foo"],
    ])
    def test_bad_usage_exits_1(self, argv, capsys):
        code, _, err = run(argv, capsys)
        assert code == 1
        assert "error" in err

    def test_bad_method_lists_choices(self, capsys):
        code, _, err = run(["explain", "-c", "x.toml", "--method", "foo"], capsys)
        assert code == 1
        assert "hirescam" in err and "gradcam" in err

    def test_help_exits_0(self, capsys):
        code, out, _ = run(["--help"], capsys)
        assert code == 0
        assert "split" in out and "featmaps" in out

    def test_missing_config_file_exits_1(self, tmp_path, capsys):
        code, _, err = run(["split", "-c", str(tmp_path / "no.toml")], capsys)
        assert code == 1
        assert "config error" in err and "not found" in err

    def test_unknown_config_key_exits_1(self, tmp_path, capsys):
        p = tmp_path / "bad.toml"
        p.write_text("[train]\nlearing_rate = 0.1\n", encoding="utf-8")
        code, _, err = run(["split", "-c", str(p)], capsys)
        assert code == 1
        assert "learing_rate" in err

    def test_no_dataset_root_exits_1(self, tmp_path, capsys):
        p = tmp_path / "run.toml"
        p.write_text("seed = 1\n", encoding="utf-8")
        code, _, err = run(["split", "-c", str(p)], capsys)
        assert code == 1
        assert "root" in err

    def test_missing_dataset_root_dir_exits_2(self, tmp_path, capsys):
        cfg = write_cfg(tmp_path / "run.toml", tmp_path / "ghost", tmp_path / "out")
        code, _, err = run(["split", "-c", str(cfg)], capsys)
        assert code == 2
        assert "ghost" in err


class TestSplitCommand:
    def test_artifacts_and_stdout(self, pipeline):
        assert (pipeline.out / "manifest.csv").is_file()
        assert (pipeline.out / "split_counts.csv").is_file()
        assert "scanned 42 images in 3 families" in pipeline.stdout
        assert "train=27 val=6 test=9 total=42" in pipeline.stdout

    def test_split_counts_table(self, pipeline):
        with open(pipeline.out / "split_counts.csv", newline="") as f:
            rows = list(csv.reader(f))
        assert rows[0] == ["family", "train", "val", "test", "total"]
        for fam, row in zip(FAMILIES, rows[1:]):
            assert row == [fam, "9", "2", "3", "14"]
        assert rows[-1] == ["total", "27", "6", "9", "42"]

    def test_rerun_is_byte_identical(self, tmp_path, capsys):
        root = make_corpus(tmp_path / "data", {"a": 12, "b": 13})
        cfg = write_cfg(tmp_path / "run.toml", root, tmp_path / "o1")
        assert run(["split", "-c", str(cfg)], capsys)[0] == 0
        assert run(["split", "-c", str(cfg), "--out", str(tmp_path / "o2")],
                   capsys)[0] == 0
        a = (tmp_path / "o1" / "manifest.csv").read_bytes()
        b = (tmp_path / "o2" / "manifest.csv").read_bytes()
        assert a == b

    def test_seed_flag_changes_assignment(self, tmp_path, capsys):
        root = make_corpus(tmp_path / "data", {"a": 12, "b": 13})
        cfg = write_cfg(tmp_path / "run.toml", root, tmp_path / "o1")
        assert run(["split", "-c", str(cfg)], capsys)[0] == 0
        assert run(["split", "-c", str(cfg), "--out", str(tmp_path / "o2"),
                    "--seed", "99"], capsys)[0] == 0
        a = (tmp_path / "o1" / "manifest.csv").read_bytes()
        b = (tmp_path / "o2" / "manifest.csv").read_bytes()
        assert a != b

    def test_output_dir_precedence(self, tmp_path, capsys, monkeypatch):
        root = make_corpus(tmp_path / "data", {"a": 6, "b": 6})
        cfg = write_cfg(tmp_path / "run.toml", root, tmp_path / "from_cfg")
        envdir = tmp_path / "from_env"
        monkeypatch.setenv("XCNN_OUTPUT_DIR", str(envdir))
        assert run(["split", "-c", str(cfg)], capsys)[0] == 0
        assert (envdir / "manifest.csv").is_file()
        assert not (tmp_path / "from_cfg").exists()
        flagdir = tmp_path / "from_flag"
        assert run(["split", "-c", str(cfg), "--out", str(flagdir)], capsys)[0] == 0
        assert (flagdir / "manifest.csv").is_file()


class TestTrainCommand:
    def test_stdout_and_artifacts(self, pipeline):
        assert re.search(r"model: \d+ parameters, labels=\['blue', 'green', 'red'\]",
                         pipeline.stdout)
        assert "final epoch=3" in pipeline.stdout
        assert (pipeline.out / "model.ckpt").is_file()
        with open(pipeline.out / "train_log.csv", newline="") as f:
            rows = list(csv.reader(f))
        assert rows[0] == ["epoch", "train_loss", "val_loss", "top1", "top5"]
        assert [r[0] for r in rows[1:]] == ["1", "2", "3"]

    def test_missing_manifest_exits_2(self, tmp_path, capsys):
        root = make_corpus(tmp_path / "data", {"a": 6, "b": 6})
        cfg = write_cfg(tmp_path / "run.toml", root, tmp_path / "out")
        code, _, err = run(["train", "-c", str(cfg)], capsys)
        assert code == 2
        assert "error" in err

    def test_resume_extends_log_and_numbering(self, tmp_path, capsys):
        root = make_separable_corpus(tmp_path / "data", ["a", "b"], 8)
        out = tmp_path / "out"
        cfg = write_cfg(tmp_path / "run.toml", root, out, epochs=2)
        assert run(["split", "-c", str(cfg)], capsys)[0] == 0
        assert run(["train", "-c", str(cfg)], capsys)[0] == 0
        code, stdout, _ = run(["train", "-c", str(cfg),
                               "--resume", str(out / "model.ckpt")], capsys)
        assert code == 0
        assert "final epoch=4" in stdout
        with open(out / "train_log.csv", newline="") as f:
            rows = list(csv.reader(f))
        assert [r[0] for r in rows[1:]] == ["1", "2", "3", "4"]

    def test_full_rerun_is_deterministic(self, tmp_path, capsys):
        root = make_separable_corpus(tmp_path / "data", ["a", "b"], 10)
        outs = []
        for name in ("r1", "r2"):
            out = tmp_path / name
            cfg = write_cfg(tmp_path / f"{name}.toml", root, out, epochs=2)
            assert run(["split", "-c", str(cfg)], capsys)[0] == 0
            assert run(["train", "-c", str(cfg)], capsys)[0] == 0
            assert run(["eval", "-c", str(cfg)], capsys)[0] == 0
            outs.append(out)
        for rel in ("manifest.csv", "split_counts.csv", "train_log.csv",
                    "model.ckpt", "eval_val/metrics.json"):
            a = (outs[0] / rel).read_bytes()
            b = (outs[1] / rel).read_bytes()
            assert a == b, f"{rel} differs between identical runs"


class TestEvalCommand:
    def test_default_split_from_config(self, pipeline, capsys):
        code, out, _ = run(["eval", "-c", str(pipeline.cfg)], capsys)
        assert code == 0
        assert "split=val n=6" in out
        dest = pipeline.out / "eval_val"
        for name in ("metrics.json", "confusion.csv",
                     "confusion_normalized.csv", "confusion.png"):
            assert (dest / name).is_file()
        with open(dest / "metrics.json", encoding="utf-8") as f:
            report = json.load(f)
        assert report["total"] == 6
        assert report["labels"] == FAMILIES

    def test_split_flag_overrides(self, pipeline, capsys):
        code, out, _ = run(["eval", "-c", str(pipeline.cfg), "--split", "test"],
                           capsys)
        assert code == 0
        assert "split=test n=9" in out
        assert (pipeline.out / "eval_test" / "metrics.json").is_file()

    def test_missing_checkpoint_exits_2(self, tmp_path, capsys):
        root = make_corpus(tmp_path / "data", {"a": 8, "b": 8})
        cfg = write_cfg(tmp_path / "run.toml", root, tmp_path / "out")
        assert run(["split", "-c", str(cfg)], capsys)[0] == 0
        code, _, err = run(["eval", "-c", str(cfg)], capsys)
        assert code == 2
        assert "error" in err

    def test_label_map_mismatch_exits_2(self, pipeline, tmp_path, capsys):
        root = make_corpus(tmp_path / "data", {"ant": 8, "bee": 8})
        other = tmp_path / "other"
        cfg = write_cfg(tmp_path / "run.toml", root, other)
        assert run(["split", "-c", str(cfg)], capsys)[0] == 0
        code, _, err = run(["eval", "-c", str(cfg),
                            "--checkpoint", str(pipeline.out / "model.ckpt")],
                           capsys)
        assert code == 2
        assert "label map mismatch" in err


def parse_explain(out):
    """Pull the numeric fields out of the explain stdout block."""
    g = lambda pat: re.search(pat, out)
    return SimpleNamespace(
        predicted=g(r"predicted=(\w+) index=(\d+)"),
        explained=g(r"explained=(\w+) index=(\d+)"),
        logit=float(g(r"logit=(-?\d+\.\d+)").group(1)),
        bias=float(g(r"bias=(-?\d+\.\d+)").group(1)),
        raw_sum=float(g(r"raw_sum=(-?\d+\.\d+)").group(1)),
    )


class TestExplainCommand:
    def test_default_explains_prediction(self, pipeline, capsys):
        manifest = datamod.read_manifest(pipeline.out / "manifest.csv")
        img = manifest.paths("test")[0]
        code, out, _ = run(["explain", "-c", str(pipeline.cfg), img], capsys)
        assert code == 0
        p = parse_explain(out)
        # no --class: the explained class is the argmax prediction
        assert p.explained.group(1) == p.predicted.group(1)
        assert p.explained.group(2) == p.predicted.group(2)
        assert "method=hirescam layer=conv2" in out
        dest = pipeline.out / "explain" / f"{os.path.basename(img)[:-4]}_hirescam"
        for name in ("cam_raw.csv", "cam.png", "overlay.png"):
            assert (dest / name).is_file()

    def test_printed_sum_matches_logit_minus_bias(self, pipeline, capsys):
        manifest = datamod.read_manifest(pipeline.out / "manifest.csv")
        img = manifest.paths("test")[1]
        code, out, _ = run(["explain", "-c", str(pipeline.cfg), img], capsys)
        assert code == 0
        p = parse_explain(out)
        assert abs(p.raw_sum - (p.logit - p.bias)) < 2e-4
        # the raw CSV holds the full-precision map behind the rounded print
        dest = pipeline.out / "explain" / f"{os.path.basename(img)[:-4]}_hirescam"
        with open(dest / "cam_raw.csv", newline="") as f:
            raw = np.array([[float(v) for v in row] for row in csv.reader(f)])
        # the map lives at the conv2 activation, before its 2x2 pool
        assert raw.shape == (8, 8)
        assert abs(raw.sum() - p.raw_sum) < 1e-5
        assert abs(raw.sum() - (p.logit - p.bias)) < 2e-4

    def test_named_class_and_gradcam(self, pipeline, capsys):
        manifest = datamod.read_manifest(pipeline.out / "manifest.csv")
        img = manifest.paths("test")[0]
        code, out, _ = run(["explain", "-c", str(pipeline.cfg), img,
                            "--method", "gradcam", "--class", "green"], capsys)
        assert code == 0
        p = parse_explain(out)
        assert p.explained.group(1) == "green"
        assert p.explained.group(2) == str(FAMILIES.index("green"))
        assert "method=gradcam" in out
        dest = pipeline.out / "explain" / f"{os.path.basename(img)[:-4]}_gradcam"
        assert (dest / "overlay.png").is_file()

    def test_unknown_class_exits_1(self, pipeline, capsys):
        manifest = datamod.read_manifest(pipeline.out / "manifest.csv")
        img = manifest.paths("test")[0]
        code, _, err = run(["explain", "-c", str(pipeline.cfg), img,
                            "--class", "zebra"], capsys)
        assert code == 1
        assert "zebra" in err and "blue" in err

    def test_unknown_layer_exits_2(self, pipeline, capsys):
        manifest = datamod.read_manifest(pipeline.out / "manifest.csv")
        img = manifest.paths("test")[0]
        code, _, err = run(["explain", "-c", str(pipeline.cfg), img,
                            "--layer", "conv9"], capsys)
        assert code == 2
        assert "valid" in err

    def test_no_images_exits_1(self, pipeline, capsys):
        code, _, err = run(["explain", "-c", str(pipeline.cfg)], capsys)
        assert code == 1
        assert "no images" in err


class TestFeatmapsCommand:
    def test_default_last_layer(self, pipeline, capsys):
        from PIL import Image

        manifest = datamod.read_manifest(pipeline.out / "manifest.csv")
        img = manifest.paths("val")[0]
        code, out, _ = run(["featmaps", img, "-c", str(pipeline.cfg)], capsys)
        assert code == 0
        assert "layer=conv2 channels=8 grid=3x3" in out
        png = pipeline.out / "featuregrid_conv2.png"
        assert png.is_file()
        with Image.open(png) as im:
            assert im.mode == "L"

    def test_layer_flag(self, pipeline, capsys):
        manifest = datamod.read_manifest(pipeline.out / "manifest.csv")
        img = manifest.paths("val")[0]
        code, out, _ = run(["featmaps", img, "-c", str(pipeline.cfg),
                            "--layer", "conv1"], capsys)
        assert code == 0
        assert "layer=conv1 channels=4 grid=2x2" in out
        assert (pipeline.out / "featuregrid_conv1.png").is_file()
