# -*- coding: utf-8 -*-

import json
import logging
import os
import struct

import numpy as np
import pytest

from nulitenet.cli import main
from nulitenet.data.ingest import write_ppm

DESCRIBE_A50 = """\
nu-lite-a: 50 classes, input 3x224x224
layer | config | output size | params
Input | 3 channels | 224x224 | 0
Convolution 1 | 5x5,64,s2,p3 | 113x113 | 4928
Pooling 1 | max pool,3x3,s2 | 56x56 | 0
Convolution 2 | 1x1,64,s1 | 56x56 | 4224
Convolution 3 | 3x3,64,s1,p1 | 56x56 | 36992
Pooling 2 | max pool,3x3,s2 | 28x28 | 0
NU-Lite-Block 1 | [Block-A],128 | 28x28 | 44320
Pooling 3 | max pool,3x3,s2 | 14x14 | 0
NU-Lite-Block 2 | [Block-A],256 | 14x14 | 176704
Pooling 4 | average pool | 1x1 | 0
Fully connected | 256->50,softmax | 50 | 12850
Total params: 280018 (0.28M)
"""


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_describe_golden(capsys):
    code, out, _ = run(capsys, "describe", "--arch", "nu-lite-a", "--classes", "50")
    assert code == 0
    assert out == DESCRIBE_A50


def test_describe_verbose(capsys):
    code, out, _ = run(capsys, "describe", "--arch", "nu-lite-b", "--classes", "12", "--verbose")
    assert code == 0
    assert "Total params: 931020 (0.93M)" in out
    assert "block2/expand7x7 | conv | 7x7,64,s1,p3 | 64x14x14 |" in out


def test_unknown_arch(capsys):
    code, out, err = run(capsys, "describe", "--arch", "foo", "--classes", "50")
    assert code == 1
    assert out == ""
    assert "nu-lite-a" in err and "squeezenet" in err


def test_missing_command(capsys):
    code, out, _ = run(capsys)
    assert code == 1 and out == ""


def test_count_params_csv(capsys):
    code, out, _ = run(capsys, "count-params", "--arch", "squeezenet", "--classes", "50", "--csv")
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == "id,kind,channels,height,width,params,macs"
    assert int(lines[-1].split(",")[5]) == 751090


def test_compare(capsys):
    code, out, _ = run(capsys, "compare", "--classes", "50")
    assert code == 0
    rows = {line.split(" | ")[0]: line for line in out.splitlines()[1:]}
    assert set(rows) == {"nu-lite-a", "nu-lite-b", "squeezenet", "squeezenet-1.0"}
    assert "280018 (0.28M)" in rows["nu-lite-a"]
    assert rows["nu-lite-a"].endswith("| 1.07")


@pytest.fixture
def workspace(tmp_path, capsys):
    """两类各2张的合成集, 以及在其上训练1个epoch的模型"""
    data = str(tmp_path / "toy.nuld")
    assert main(["make-synth", "--classes", "2", "--per-class", "2", "--seed", "3", "--out", data]) == 0
    out_dir = str(tmp_path / "run")
    assert main(["train", "--data", data, "--arch", "nu-lite-a", "--epochs", "1", "--batch", "4",
                 "--out", out_dir, "--no-augment"]) == 0
    capsys.readouterr()
    return tmp_path, data, os.path.join(out_dir, "model.nult")


def test_train_outputs(workspace, capsys):
    tmp_path, _, model = workspace
    assert os.path.exists(model)
    with open(os.path.join(str(tmp_path / "run"), "epochs.csv")) as f:
        lines = f.read().splitlines()
    assert lines[0] == "epoch,lr,train_loss,val_top1,val_top5" and len(lines) == 2


def test_train_echoes_config(tmp_path, capsys):
    data = str(tmp_path / "toy.nuld")
    main(["make-synth", "--classes", "2", "--per-class", "2", "--seed", "1", "--out", data])
    capsys.readouterr()
    code, out, _ = run(capsys, "train", "--data", data, "--arch", "nu-lite-a", "--epochs", "1",
                       "--batch", "4", "--out", str(tmp_path / "r"))
    assert code == 0
    assert out.splitlines()[0] == "lr=0.1 momentum=0.9 batch=4 wd=0.0005 epochs=1"
    assert out.splitlines()[-1].startswith("final top1=")


def test_train_folds(tmp_path, capsys):
    data = str(tmp_path / "toy.nuld")
    main(["make-synth", "--classes", "2", "--per-class", "2", "--seed", "1", "--out", data])
    capsys.readouterr()
    out_dir = tmp_path / "folds"
    code, out, _ = run(capsys, "train", "--data", data, "--arch", "nu-lite-a", "--folds", "2", "--epochs", "1",
                       "--batch", "4", "--workers", "2", "--out", str(out_dir))
    assert code == 0
    assert sorted(os.listdir(str(out_dir))) == ["fold-01.csv", "fold-01.nult", "fold-02.csv", "fold-02.nult"]
    assert out.splitlines()[-1].startswith("mean over 2 folds: top1=")


def test_train_missing_data(tmp_path, capsys):
    code, out, err = run(capsys, "train", "--data", str(tmp_path / "none.nuld"), "--arch", "nu-lite-a",
                         "--out", str(tmp_path / "r"))
    assert code == 2 and out == ""


def test_eval(workspace, capsys):
    _, data, model = workspace
    code, out, _ = run(capsys, "eval", "--model", model, "--data", data)
    assert code == 0
    assert out.startswith("samples=4 top1=")


def test_eval_class_mismatch(workspace, capsys):
    tmp_path, _, model = workspace
    other = str(tmp_path / "three.nuld")
    main(["make-synth", "--classes", "3", "--per-class", "1", "--seed", "0", "--out", other])
    capsys.readouterr()
    code, out, err = run(capsys, "eval", "--model", model, "--data", other)
    assert code == 2 and out == ""
    assert "3" in err and "2" in err


def test_bench(workspace, capsys):
    _, _, model = workspace
    code, out, _ = run(capsys, "bench", "--model", model, "--repeat", "2", "--input", "96x64")
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == "nu-lite-a input=96x64 repeat=2"
    assert lines[1].startswith("min_ms=") and lines[2].startswith("macs=")


def test_bench_repeat_zero(workspace, capsys):
    _, _, model = workspace
    code, out, _ = run(capsys, "bench", "--model", model, "--repeat", "0")
    assert code == 1 and out == ""


def test_classify_clamps_topk(workspace, capsys, caplog):
    _, data, model = workspace
    with caplog.at_level(logging.WARNING, logger="nulitenet"):
        code, out, _ = run(capsys, "classify", "--model", model, "--image", data, "--index", "2", "--topk", "5")
    assert code == 0
    lines = out.splitlines()
    assert len(lines) == 2
    assert {line.split()[1] for line in lines} == {"class_00", "class_01"}
    assert "clamping" in caplog.text


def test_classify_bad_index(workspace, capsys):
    _, data, model = workspace
    code, _, _ = run(capsys, "classify", "--model", model, "--image", data, "--index", "9")
    assert code == 2


def test_inspect(workspace, capsys):
    _, _, model = workspace
    code, out, _ = run(capsys, "inspect", "--model", model, "--json-meta")
    assert code == 0
    meta = json.loads(out)
    assert meta["arch_id"] == "nu-lite-a" and meta["num_classes"] == 2
    code, out, _ = run(capsys, "inspect", "--model", model)
    assert "conv1.weight 64x3x5x5" in out


def test_inspect_bad_file(tmp_path, capsys):
    path = str(tmp_path / "junk.nult")
    with open(path, "wb") as f:
        f.write(b"JUNKJUNK")
    code, out, err = run(capsys, "inspect", "--model", path)
    assert code == 2 and "bad magic" in err


def test_inspect_oversized_dims(tmp_path, capsys):
    path = str(tmp_path / "huge.nult")
    with open(path, "wb") as f:
        f.write(b"NULT" + struct.pack("<IH", 1, 9) + b"nu-lite-a" + struct.pack("<II", 2, 1)
                + struct.pack("<H", 1) + b"w" + struct.pack("<B4I", 4, *([2 ** 32 - 1] * 4)))
    code, out, err = run(capsys, "inspect", "--model", path)
    assert code == 2 and out == ""
    assert "truncated" in err


def test_train_class_name_not_utf8(tmp_path, capsys):
    data = str(tmp_path / "toy.nuld")
    main(["make-synth", "--classes", "2", "--per-class", "2", "--seed", "1", "--out", data])
    with open(data, "r+b") as f:
        f.seek(16 + 2)
        f.write(b"\xff\xfe")
    capsys.readouterr()
    code, out, err = run(capsys, "train", "--data", data, "--arch", "nu-lite-a", "--epochs", "1",
                         "--out", str(tmp_path / "r"))
    assert code == 2 and out == ""
    assert "UTF-8" in err


def test_train_is_reproducible(tmp_path, capsys):
    data = str(tmp_path / "toy.nuld")
    main(["make-synth", "--classes", "2", "--per-class", "2", "--seed", "4", "--out", data])
    runs = []
    for name in ("first", "second"):
        out_dir = str(tmp_path / name)
        assert main(["train", "--data", data, "--arch", "nu-lite-a", "--epochs", "2", "--batch", "2",
                     "--seed", "5", "--out", out_dir]) == 0
        files = {}
        for filename in ("model.nult", "epochs.csv"):
            with open(os.path.join(out_dir, filename), "rb") as f:
                files[filename] = f.read()
        runs.append(files)
    capsys.readouterr()
    assert runs[0] == runs[1]


def test_eval_skip_bad(workspace, capsys):
    tmp_path, _, model = workspace
    root = tmp_path / "images"
    for name in ("a", "b"):
        os.makedirs(str(root / name))
        for i in range(2):
            write_ppm(str(root / name / ("img%d.ppm" % i)), np.full((32, 48, 3), 40 * i, dtype=np.uint8))
    with open(str(root / "a" / "broken.ppm"), "wb") as f:
        f.write(b"junk")
    code, out, err = run(capsys, "eval", "--model", model, "--data", str(root))
    assert code == 2 and "broken.ppm" in err
    code, out, _ = run(capsys, "eval", "--model", model, "--data", str(root), "--skip-bad")
    assert code == 0
    assert out.startswith("samples=4 top1=")
