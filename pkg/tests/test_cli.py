import json

import numpy as np
import pytest

from bridgesynth.cli import main
from bridgesynth.cloud import LabeledPointCloud
from bridgesynth.dataset_io import read_cloud_txt, read_manifest, write_cloud_txt


def run(argv, capsys):
    try:
        code = main([str(a) for a in argv])
    except SystemExit as exc:
        code = exc.code
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def cloud_file(tmp_path):
    rng = np.random.default_rng(0)
    pts = np.concatenate([rng.random((300, 3)), rng.random((200, 3)) + [6, 0, 0]])
    cloud = LabeledPointCloud.from_labels(pts, [2] * 300 + [4] * 200, [1] * 300 + [5] * 200)
    path = tmp_path / "in.txt"
    write_cloud_txt(cloud, path)
    return path


def test_generate_smoke(tmp_path, capsys):
    out = tmp_path / "d"
    code, stdout, _ = run(["generate", "--count", 2, "--modes", "pslp", "--fast", "--out", out,
                           "--resolution", 6], capsys)
    assert code == 0
    assert stdout.strip().endswith("manifest.json")
    assert len(list(out.rglob("*.txt"))) == 2
    assert len(read_manifest(out / "manifest.json").entries) == 2


def test_generate_records_sparsity(tmp_path, capsys):
    out = tmp_path / "d"
    code, _, _ = run(["generate", "--count", 1, "--modes", "msp", "--density", 1,
                      "--occlusion-sparsity", 0.6, "--out", out], capsys)
    assert code == 0
    man = read_manifest(out / "manifest.json")
    assert [e.sparsity for e in man.entries] == [0.0, 0.6]
    assert man.config["sparsity"] == 0.6 and man.config["occlusion"] is True


def test_generate_split_and_presets(tmp_path, capsys):
    out = tmp_path / "d"
    code, _, _ = run(["generate", "--count", 4, "--modes", "msp", "--density", 1, "--split", "3/1",
                      "--voxel-size", "model", "--color", "height", "--out", out], capsys)
    assert code == 0
    man = read_manifest(out / "manifest.json")
    assert [e.split for e in man.entries] == ["train"] * 3 + ["val"]
    assert man.entries[0].voxel_size == 0.2 and man.entries[0].color_scheme == "height_gradient"


def test_missing_out_is_usage_error(capsys):
    code, _, err = run(["generate", "--count", 1], capsys)
    assert code == 1
    assert "usage:" in err and "--out" in err


@pytest.mark.parametrize("argv", [
    ["baseline", "x.txt", "--out", "p.json", "--bogus"],
    ["generate", "--out", "d", "--modes", "lidar"],
    ["generate", "--out", "d", "--occlusion-sparsity", "1.5"],
    ["voxelize", "a.txt"],
    ["frobnicate"],
    [],
])
def test_usage_errors_exit_one(argv, capsys):
    assert run(argv, capsys)[0] == 1


def test_malformed_input_exits_two_naming_line(tmp_path, capsys):
    bad = tmp_path / "bad.txt"
    bad.write_text("0 0 0 255 255 255 1 1\n0 0 0 255 255 255 1 1\n1 2 3 4 5 6 7\n")
    code, _, err = run(["transform", "voxelize", bad, tmp_path / "o.txt"], capsys)
    assert code == 2
    assert "bad.txt:3:" in err


def test_missing_input_exits_two(tmp_path, capsys):
    assert run(["occlude", tmp_path / "none.txt", tmp_path / "o.txt"], capsys)[0] == 2


def test_occlude_sparsity_zero_is_identity(cloud_file, tmp_path, capsys):
    out = tmp_path / "o.txt"
    code, stdout, _ = run(["transform", "occlude", cloud_file, out, "--sparsity", 0], capsys)
    assert code == 0 and "500 -> 500" in stdout
    assert out.read_bytes() == cloud_file.read_bytes()


def test_occlude_is_reproducible(cloud_file, tmp_path, capsys):
    a, b = tmp_path / "a.txt", tmp_path / "b.txt"
    for path in (a, b):
        run(["occlude", cloud_file, path, "--sparsity", 0.8, "--count", 4, "--seed", 3], capsys)
    assert a.read_bytes() == b.read_bytes()
    assert len(read_cloud_txt(a)) <= 500


def test_voxelize_does_not_add_points(cloud_file, tmp_path, capsys):
    out = tmp_path / "v.txt"
    code, stdout, _ = run(["voxelize", cloud_file, out, "--size", 0.2], capsys)
    assert code == 0
    assert len(read_cloud_txt(out)) <= 500
    assert "500 ->" in stdout


def test_colorize_augment_crop(cloud_file, tmp_path, capsys):
    assert run(["colorize", cloud_file, tmp_path / "c.txt", "--scheme", "random"], capsys)[0] == 0
    assert run(["augment", cloud_file, tmp_path / "a.txt", "--seed", 2], capsys)[0] == 0
    aug = read_cloud_txt(tmp_path / "a.txt")
    np.testing.assert_array_equal(aug.label_pairs(), read_cloud_txt(cloud_file).label_pairs())
    code, stdout, _ = run(["crop", cloud_file, tmp_path / "blocks", "--block", 2, 2, 2], capsys)
    assert code == 0
    blocks = sorted((tmp_path / "blocks").glob("block_*.txt"))
    assert len(blocks) == 2
    assert sum(len(read_cloud_txt(b)) for b in blocks) == 500


def test_eval_identical_files(cloud_file, capsys):
    code, stdout, _ = run(["eval", "--gt", cloud_file, "--pred", cloud_file, "--name", "self"],
                          capsys)
    assert code == 0
    row = next(l for l in stdout.splitlines() if l.startswith("self"))
    assert row.split()[1:] == ["1.000", "1.000", "1.000"]
    report = json.loads(stdout[stdout.index("{"):])
    assert report["mAP"] == 1.0


def test_eval_disjoint_labels(cloud_file, tmp_path, capsys):
    gt = read_cloud_txt(cloud_file)
    wrong = LabeledPointCloud(gt.positions, gt.colors, (gt.semantic + 1) % 5, gt.instance)
    path = tmp_path / "wrong.txt"
    write_cloud_txt(wrong, path)
    code, stdout, _ = run(["eval", "--gt", cloud_file, "--pred", path, "--name", "wrong",
                           "--json", tmp_path / "r.json"], capsys)
    assert code == 0
    row = next(l for l in stdout.splitlines() if l.startswith("wrong"))
    assert row.split()[1:] == ["0.000", "0.000", "0.000"]
    assert json.loads((tmp_path / "r.json").read_text())["mAP25"] == 0.0


def test_eval_json_scenario(tmp_path, capsys):
    pts = np.zeros((20, 3))
    gt = LabeledPointCloud.from_labels(pts, [2] * 20, [0] * 10 + [1] * 10)
    write_cloud_txt(gt, tmp_path / "gt.txt")
    pred = {"instances": [{"indices": list(range(10)), "class": 2, "confidence": 0.9},
                          {"indices": [10, 11, 12], "class": 2, "confidence": 0.8}]}
    (tmp_path / "p.json").write_text(json.dumps(pred))
    code, stdout, _ = run(["eval", "--gt", tmp_path / "gt.txt", "--pred", tmp_path / "p.json"],
                          capsys)
    assert code == 0
    report = json.loads(stdout[stdout.index("{"):])
    assert report["mAP50"] == pytest.approx(0.5) and report["mAP25"] == pytest.approx(1.0)


def test_eval_rejects_mismatched_point_count(cloud_file, tmp_path, capsys):
    short = tmp_path / "short.txt"
    short.write_text("".join(cloud_file.read_text().splitlines(keepends=True)[:10]))
    assert run(["eval", "--gt", cloud_file, "--pred", short], capsys)[0] == 2


def test_baseline_prints_counts(cloud_file, tmp_path, capsys):
    code, stdout, _ = run(["baseline", cloud_file, "--out", tmp_path / "p.json"], capsys)
    assert code == 0
    assert stdout.splitlines() == ["slab: 0", "barrier: 0", "girder: 1", "pier_cap: 0", "pier: 1"]
    preds = json.loads((tmp_path / "p.json").read_text())["instances"]
    assert sorted(len(p["indices"]) for p in preds) == [200, 300]


def test_mesh_export(tmp_path, capsys):
    code, stdout, _ = run(["mesh", "--seed", 4, "--out", tmp_path / "b.obj"], capsys)
    assert code == 0 and (tmp_path / "b.obj").read_text().startswith("o slab_0")


@pytest.mark.parametrize("sub", [[], ["generate"], ["transform", "occlude"], ["voxelize"],
                                 ["eval"], ["baseline"], ["mesh"], ["crop"]])
def test_help_lists_defaults(sub, capsys):
    code, stdout, _ = run(sub + ["--help"], capsys)
    assert code == 0
    assert "usage:" in stdout
    if sub in (["generate"], ["baseline"], ["transform", "occlude"]):
        assert "default" in stdout


def test_every_optional_flag_documents_its_default():
    import argparse

    from bridgesynth.cli import build_parser

    missing = []

    def walk(parser, name):
        for action in parser._actions:
            if isinstance(action, argparse._SubParsersAction):
                for sub_name, sub in action.choices.items():
                    walk(sub, f"{name} {sub_name}")
            elif (action.option_strings and not action.required
                  and not isinstance(action, (argparse._HelpAction, argparse._VersionAction))):
                if "default" not in (action.help or ""):
                    missing.append((name, action.option_strings))

    walk(build_parser(), "bridgesynth")
    assert missing == []
