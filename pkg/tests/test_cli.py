"""The command line interface, driven in-process."""

import json

import numpy as np
import pytest

from radialseg import read_scene, rle_decode
from radialseg.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out


def make_scene(capsys, tmp_path, name="scene.txt", seed=0, background=80):
    path = tmp_path / name
    code, _ = run(
        capsys, "synth", "--out", str(path), "--seed", str(seed),
        "--instances", "3", "--points-per-instance", "30",
        "--background", str(background), "--extent", "6.0",
        "--min-separation", "3.5",
    )
    assert code == 0
    return path


def fit_scene_file(capsys, tmp_path, scene, name="props.json"):
    out = tmp_path / name
    code, stdout = run(
        capsys, "fit", "--scene", str(scene), "--out", str(out),
        "--iterations", "60", "--grid", "3x3",
    )
    assert code == 0
    assert "final loss" in stdout
    return out


def test_synth_writes_a_readable_scene(capsys, tmp_path):
    path = make_scene(capsys, tmp_path)
    cloud = read_scene(path)
    assert cloud.n_points == 3 * 30 + 80
    assert path.read_text().startswith("# scene v1 points=170 colors=0")


def test_synth_colors_flag(capsys, tmp_path):
    path = tmp_path / "colored.txt"
    code, _ = run(capsys, "synth", "--out", str(path), "--instances", "2",
                  "--points-per-instance", "10", "--background", "5",
                  "--min-separation", "3.0", "--colors")
    assert code == 0
    assert read_scene(path).colors is not None


def test_synth_is_byte_deterministic(capsys, tmp_path):
    a = make_scene(capsys, tmp_path, "a.txt", seed=4)
    b = make_scene(capsys, tmp_path, "b.txt", seed=4)
    assert a.read_bytes() == b.read_bytes()
    c = make_scene(capsys, tmp_path, "c.txt", seed=5)
    assert a.read_bytes() != c.read_bytes()


def test_fit_emits_valid_proposals(capsys, tmp_path):
    scene = make_scene(capsys, tmp_path)
    out = fit_scene_file(capsys, tmp_path, scene)
    doc = json.loads(out.read_text())
    assert doc["format"] == "proposals v1"
    assert doc["n_points"] == 170
    assert doc["grid"] == [3, 3]
    assert len(doc["proposals"]) >= 1
    for item in doc["proposals"]:
        assert len(item["center"]) == 3
        assert len(item["rays"]) == 9
        mask = rle_decode(item["mask_rle"])
        assert len(mask) == 170
        assert 0.0 <= item["confidence"] <= 1.0


def test_fit_is_byte_deterministic(capsys, tmp_path):
    scene = make_scene(capsys, tmp_path)
    a = fit_scene_file(capsys, tmp_path, scene, "a.json")
    b = fit_scene_file(capsys, tmp_path, scene, "b.json")
    assert a.read_bytes() == b.read_bytes()


def test_fit_rejects_unlabeled_scene(capsys, tmp_path):
    scene = tmp_path / "empty.txt"
    scene.write_text(
        "# scene v1 points=2 colors=0\n"
        "0.0 0.0 0.0 -1 -1\n"
        "1.0 1.0 1.0 -1 -1\n"
    )
    code = main(["fit", "--scene", str(scene), "--out", str(tmp_path / "x.json")])
    capsys.readouterr()
    assert code == 2


def test_eval_scores_fitted_proposals(capsys, tmp_path):
    scene = make_scene(capsys, tmp_path)
    props = fit_scene_file(capsys, tmp_path, scene)
    out = tmp_path / "eval.csv"
    code, stdout = run(capsys, "eval", "--scene", str(scene),
                       "--proposals", str(props), "--out", str(out))
    assert code == 0
    assert stdout.startswith("ap=")
    rows = out.read_text().splitlines()
    assert rows[0] == "class_id,n_gt,ap,ap50,ap25,precision50,recall50"
    assert rows[-1].startswith("all,3,")


def test_eval_rejects_mismatched_proposals(capsys, tmp_path):
    scene = make_scene(capsys, tmp_path)
    other = make_scene(capsys, tmp_path, "other.txt", background=10)
    props = fit_scene_file(capsys, tmp_path, other, "other.json")
    with pytest.raises(ValueError, match="points"):
        main(["eval", "--scene", str(scene), "--proposals", str(props),
              "--out", str(tmp_path / "x.csv")])
    capsys.readouterr()
    bogus = tmp_path / "bogus.json"
    bogus.write_text(json.dumps({"format": "something else"}))
    with pytest.raises(ValueError, match="proposals v1"):
        main(["eval", "--scene", str(scene), "--proposals", str(bogus),
              "--out", str(tmp_path / "x.csv")])
    capsys.readouterr()


def test_bench_tightness_table(capsys, tmp_path):
    scene = make_scene(capsys, tmp_path)
    out = tmp_path / "tight.csv"
    code, stdout = run(capsys, "bench-tightness", "--scene", str(scene),
                       "--out", str(out))
    assert code == 0
    assert "polygon coverage" in stdout
    rows = [r.split(",") for r in out.read_text().splitlines()]
    header = "instance_id,n_points,polygon_covered,box_covered,polygon_extra,box_extra"
    assert rows[0] == header.split(",")
    assert len(rows) == 1 + 3 + 1  # header, one per instance, totals
    body = np.array([[int(v) for v in r[1:]] for r in rows[1:-1]])
    total = np.array([int(v) for v in rows[-1][1:]])
    assert np.array_equal(body.sum(axis=0), total)


def test_gradcheck_passes(capsys, tmp_path):
    code, stdout = run(capsys, "gradcheck", "--seed", "1", "--grid", "4x4")
    assert code == 0
    assert "PASS" in stdout
    lines = stdout.strip().splitlines()
    assert lines[-1].startswith("total: max abs err")


def test_ablate_orders_variants(capsys, tmp_path):
    out = tmp_path / "ablation.csv"
    code, stdout = run(
        capsys, "ablate", "--out", str(out), "--seeds", "0,1",
        "--iterations", "40", "--background", "200",
    )
    assert code == 0
    assert "mean iou ordering:" in stdout
    rows = out.read_text().splitlines()
    assert rows[0] == "variant,seed,iou"
    # Three variants, each with two seed rows and one mean row.
    assert len(rows) == 1 + 3 * 3
    for variant in ("rid_only", "mc_only", "full"):
        assert any(r.startswith(f"{variant},mean,") for r in rows)


def test_cli_requires_a_command(capsys):
    with pytest.raises(SystemExit):
        main([])
    capsys.readouterr()
