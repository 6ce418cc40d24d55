import json

import numpy as np
import pytest

from aquasweep import cli, imageio, scenes
from aquasweep.camgeo import CameraIntrinsics, RigidPose


@pytest.fixture(scope="module")
def small_scene(tmp_path_factory):
    root = tmp_path_factory.mktemp("scene")
    K = CameraIntrinsics(30.0, 30.0, 15.5, 11.5, 32, 24)
    poses = [RigidPose.translation(-0.3), RigidPose.identity(), RigidPose.translation(0.3)]
    spec = scenes.SceneSpec(K, poses, [scenes.Layer(4.0, (8, 6, 24, 18), 1)], 12.0, 2, target=1)
    (root / "scene.json").write_text(json.dumps(spec.to_json()))
    assert cli.main(["render", str(root / "scene.json"), str(root / "out")]) == 0
    return root


def _frames(root):
    return [str(root / "out" / f"frame_{i:02d}.ppm") for i in range(3)]


def test_render_outputs(small_scene):
    out = small_scene / "out"
    for i in range(3):
        assert imageio.read_ppm(out / f"frame_{i:02d}.ppm").shape == (24, 32, 3)
        assert imageio.read_pfm(out / f"depth_{i:02d}.pfm").shape == (24, 32)
        assert set(np.unique(imageio.read_pgm(out / f"moving_{i:02d}.pgm"))) == {1.0}
    rig = json.loads((out / "poses.json").read_text())
    assert rig["target"] == 1 and len(rig["poses"]) == 3


def test_fit_synthesize_pipeline(small_scene, tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"quantization": {"levels": 5}, "steps": 3}))
    poses = str(small_scene / "out" / "poses.json")
    assert cli.main(["fit", *_frames(small_scene), "--poses", poses, "--config", str(cfg),
                     "--out", str(tmp_path / "fit")]) == 0
    fit = tmp_path / "fit"
    assert imageio.read_pfm(fit / "logits.pfm").shape == (5 * 24, 32)
    lines = (fit / "loss.csv").read_text().splitlines()
    assert lines[0] == "step,loss" and len(lines) == 5
    np.testing.assert_allclose(imageio.read_pfm(fit / "depth.pfm") * imageio.read_pfm(fit / "disparity.pfm"), 1.0,
                               rtol=1e-6)
    assert cli.main(["synthesize", _frames(small_scene)[1], "--logits", str(fit / "logits.pfm"),
                     "--beta", str(fit / "beta.pfm"), "--poses", poses, "--camera", "0",
                     "--config", str(fit / "config.json"), "--out", str(tmp_path / "syn")]) == 0
    assert imageio.read_ppm(tmp_path / "syn" / "synth.ppm").shape == (24, 32, 3)
    assert imageio.read_pgm(tmp_path / "syn" / "occlusion.pgm").shape == (24, 32)


def test_stage_two_requires_masks(small_scene, tmp_path):
    poses = str(small_scene / "out" / "poses.json")
    assert cli.main(["fit", *_frames(small_scene), "--poses", poses, "--stage", "2",
                     "--out", str(tmp_path)]) == cli.EXIT_USAGE


def test_stage_two_runs(small_scene, tmp_path):
    out = small_scene / "out"
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"quantization": {"levels": 3}, "steps": 2}))
    imageio.write_pfm(tmp_path / "boost.pfm", np.full((24, 32), 0.1))
    masks = [str(out / f"moving_{i:02d}.pgm") for i in range(3)]
    assert cli.main(["fit", *_frames(small_scene), "--poses", str(out / "poses.json"), "--config", str(cfg),
                     "--stage", "2", "--static-masks", *masks, "--boost", str(tmp_path / "boost.pfm"),
                     "--out", str(tmp_path / "fit")]) == 0


def test_metrics_identity(small_scene, capsys):
    depth = str(small_scene / "out" / "depth_01.pfm")
    assert cli.main(["metrics", depth, depth]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out == {"abs_rel": 0.0, "sq_rel": 0.0, "rmse": 0.0, "rmse_log": 0.0,
                   "delta1": 1.0, "delta2": 1.0, "delta3": 1.0}


def test_metrics_median_scale_and_mask(tmp_path, capsys):
    gt = np.array([[10.0, 20.0], [30.0, 40.0]])
    imageio.write_pfm(tmp_path / "gt.pfm", gt)
    imageio.write_pfm(tmp_path / "pred.pfm", 2 * gt)
    imageio.write_pgm(tmp_path / "m.pgm", np.array([[1.0, 1.0], [0.0, 1.0]]))
    assert cli.main(["metrics", str(tmp_path / "pred.pfm"), str(tmp_path / "gt.pfm"), "--median-scale",
                     "--mask", str(tmp_path / "m.pgm"), "--out", str(tmp_path / "m.json")]) == 0
    assert json.loads((tmp_path / "m.json").read_text())["abs_rel"] == pytest.approx(0.0, abs=1e-7)
    assert cli.main(["metrics", str(tmp_path / "pred.pfm"), str(tmp_path / "gt.pfm"), "--cap", "1000"]) == 0


def test_spimo_and_boost(tmp_path):
    base = np.full((4, 5), 10.0)
    moving = base.copy()
    moving[1, 2] = 20.0
    paths = []
    for i, arr in enumerate([base, base, base, moving]):
        paths.append(tmp_path / "vol" / f"d{i}.pfm")
        imageio.write_pfm(paths[-1], arr)
    assert cli.main(["spimo", str(tmp_path / "vol"), "--out", str(tmp_path / "mask.pgm")]) == 0
    mask = imageio.read_pgm(tmp_path / "mask.pgm")
    expected = np.ones((4, 5))
    expected[1, 2] = 0.0
    np.testing.assert_array_equal(mask, expected)
    d = np.linspace(0.05, 0.3, 20).reshape(4, 5)
    for name in "fra":
        imageio.write_pfm(tmp_path / f"{name}.pfm", d)
    assert cli.main(["boost", *(str(tmp_path / f"{n}.pfm") for n in "fra"), "--out", str(tmp_path / "b.pfm")]) == 0
    np.testing.assert_array_equal(imageio.read_pfm(tmp_path / "b.pfm"), imageio.read_pfm(tmp_path / "f.pfm"))


def test_gradcheck_small(capsys):
    assert cli.main(["gradcheck", "--size", "4x5", "--levels", "3"]) == 0
    assert "max relative error" in capsys.readouterr().out


def test_exit_codes(tmp_path, capsys):
    with pytest.raises(SystemExit) as exc:
        cli.main(["nonsense"])
    assert exc.value.code == cli.EXIT_USAGE
    with pytest.raises(SystemExit) as exc:
        cli.main(["gradcheck", "--size", "big"])
    assert exc.value.code == cli.EXIT_USAGE
    assert cli.main(["metrics", str(tmp_path / "missing.pfm"), str(tmp_path / "missing.pfm")]) == cli.EXIT_PARSE
    (tmp_path / "bad.pfm").write_bytes(b"garbage")
    assert cli.main(["metrics", str(tmp_path / "bad.pfm"), str(tmp_path / "bad.pfm")]) == cli.EXIT_PARSE
    (tmp_path / "bad.json").write_text("{")
    assert cli.main(["render", str(tmp_path / "bad.json"), str(tmp_path / "o")]) == cli.EXIT_PARSE
    zero = tmp_path / "z.pfm"
    imageio.write_pfm(zero, np.zeros((3, 3)))
    assert cli.main(["boost", str(zero), str(zero), str(zero), "--out", str(tmp_path / "o.pfm")]) == cli.EXIT_NUMERICAL
    assert cli.main(["spimo", str(zero), str(zero), "--out", str(tmp_path / "o.pgm")]) == cli.EXIT_NUMERICAL
    assert not (tmp_path / "o.pfm").exists()
