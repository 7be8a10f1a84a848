import json

import numpy as np
import pytest
from click.testing import CliRunner

from smokeforge.asset import save_asset
from smokeforge.cli import main
from smokeforge.grids import load_grids
from smokeforge import imgio
from conftest import build_asset


@pytest.fixture
def runner():
    return CliRunner()


@pytest.fixture
def asset_file(tmp_path):
    path = tmp_path / "a.wsa"
    save_asset(build_asset(n_vis=15, n_phy=10, seed=21), path)
    return path


def run_ok(runner, args):
    result = runner.invoke(main, args, catch_exceptions=False)
    assert result.exit_code == 0, result.output
    return result


def test_asset_validate(runner, asset_file):
    result = run_ok(runner, ["asset", "validate", str(asset_file)])
    info = json.loads(result.output)
    assert info["ok"] and info["frames"] == 1


def test_asset_validate_rejects_garbage(runner, tmp_path):
    bad = tmp_path / "bad.wsa"
    bad.write_bytes(b"not an asset\n")
    result = runner.invoke(main, ["asset", "validate", str(bad)])
    assert result.exit_code != 0


def test_asset_downsample(runner, tmp_path):
    rng = np.random.default_rng(0)
    src = tmp_path / "pts.npy"
    np.save(src, rng.uniform(0, 10, (500, 3)))
    dst = tmp_path / "down.npy"
    result = run_ok(runner, ["asset", "downsample", "--cell", "2.0",
                             str(src), str(dst)])
    info = json.loads(result.output)
    assert info["out"] < info["in"]
    assert np.load(dst).shape[0] == info["out"]


def test_splat_writes_grid_dump(runner, asset_file, tmp_path):
    out = tmp_path / "grids.wsg"
    run_ok(runner, ["splat", "--asset", str(asset_file), "--frame", "1",
                    "--res", "16", "--out", str(out)])
    fields = load_grids(out)
    assert fields["density"].resolution == (16, 16, 16)
    assert fields["velocity"].resolution == (16, 16, 16)
    assert fields["density"].values.sum() > 0


def test_simulate_writes_dumps_and_slices(runner, asset_file, tmp_path):
    out = tmp_path / "sim"
    result = run_ok(runner, ["simulate", "--asset", str(asset_file),
                             "--steps", "3", "--scenario", "wind-global",
                             "--res", "12", "--dt", "0.2", "--save-every", "1",
                             "--out", str(out)])
    info = json.loads(result.output.splitlines()[-1])
    assert info["steps"] == 3
    dumps = sorted(out.glob("*.wsg"))
    assert len(dumps) == 4  # initial + 3 steps
    assert (out / "step_00003.png").exists()


def test_haze_composite_extract_roundtrip(runner, tmp_path):
    rng = np.random.default_rng(1)
    bg = tmp_path / "bg.npy"
    smoke = tmp_path / "smoke.npy"
    imgio.save_image(bg, rng.uniform(0, 0.5, (24, 24)))
    imgio.save_image(smoke, rng.uniform(0, 1, (24, 24)))
    hazy = tmp_path / "hazy.npy"
    run_ok(runner, ["haze", "composite", "--background", str(bg),
                    "--smoke", str(smoke), "-a", "0.8", "--out", str(hazy)])
    out = tmp_path / "recovered.npy"
    report = tmp_path / "report.json"
    result = run_ok(runner, ["haze", "extract", "--frame", str(hazy),
                             "--background", str(bg), "-a", "0.8",
                             "--out", str(out), "--report", str(report)])
    info = json.loads(result.output)
    assert info["floor_pixels"] == 0
    rec = imgio.load_image(out)
    truth = imgio.load_image(smoke)
    # .npy path keeps f32 precision end to end
    assert np.abs(rec - truth).max() < 1e-5
    assert json.loads(report.read_text())["total_pixels"] == 24 * 24


def test_haze_darkchannel(runner, tmp_path):
    frame = tmp_path / "f.npy"
    imgio.save_image(frame, np.full((32, 32), 0.42))
    result = run_ok(runner, ["haze", "darkchannel", "--in", str(frame)])
    assert abs(json.loads(result.output)["atmospheric"] - 0.42) < 1e-6


def test_pose_commands(runner, tmp_path):
    poses = tmp_path / "poses.json"
    result = run_ok(runner, ["pose", "trajectory", "--frames", "10",
                             "--out", str(poses)])
    assert json.loads(result.output)["poses"] == 11

    result = run_ok(runner, ["pose", "angle", "--in", str(poses),
                             "--a", "0", "--b", "10"])
    angle = json.loads(result.output)
    assert abs(angle["degrees"] - 60.0) < 1e-9  # full -105 -> -45 sweep

    conv = tmp_path / "conv.json"
    run_ok(runner, ["pose", "convert", "--in", str(poses), "--out", str(conv)])
    back = tmp_path / "back.json"
    run_ok(runner, ["pose", "convert", "--in", str(conv), "--out", str(back)])

    offs = tmp_path / "offs.json"
    result = run_ok(runner, ["pose", "offset", "--in", str(poses),
                             "--multiview", "--out", str(offs)])
    assert json.loads(result.output)["poses"] == 4


def test_render_and_metrics(runner, asset_file, tmp_path):
    img1 = tmp_path / "r1.png"
    img2 = tmp_path / "r2.png"
    for img in (img1, img2):
        run_ok(runner, ["render", "--asset", str(asset_file), "--res", "16",
                        "--width", "48", "--height", "48", "--samples", "32",
                        "--out", str(img)])
    assert img1.read_bytes() == img2.read_bytes()  # deterministic

    result = run_ok(runner, ["metrics", "psnr", str(img1), str(img2)])
    info = json.loads(result.output)
    assert info["infinite_frames"] == 1
    result = run_ok(runner, ["metrics", "ssim", str(img1), str(img2)])
    assert json.loads(result.output)["value"] == 1.0


def test_replay_cli(runner, asset_file, tmp_path):
    from smokeforge.asset import load_asset
    from smokeforge.service import Session
    from smokeforge.solver import SimConfig

    log = tmp_path / "run.jsonl"
    session = Session(load_asset(asset_file), SimConfig(dt=0.25, resolution=(12, 12, 12)),
                      log_path=log, asset_path=str(asset_file))
    session.handle_message({"seq": 1, "cmd": "set_buoyancy", "params": {"value": 0.01}})
    session.handle_message({"seq": 2, "cmd": "step", "params": {"n": 2}})
    session.close()

    out = tmp_path / "final.wsg"
    result = run_ok(runner, ["replay", str(log), "--out", str(out)])
    info = json.loads(result.output)
    assert info["step_index"] == 2
    fields = load_grids(out)
    expected = np.ascontiguousarray(session.state.density.values,
                                    dtype="<f4").astype(np.float64)
    assert np.array_equal(fields["density"].values, expected)
