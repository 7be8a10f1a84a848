"""smokeforge command line."""

import json
import math
import os
import pathlib

import click
import numpy as np

from . import imgio
from .asset import (AssetError, load_asset, save_asset, voxel_downsample)
from .camera import (CameraPose, Intrinsics, TrajectorySpec, convert_convention,
                     load_poses, multiview_pose_set, offset_pose_about_pivot,
                     relative_rotation_angle, save_poses, synthetic_trajectory)
from .grids import load_grids, save_grids
from .haze import (composite_haze, dark_channel, estimate_atmospheric_light,
                   extract_clean_smoke, extract_coarse, smooth_mask)
from .metrics import psnr_sequence, ssim
from .render import RenderSettings, render_density
from .service import Session, replay_log
from .solver import (SimConfig, init_from_asset, scenario_config, step,
                     total_mass, SCENARIO_NAMES)


def _parse_vec(text, n, what):
    parts = [float(x) for x in str(text).split(",")]
    if len(parts) != n:
        raise click.BadParameter(f"{what} needs {n} comma-separated values")
    return parts


def _parse_res(text):
    parts = [int(x) for x in str(text).split(",")]
    if len(parts) == 1:
        parts = parts * 3
    if len(parts) != 3 or any(p < 1 for p in parts):
        raise click.BadParameter("resolution must be one or three positive integers")
    return tuple(parts)


@click.group()
def main():
    """Simulate, render and edit reconstructed smoke assets."""


# --------------------------------------------------------------------------
# asset


@main.group("asset")
def asset_group():
    """Inspect and transform smoke assets / point clouds."""


@asset_group.command("validate")
@click.argument("path", type=click.Path(exists=True, dir_okay=False))
def asset_validate(path):
    """Load PATH, check every invariant, print a summary."""
    try:
        a = load_asset(path)
    except AssetError as exc:
        raise click.ClickException(str(exc))
    click.echo(json.dumps({
        "ok": True, "frames": len(a.frames), "fps": a.fps,
        "visual_particles": [fr.n_visual for fr in a.frames],
        "physical_particles": [fr.n_physical for fr in a.frames],
    }))


def _load_points(path):
    if str(path).endswith(".npy"):
        return np.load(path).astype(np.float64).reshape(-1, 3)
    return np.loadtxt(path, dtype=np.float64).reshape(-1, 3)


def _save_points(path, pts):
    if str(path).endswith(".npy"):
        np.save(path, pts)
    else:
        np.savetxt(path, pts, fmt="%.9g")


@asset_group.command("downsample")
@click.option("--cell", type=float, required=True, help="voxel edge length")
@click.argument("src", type=click.Path(exists=True, dir_okay=False))
@click.argument("dst", type=click.Path(dir_okay=False))
def asset_downsample(cell, src, dst):
    """Voxel-downsample a point cloud (.npy or whitespace xyz text)."""
    pts = _load_points(src)
    out = voxel_downsample(pts, cell)
    _save_points(dst, out)
    click.echo(json.dumps({"in": pts.shape[0], "out": out.shape[0], "cell": cell}))


# --------------------------------------------------------------------------
# splat


@main.command("splat")
@click.option("--asset", "asset_path", required=True, type=click.Path(exists=True))
@click.option("--frame", default=1, show_default=True)
@click.option("--res", default="128,128,128", show_default=True)
@click.option("--padding", default=3.0, show_default=True,
              help="bbox padding in units of max particle scale")
@click.option("--out", "out_path", required=True, type=click.Path())
def splat_cmd(asset_path, frame, res, padding, out_path):
    """Splat one asset frame to density + velocity grids."""
    a = load_asset(asset_path)
    cfg = SimConfig(resolution=_parse_res(res), padding_sigmas=padding)
    state = init_from_asset(a, frame, cfg)
    save_grids(out_path, {"density": state.density, "velocity": state.velocity})
    click.echo(json.dumps({
        "out": str(out_path),
        "bbox_min": list(map(float, state.density.bbox_min)),
        "bbox_max": list(map(float, state.density.bbox_max)),
        "density_sum": float(state.density.values.sum()),
    }))


# --------------------------------------------------------------------------
# simulate


@main.command("simulate")
@click.option("--asset", "asset_path", required=True, type=click.Path(exists=True))
@click.option("--frame", default=1, show_default=True)
@click.option("--steps", default=100, show_default=True)
@click.option("--scenario", default="none", show_default=True,
              type=click.Choice(SCENARIO_NAMES))
@click.option("--res", default="96,96,96", show_default=True)
@click.option("--dt", default=1.0, show_default=True)
@click.option("--buoyancy", default=0.0, show_default=True)
@click.option("--wall-bc", default="open", type=click.Choice(["open", "closed"]),
              show_default=True)
@click.option("--save-every", default=10, show_default=True,
              help="write a grid dump every N steps (0 = final only)")
@click.option("--slices/--no-slices", default=True, show_default=True,
              help="also write mid-plane density slices as PNG")
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
def simulate_cmd(asset_path, frame, steps, scenario, res, dt, buoyancy,
                 wall_bc, save_every, slices, out_dir):
    """Run the solver on an asset frame under an interaction scenario.

    Scenario presets use grid-index units: global wind (0.005,0,0), the
    same wind inside a radius-30 sphere at the scene center, or a rigid
    radius-10 ball at (50, 70, z_center)."""
    a = load_asset(asset_path)
    base = SimConfig(dt=dt, buoyancy_coeff=buoyancy, resolution=_parse_res(res),
                     wall_bc=wall_bc)
    state = init_from_asset(a, frame, base)
    cfg = scenario_config(scenario, state.density.bbox_min,
                          state.density.bbox_max, base)
    out = pathlib.Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    def dump(s):
        tag = f"step_{s.step_index:05d}"
        save_grids(out / f"{tag}.wsg", {"density": s.density, "velocity": s.velocity})
        if slices:
            nz = s.density.resolution[2]
            sl = s.density.values[:, :, nz // 2]
            peak = sl.max()
            img = (sl / peak if peak > 0 else sl).T[::-1]
            imgio.save_image(out / f"{tag}.png", np.clip(img, 0.0, 1.0))

    dump(state)
    for _ in range(steps):
        state = step(state, cfg)
        if save_every and state.step_index % save_every == 0:
            dump(state)
    if not save_every or state.step_index % save_every != 0:
        dump(state)
    click.echo(json.dumps({
        "steps": state.step_index, "clock": state.clock,
        "total_mass": total_mass(state.density),
        "max_divergence": state.projection.residual if state.projection else 0.0,
        "out": str(out),
    }))


# --------------------------------------------------------------------------
# haze


@main.group("haze")
def haze_group():
    """Haze compositing, extraction and the dark channel prior."""


def _parse_atmospheric(text, frame):
    if text is None or text == "auto":
        return estimate_atmospheric_light(frame)
    vals = [float(x) for x in str(text).split(",")]
    return vals[0] if len(vals) == 1 else np.array(vals)


@haze_group.command("composite")
@click.option("--background", "bg_path", required=True, type=click.Path(exists=True))
@click.option("--smoke", "smoke_path", required=True, type=click.Path(exists=True))
@click.option("--atmospheric", "-a", default="0.8", show_default=True,
              help="scalar or r,g,b in [0,1]")
@click.option("--out", "out_path", required=True, type=click.Path())
def haze_composite(bg_path, smoke_path, atmospheric, out_path):
    """Blend smoke over a clean background: I = bg*(1-S) + A*S."""
    bg = imgio.load_image(bg_path)
    smoke = imgio.load_image(smoke_path)
    A = [float(x) for x in str(atmospheric).split(",")]
    A = A[0] if len(A) == 1 else np.array(A)
    imgio.save_image(out_path, composite_haze(bg, smoke, A))
    click.echo(json.dumps({"out": str(out_path)}))


@haze_group.command("extract")
@click.option("--frame", "frame_path", required=True, type=click.Path(exists=True))
@click.option("--background", "bg_path", required=True, type=click.Path(exists=True),
              help="recovered clean background")
@click.option("--atmospheric", "-a", default="auto", show_default=True)
@click.option("--mask", "mask_path", type=click.Path(exists=True),
              help="binary smoke mask; enables the smoothed-mask fallback")
@click.option("--sigma", default=2.0, show_default=True, help="mask smoothing sigma")
@click.option("--denom-floor", default=0.02, show_default=True)
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--report", "report_path", type=click.Path())
def haze_extract(frame_path, bg_path, atmospheric, mask_path, sigma,
                 denom_floor, out_path, report_path):
    """Recover clean foreground smoke: S = 1 - (I-A)/(bg-A)."""
    frame = imgio.load_image(frame_path)
    bg = imgio.load_image(bg_path)
    A = _parse_atmospheric(atmospheric, frame)
    fallback = None
    if mask_path:
        fallback = extract_coarse(smooth_mask(imgio.load_image(mask_path), sigma), frame)
    smoke, floor_mask = extract_clean_smoke(frame, bg, A, denom_floor, fallback)
    imgio.save_image(out_path, smoke)
    report = {"out": str(out_path),
              "atmospheric": A if np.isscalar(A) else [float(x) for x in A],
              "denom_floor": denom_floor,
              "floor_pixels": int(floor_mask.sum()),
              "total_pixels": int(floor_mask.size),
              "floor_fraction": float(floor_mask.mean())}
    if report_path:
        with open(report_path, "w", encoding="utf-8") as fh:
            json.dump(report, fh, indent=1)
    click.echo(json.dumps(report))


@haze_group.command("darkchannel")
@click.option("--in", "in_path", required=True, type=click.Path(exists=True))
@click.option("--patch", default=15, show_default=True)
@click.option("--out", "out_path", type=click.Path(), help="write the dark channel image")
def haze_darkchannel(in_path, patch, out_path):
    """Dark channel and the atmospheric light estimate."""
    frame = imgio.load_image(in_path)
    dc = dark_channel(frame, patch)
    if out_path:
        imgio.save_image(out_path, dc)
    A = estimate_atmospheric_light(frame, patch)
    click.echo(json.dumps({
        "atmospheric": A if np.isscalar(A) else [float(x) for x in A],
        "out": str(out_path) if out_path else None}))


# --------------------------------------------------------------------------
# pose


@main.group("pose")
def pose_group():
    """Camera pose conversion, metrics and trajectory generation."""


@pose_group.command("convert")
@click.option("--in", "in_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
def pose_convert(in_path, out_path):
    """Flip every pose between source and splat conventions."""
    poses = [convert_convention(p) for p in load_poses(in_path)]
    save_poses(out_path, poses)
    click.echo(json.dumps({"poses": len(poses), "out": str(out_path)}))


@pose_group.command("angle")
@click.option("--in", "in_path", required=True, type=click.Path(exists=True))
@click.option("--a", "ia", default=0, show_default=True)
@click.option("--b", "ib", default=1, show_default=True)
def pose_angle(in_path, ia, ib):
    """Relative rotation angle between two poses in the file."""
    poses = load_poses(in_path)
    ang = relative_rotation_angle(poses[ia], poses[ib])
    click.echo(json.dumps({"radians": ang, "degrees": math.degrees(ang)}))


@pose_group.command("offset")
@click.option("--in", "in_path", required=True, type=click.Path(exists=True))
@click.option("--index", default=0, show_default=True)
@click.option("--yaw", default=0.0, show_default=True, help="degrees")
@click.option("--pitch", default=0.0, show_default=True, help="degrees")
@click.option("--pivot", default="0,0,0", show_default=True)
@click.option("--multiview", is_flag=True,
              help="emit the four generated-view yaw offsets instead")
@click.option("--out", "out_path", required=True, type=click.Path())
def pose_offset(in_path, index, yaw, pitch, pivot, multiview, out_path):
    """Rotate a pose about a world-space pivot."""
    base = load_poses(in_path)[index]
    piv = _parse_vec(pivot, 3, "pivot")
    if multiview:
        poses = multiview_pose_set(base, piv)
    else:
        poses = [offset_pose_about_pivot(base, math.radians(yaw),
                                         math.radians(pitch), piv)]
    save_poses(out_path, poses)
    click.echo(json.dumps({"poses": len(poses), "out": str(out_path)}))


@pose_group.command("trajectory")
@click.option("--pitch", default=10.0, show_default=True)
@click.option("--start", default=-105.0, show_default=True)
@click.option("--end", default=-45.0, show_default=True)
@click.option("--frames", default=270, show_default=True)
@click.option("--radius", default=5.0, show_default=True)
@click.option("--out", "out_path", required=True, type=click.Path())
def pose_trajectory(pitch, start, end, frames, radius, out_path):
    """Linear-azimuth orbit poses for synthetic captures."""
    spec = TrajectorySpec(pitch_deg=pitch, azimuth_start_deg=start,
                          azimuth_end_deg=end, frame_count=frames, radius=radius)
    poses = [synthetic_trajectory(spec, t) for t in range(frames + 1)]
    save_poses(out_path, poses)
    click.echo(json.dumps({"poses": len(poses), "out": str(out_path)}))


# --------------------------------------------------------------------------
# render / metrics


@main.command("render")
@click.option("--grid", "grid_path", type=click.Path(exists=True),
              help="WSG dump with a 'density' field")
@click.option("--asset", "asset_path", type=click.Path(exists=True))
@click.option("--frame", default=1, show_default=True)
@click.option("--res", default="96,96,96", show_default=True,
              help="splat resolution when rendering an asset")
@click.option("--pose", "pose_path", type=click.Path(exists=True))
@click.option("--index", default=0, show_default=True, help="pose index in the file")
@click.option("--width", default=256, show_default=True)
@click.option("--height", default=256, show_default=True)
@click.option("--samples", default=128, show_default=True)
@click.option("--absorption", default=0.1, show_default=True)
@click.option("--emission", default=0.1, show_default=True)
@click.option("--background", default=0.0, show_default=True)
@click.option("--out", "out_path", required=True, type=click.Path())
def render_cmd(grid_path, asset_path, frame, res, pose_path, index, width,
               height, samples, absorption, emission, background, out_path):
    """Render a density grid (or a splatted asset frame) to an image."""
    if (grid_path is None) == (asset_path is None):
        raise click.UsageError("pass exactly one of --grid or --asset")
    if grid_path:
        fields = load_grids(grid_path)
        if "density" not in fields:
            raise click.ClickException("grid dump has no 'density' field")
        density = fields["density"]
    else:
        a = load_asset(asset_path)
        cfg = SimConfig(resolution=_parse_res(res))
        density = init_from_asset(a, frame, cfg).density
    if pose_path:
        pose = load_poses(pose_path)[index]
        size = float(max(density.bbox_max - density.bbox_min))
        focal = 0.85 * width
        intr = Intrinsics(focal=focal, cx=width / 2, cy=height / 2,
                          width=width, height=height)
    else:
        center = 0.5 * (density.bbox_min + density.bbox_max)
        size = density.bbox_max - density.bbox_min
        dist = 1.6 * float(max(size[0], size[1]))
        pose = CameraPose(np.eye(3), center + np.array([0.0, 0.0, 0.5 * size[2] + dist]))
        intr = Intrinsics(focal=0.85 * width * dist / float(size[0]),
                          cx=width / 2, cy=height / 2, width=width, height=height)
    settings = RenderSettings(width=width, height=height, samples_per_ray=samples,
                              absorption=absorption, emission=emission,
                              background=background)
    img = render_density(density, pose, intr, settings)
    imgio.save_image(out_path, img)
    click.echo(json.dumps({"out": str(out_path), "max_pixel": float(img.max())}))


@main.group("metrics")
def metrics_group():
    """Image quality metrics."""


@metrics_group.command("psnr")
@click.argument("a", type=click.Path(exists=True))
@click.argument("b", type=click.Path(exists=True))
def metrics_psnr(a, b):
    result = psnr_sequence([(imgio.load_image(a), imgio.load_image(b))])
    click.echo(json.dumps(result))


@metrics_group.command("ssim")
@click.argument("a", type=click.Path(exists=True))
@click.argument("b", type=click.Path(exists=True))
def metrics_ssim(a, b):
    value = ssim(imgio.load_image(a), imgio.load_image(b))
    click.echo(json.dumps({"value": value, "infinite_frames": 0}))


# --------------------------------------------------------------------------
# serve / replay


@main.command("serve")
@click.option("--asset", "asset_path", required=True, type=click.Path(exists=True))
@click.option("--frame", default=1, show_default=True)
@click.option("--res", default="96,96,96", show_default=True)
@click.option("--dt", default=1.0, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=None, type=int,
              help=f"default: $SMOKEFORGE_PORT or {8765}")
@click.option("--rate", default=30.0, show_default=True, help="steps/second when running")
@click.option("--log", "log_path", type=click.Path(), help="JSONL command log for replay")
def serve_cmd(asset_path, frame, res, dt, host, port, rate, log_path):
    """Run the interactive simulation service (WebSocket on /ws)."""
    from .server import serve

    a = load_asset(asset_path)
    cfg = SimConfig(dt=dt, resolution=_parse_res(res))
    session = Session(a, cfg, frame=frame, log_path=log_path,
                      asset_path=os.path.abspath(asset_path))
    serve(session, host=host, port=port, step_interval=1.0 / rate)


@main.command("replay")
@click.argument("log", type=click.Path(exists=True))
@click.option("--out", "out_path", type=click.Path(), help="write the final grids")
def replay_cmd(log, out_path):
    """Deterministically re-execute a session command log."""
    session = replay_log(log)
    if out_path:
        save_grids(out_path, {"density": session.state.density,
                              "velocity": session.state.velocity})
    click.echo(json.dumps({
        "step_index": session.state.step_index,
        "clock": session.state.clock,
        "total_mass": total_mass(session.state.density),
        "out": str(out_path) if out_path else None,
    }))


if __name__ == "__main__":
    main()
