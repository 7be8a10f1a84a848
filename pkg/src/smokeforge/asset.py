"""Smoke asset data model and the WSA on-disk format.

An asset is an ordered sequence of frames (1-based indices). Each frame
carries two particle sets stored as float32 arrays:

  visual   -- position (N,3), grayscale color (N,), scale (N,3),
              opacity (N,), rotation quaternion (N,4) in (w,x,y,z) order
  physical -- position (M,3), velocity (M,3)

WSA layout: one UTF-8 JSON header line {"magic":"WSA1","frames":T,"fps":F}
followed by T binary frame blocks, each u32 N_vis, u32 N_phy, then
N_vis x 12 f32 (p,c,s,o,r) and N_phy x 6 f32 (p,u), all little-endian.
Because storage and in-memory representation are both f32, save->load is
field-wise exact and save(load(f)) reproduces canonical files byte for byte.
"""

import json
import struct
from dataclasses import dataclass, field

import numpy as np

ASSET_MAGIC = "WSA1"
VISUAL_FLOATS = 12
PHYSICAL_FLOATS = 6
QUAT_NORM_TOL = 1e-6
DEFAULT_FPS = 30.0


class AssetError(ValueError):
    pass


def _f32(a, shape):
    arr = np.asarray(a, dtype=np.float32).reshape(shape)
    return np.ascontiguousarray(arr)


@dataclass
class AssetFrame:
    vis_positions: np.ndarray = field(default_factory=lambda: np.zeros((0, 3), np.float32))
    vis_colors: np.ndarray = field(default_factory=lambda: np.zeros((0,), np.float32))
    vis_scales: np.ndarray = field(default_factory=lambda: np.zeros((0, 3), np.float32))
    vis_opacities: np.ndarray = field(default_factory=lambda: np.zeros((0,), np.float32))
    vis_rotations: np.ndarray = field(default_factory=lambda: np.zeros((0, 4), np.float32))
    phy_positions: np.ndarray = field(default_factory=lambda: np.zeros((0, 3), np.float32))
    phy_velocities: np.ndarray = field(default_factory=lambda: np.zeros((0, 3), np.float32))

    def __post_init__(self):
        n = np.asarray(self.vis_positions, dtype=np.float32).reshape(-1, 3).shape[0]
        m = np.asarray(self.phy_positions, dtype=np.float32).reshape(-1, 3).shape[0]
        self.vis_positions = _f32(self.vis_positions, (n, 3))
        self.vis_colors = _f32(self.vis_colors, (n,))
        self.vis_scales = _f32(self.vis_scales, (n, 3))
        self.vis_opacities = _f32(self.vis_opacities, (n,))
        self.vis_rotations = _f32(self.vis_rotations, (n, 4))
        self.phy_positions = _f32(self.phy_positions, (m, 3))
        self.phy_velocities = _f32(self.phy_velocities, (m, 3))

    @property
    def n_visual(self):
        return self.vis_positions.shape[0]

    @property
    def n_physical(self):
        return self.phy_positions.shape[0]


@dataclass
class SmokeAsset:
    frames: list
    fps: float = DEFAULT_FPS

    def frame(self, index):
        """1-based frame access, matching on-disk numbering."""
        if not 1 <= index <= len(self.frames):
            raise AssetError(f"frame {index} out of range 1..{len(self.frames)}")
        return self.frames[index - 1]


def validate_asset(asset):
    """Raise AssetError naming the offending frame (1-based) and particle."""
    if not asset.frames:
        raise AssetError("asset has no frames")
    if not np.isfinite(asset.fps) or asset.fps <= 0:
        raise AssetError(f"fps must be positive, got {asset.fps}")
    for fi, fr in enumerate(asset.frames, start=1):
        for name, arr in (("position", fr.vis_positions), ("color", fr.vis_colors),
                          ("scale", fr.vis_scales), ("opacity", fr.vis_opacities),
                          ("rotation", fr.vis_rotations)):
            bad = ~np.isfinite(arr)
            if bad.any():
                p = int(np.argwhere(bad)[0][0])
                raise AssetError(f"frame {fi}: non-finite visual {name} at particle {p}")
        norms = np.linalg.norm(fr.vis_rotations.astype(np.float64), axis=1)
        bad = np.abs(norms - 1.0) > QUAT_NORM_TOL
        if bad.any():
            p = int(np.argmax(bad))
            raise AssetError(
                f"frame {fi}: quaternion not unit length at particle {p} (|r|={norms[p]:.6g})")
        bad = ~(fr.vis_scales > 0).all(axis=1)
        if bad.any():
            p = int(np.argmax(bad))
            raise AssetError(f"frame {fi}: non-positive scale at particle {p}")
        for name, arr in (("opacity", fr.vis_opacities), ("color", fr.vis_colors)):
            bad = (arr < 0) | (arr > 1)
            if bad.any():
                p = int(np.argmax(bad))
                raise AssetError(f"frame {fi}: {name} outside [0,1] at particle {p}")
        for name, arr in (("position", fr.phy_positions), ("velocity", fr.phy_velocities)):
            bad = ~np.isfinite(arr)
            if bad.any():
                p = int(np.argwhere(bad)[0][0])
                raise AssetError(f"frame {fi}: non-finite physical {name} at particle {p}")


def save_asset(asset, path):
    validate_asset(asset)
    header = {"magic": ASSET_MAGIC, "frames": len(asset.frames), "fps": float(asset.fps)}
    with open(path, "wb") as fh:
        fh.write((json.dumps(header, separators=(",", ":")) + "\n").encode("utf-8"))
        for fr in asset.frames:
            fh.write(struct.pack("<II", fr.n_visual, fr.n_physical))
            if fr.n_visual:
                block = np.empty((fr.n_visual, VISUAL_FLOATS), dtype="<f4")
                block[:, 0:3] = fr.vis_positions
                block[:, 3] = fr.vis_colors
                block[:, 4:7] = fr.vis_scales
                block[:, 7] = fr.vis_opacities
                block[:, 8:12] = fr.vis_rotations
                fh.write(block.tobytes(order="C"))
            if fr.n_physical:
                block = np.empty((fr.n_physical, PHYSICAL_FLOATS), dtype="<f4")
                block[:, 0:3] = fr.phy_positions
                block[:, 3:6] = fr.phy_velocities
                fh.write(block.tobytes(order="C"))


def load_asset(path):
    with open(path, "rb") as fh:
        header_line = fh.readline()
        try:
            header = json.loads(header_line.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise AssetError(f"bad WSA header: {exc}") from exc
        if header.get("magic") != ASSET_MAGIC:
            raise AssetError(f"format-version mismatch: expected magic {ASSET_MAGIC!r}, "
                             f"got {header.get('magic')!r}")
        n_frames = header.get("frames")
        fps = header.get("fps", DEFAULT_FPS)
        if not isinstance(n_frames, int) or n_frames < 1:
            raise AssetError(f"invalid frame count in header: {n_frames!r}")
        frames = []
        for fi in range(1, n_frames + 1):
            counts = fh.read(8)
            if len(counts) != 8:
                raise AssetError(f"truncated frame block at frame {fi}")
            n_vis, n_phy = struct.unpack("<II", counts)
            vis_bytes = fh.read(4 * VISUAL_FLOATS * n_vis)
            phy_bytes = fh.read(4 * PHYSICAL_FLOATS * n_phy)
            if len(vis_bytes) != 4 * VISUAL_FLOATS * n_vis or \
                    len(phy_bytes) != 4 * PHYSICAL_FLOATS * n_phy:
                raise AssetError(f"truncated frame block at frame {fi}")
            vis = np.frombuffer(vis_bytes, dtype="<f4").reshape(n_vis, VISUAL_FLOATS)
            phy = np.frombuffer(phy_bytes, dtype="<f4").reshape(n_phy, PHYSICAL_FLOATS)
            frames.append(AssetFrame(
                vis_positions=vis[:, 0:3], vis_colors=vis[:, 3],
                vis_scales=vis[:, 4:7], vis_opacities=vis[:, 7],
                vis_rotations=vis[:, 8:12],
                phy_positions=phy[:, 0:3], phy_velocities=phy[:, 3:6]))
        if fh.read(1):
            raise AssetError("trailing bytes after last frame block")
    asset = SmokeAsset(frames=frames, fps=float(fps))
    validate_asset(asset)
    return asset


def voxel_downsample(points, cell):
    """Merge points sharing a voxel (grid anchored at the world origin) into
    their centroid. Output is sorted by voxel index, so the result does not
    depend on input order."""
    if cell <= 0:
        raise ValueError(f"voxel cell size must be positive, got {cell}")
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    if pts.shape[0] == 0:
        return pts.copy()
    idx = np.floor(pts / cell).astype(np.int64)
    order = np.lexsort((idx[:, 2], idx[:, 1], idx[:, 0]))
    idx_sorted = idx[order]
    pts_sorted = pts[order]
    boundary = np.any(np.diff(idx_sorted, axis=0) != 0, axis=1)
    starts = np.concatenate([[0], np.nonzero(boundary)[0] + 1])
    counts = np.diff(np.concatenate([starts, [pts.shape[0]]]))
    sums = np.add.reduceat(pts_sorted, starts, axis=0)
    return sums / counts[:, None]


def downsample_to_count_range(points, lo=100, hi=300, max_bisect=64):
    """Bisect the voxel size until the downsampled count lands in [lo, hi].
    Returns (points, cell). Used to seed simulation particles from a dense
    foreground cloud."""
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    if pts.shape[0] <= hi:
        return pts.copy(), 0.0
    span = float(np.max(pts.max(axis=0) - pts.min(axis=0)))
    c_lo, c_hi = 1e-9 * span, 4.0 * span
    cell = 0.5 * span
    for _ in range(max_bisect):
        out = voxel_downsample(pts, cell)
        n = out.shape[0]
        if lo <= n <= hi:
            return out, cell
        if n > hi:
            c_lo = cell
        else:
            c_hi = cell
        cell = 0.5 * (c_lo + c_hi)
    raise ValueError(f"bisection failed to reach a count in [{lo}, {hi}]")


def apply_axis_flip(points):
    """Map (x, y, z) -> (x, -y, -z): the diag(1,-1,-1) convention change
    between the pose-estimation and splatting coordinate frames."""
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3).copy()
    pts[:, 1] *= -1.0
    pts[:, 2] *= -1.0
    return pts
