"""Incompressible smoke stepping on the MAC grid.

Step order: advect velocity (MacCormack) -> buoyancy -> wind forces ->
obstacle no-slip -> pressure projection -> advect density (MacCormack),
then clamp density to be non-negative.

Domain walls default to "open" (ambient pressure 0 outside, flow may cross
the boundary). A sealed box is available via wall_bc="closed", but note a
sealed box cancels any uniform body force in the projection, so the global
wind scenario needs open walls to show net drift.
"""

import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from . import kernels
from .asset import AssetError
from .grids import ScalarGrid, StaggeredVectorGrid, lattice_points
from .splat import restrict_bbox, splat_density, splat_velocity


@dataclass
class SphereRegion:
    center: np.ndarray
    radius: float

    def __post_init__(self):
        self.center = np.asarray(self.center, dtype=np.float64).reshape(3)
        self.radius = float(self.radius)
        if self.radius <= 0:
            raise ValueError("sphere radius must be positive")

    def contains(self, points):
        d = np.asarray(points, dtype=np.float64).reshape(-1, 3) - self.center
        return np.einsum("ij,ij->i", d, d) <= self.radius ** 2


@dataclass
class WindForce:
    force: np.ndarray
    region: SphereRegion | None = None  # None applies everywhere

    def __post_init__(self):
        self.force = np.asarray(self.force, dtype=np.float64).reshape(3)


@dataclass
class SphereObstacle:
    center: np.ndarray
    radius: float

    def __post_init__(self):
        self.center = np.asarray(self.center, dtype=np.float64).reshape(3)
        self.radius = float(self.radius)
        if self.radius <= 0:
            raise ValueError("obstacle radius must be positive")

    def contains(self, points):
        d = np.asarray(points, dtype=np.float64).reshape(-1, 3) - self.center
        return np.einsum("ij,ij->i", d, d) <= self.radius ** 2


@dataclass
class SimConfig:
    dt: float = 1.0 / 30.0
    buoyancy_coeff: float = 0.0
    wind: list = field(default_factory=list)
    obstacles: list = field(default_factory=list)
    projection_tol: float = 1e-4
    projection_max_iters: int = 500
    kernel_scale: np.ndarray | None = None  # None -> 1.5 grid cells at init
    resolution: tuple = (128, 128, 128)
    padding_sigmas: float = 3.0
    wall_bc: str = "open"
    cfl_warn: float = 1.0

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.projection_tol <= 0:
            raise ValueError("projection_tol must be positive")
        if self.wall_bc not in ("open", "closed"):
            raise ValueError(f"unknown wall_bc {self.wall_bc!r}")
        if self.kernel_scale is not None:
            self.kernel_scale = np.asarray(self.kernel_scale, dtype=np.float64).reshape(3)


@dataclass
class ProjectionReport:
    iterations: int
    residual: float
    converged: bool


@dataclass
class SimState:
    density: ScalarGrid
    velocity: StaggeredVectorGrid
    step_index: int = 0
    clock: float = 0.0
    projection: ProjectionReport | None = None

    def copy(self):
        return SimState(self.density.copy(), self.velocity.copy(),
                        self.step_index, self.clock, self.projection)


# ---------------------------------------------------------------------------
# advection


def _advect_lattice(values, origin, cell, velocity, dt):
    """One semi-Lagrangian pass of a lattice field; returns the advected
    values and the backtraced sample positions (needed for the limiter)."""
    pts = lattice_points(values.shape, origin, cell)
    v = velocity.sample(pts)
    back = pts - dt * v
    ic = 1.0 / cell
    out = kernels.trilinear(values, origin[0], origin[1], origin[2],
                            ic[0], ic[1], ic[2],
                            np.ascontiguousarray(back[:, 0]),
                            np.ascontiguousarray(back[:, 1]),
                            np.ascontiguousarray(back[:, 2]))
    return out.reshape(values.shape), back


def _maccormack_lattice(values, origin, cell, velocity, dt):
    fwd, back = _advect_lattice(values, origin, cell, velocity, dt)
    bwd, _ = _advect_lattice(fwd, origin, cell, velocity, -dt)
    corrected = fwd + 0.5 * (values - bwd)
    ic = 1.0 / cell
    mn, mx = kernels.stencil_minmax(values, origin[0], origin[1], origin[2],
                                    ic[0], ic[1], ic[2],
                                    np.ascontiguousarray(back[:, 0]),
                                    np.ascontiguousarray(back[:, 1]),
                                    np.ascontiguousarray(back[:, 2]))
    return np.clip(corrected, mn.reshape(values.shape), mx.reshape(values.shape))


def _warn_cfl(velocity, dt, cfl):
    vmax = velocity.max_abs()
    limit = cfl * float(velocity.cell.min())
    if vmax * dt > limit:
        warnings.warn(f"advection step dt*|V|max = {vmax * dt:.3g} exceeds "
                      f"{cfl:.2g} cells; semi-Lagrangian stays stable but loses accuracy",
                      RuntimeWarning, stacklevel=3)


def advect_maccormack(fieldgrid, velocity, dt, cfl_warn=1.0):
    """MacCormack advection (predictor/corrector semi-Lagrangian with the
    forward-pass stencil clamp) of a scalar or staggered field."""
    _warn_cfl(velocity, dt, cfl_warn)
    if isinstance(fieldgrid, ScalarGrid):
        out = _maccormack_lattice(fieldgrid.values, fieldgrid.origin,
                                  fieldgrid.cell, velocity, dt)
        return ScalarGrid(fieldgrid.bbox_min, fieldgrid.bbox_max, out)
    comps = []
    for axis in range(3):
        comps.append(_maccormack_lattice(fieldgrid.component(axis),
                                         fieldgrid.face_origin(axis),
                                         fieldgrid.cell, velocity, dt))
    return StaggeredVectorGrid(fieldgrid.bbox_min, fieldgrid.bbox_max, *comps)


# ---------------------------------------------------------------------------
# forces and obstacles


def add_buoyancy(velocity, density, buoyancy_coeff, dt):
    """v-faces gain dt * coeff * density sampled at the face center."""
    out = velocity.copy()
    if buoyancy_coeff == 0.0:
        return out
    pts = out.face_points(1)
    rho = density.sample(pts).reshape(out.v.shape)
    out.v += dt * buoyancy_coeff * rho
    return out


def add_wind(velocity, wind, dt):
    """Accelerate faces by dt * force, everywhere or only inside the
    wind's sphere region."""
    out = velocity.copy()
    for axis in range(3):
        f = wind.force[axis]
        if f == 0.0:
            continue
        comp = out.component(axis)
        if wind.region is None:
            comp += dt * f
        else:
            mask = wind.region.contains(out.face_points(axis)).reshape(comp.shape)
            comp[mask] += dt * f
    return out


def solid_cell_mask(grid, obstacles):
    nx, ny, nz = grid.resolution
    mask = np.zeros((nx, ny, nz), dtype=bool)
    if obstacles:
        pts = lattice_points((nx, ny, nz), grid.bbox_min + 0.5 * grid.cell, grid.cell)
        for ob in obstacles:
            mask |= ob.contains(pts).reshape(nx, ny, nz)
    return mask


def solid_face_masks(velocity, obstacles):
    """Per-component boolean masks of faces closed by obstacles: face center
    inside a sphere, or face adjacent to a solid cell."""
    solid = solid_cell_mask(velocity, obstacles)
    masks = []
    for axis in range(3):
        comp = velocity.component(axis)
        m = np.zeros(comp.shape, dtype=bool)
        if obstacles:
            pts = velocity.face_points(axis)
            for ob in obstacles:
                m |= ob.contains(pts).reshape(comp.shape)
        pad = [(0, 0)] * 3
        pad[axis] = (1, 0)
        m |= np.pad(solid, pad)  # face i touches cell i
        pad[axis] = (0, 1)
        m |= np.pad(solid, pad)  # face i touches cell i-1
        masks.append(m)
    return solid, masks


def apply_obstacle(velocity, obstacle):
    """No-slip: zero every face the obstacle closes (center inside the
    sphere or adjacent to a solid cell, matching the projection stencil)."""
    return apply_obstacles(velocity, [obstacle])


def apply_obstacles(velocity, obstacles):
    out = velocity.copy()
    if not obstacles:
        return out
    _, masks = solid_face_masks(out, obstacles)
    for axis in range(3):
        out.component(axis)[masks[axis]] = 0.0
    return out


# ---------------------------------------------------------------------------
# pressure projection


def divergence(velocity):
    inv = 1.0 / velocity.cell
    u, v, w = velocity.u, velocity.v, velocity.w
    return ((u[1:, :, :] - u[:-1, :, :]) * inv[0]
            + (v[:, 1:, :] - v[:, :-1, :]) * inv[1]
            + (w[:, :, 1:] - w[:, :, :-1]) * inv[2])


def _open_face_masks(velocity, solid, extra_closed, wall_open):
    fluid = ~solid
    boundary = 1.0 if wall_open else 0.0
    opens = []
    for axis, shape in ((0, velocity.u.shape), (1, velocity.v.shape), (2, velocity.w.shape)):
        m = np.zeros(shape)
        sl_lo = [slice(None)] * 3
        sl_hi = [slice(None)] * 3
        sl_lo[axis] = slice(1, None)
        sl_hi[axis] = slice(None, -1)
        inner = [slice(None)] * 3
        inner[axis] = slice(1, -1)
        m[tuple(inner)] = (fluid[tuple(sl_hi)] & fluid[tuple(sl_lo)]).astype(np.float64)
        first = [slice(None)] * 3
        first[axis] = 0
        last = [slice(None)] * 3
        last[axis] = -1
        m[tuple(first)] = boundary * fluid[tuple(first)]
        m[tuple(last)] = boundary * fluid[tuple(last)]
        if extra_closed is not None:
            m[extra_closed[axis]] = 0.0
        opens.append(m)
    return opens


def project(velocity, solid_cells=None, tol=1e-4, max_iters=500,
            wall_open=True, closed_faces=None):
    """Make the velocity divergence-free on fluid cells.

    Solves the masked pressure Poisson system with a Jacobi-preconditioned
    conjugate gradient until max |divergence| <= tol, then subtracts the
    pressure gradient on open faces. Closed faces (walls of a sealed box,
    obstacle faces) are zeroed first and never receive a correction.
    Returns (velocity, ProjectionReport)."""
    if tol <= 0:
        raise ValueError("projection tolerance must be positive")
    out = velocity.copy()
    nx, ny, nz = out.resolution
    if solid_cells is None:
        solid_cells = np.zeros((nx, ny, nz), dtype=bool)
    opens = _open_face_masks(out, solid_cells, closed_faces, wall_open)

    # closed faces are sealed walls and solid faces; all carry zero flux
    for axis in range(3):
        comp = out.component(axis)
        comp[opens[axis] == 0.0] = 0.0

    inv = 1.0 / out.cell
    ix2, iy2, iz2 = float(inv[0] ** 2), float(inv[1] ** 2), float(inv[2] ** 2)
    div = divergence(out)
    div[solid_cells] = 0.0
    rhs = -div
    fluid = ~solid_cells
    if not wall_open and fluid.any():
        rhs[fluid] -= rhs[fluid].mean()  # Neumann-only compatibility guard

    openx, openy, openz = opens
    diag = ((openx[:-1, :, :] + openx[1:, :, :]) * ix2
            + (openy[:, :-1, :] + openy[:, 1:, :]) * iy2
            + (openz[:, :, :-1] + openz[:, :, 1:]) * iz2)
    diag[diag == 0.0] = 1.0

    def apply_A(x):
        return -kernels.laplacian(x, openx, openy, openz, ix2, iy2, iz2)

    p = np.zeros_like(rhs)
    r = rhs.copy()
    res = float(np.abs(r).max()) if r.size else 0.0
    it = 0
    converged = res <= tol
    while not converged and it < max_iters:
        z = r / diag
        d = z.copy()
        rz = float((r * z).sum())
        while it < max_iters:
            it += 1
            Ad = apply_A(d)
            dAd = float((d * Ad).sum())
            if dAd <= 0.0:
                break
            alpha = rz / dAd
            p += alpha * d
            r -= alpha * Ad
            res = float(np.abs(r).max())
            if res <= tol:
                break
            z = r / diag
            rz_new = float((r * z).sum())
            d = z + (rz_new / rz) * d
            rz = rz_new
        # verify against the true residual; restart CG if drifted
        r = rhs - apply_A(p)
        res = float(np.abs(r).max())
        converged = res <= tol
        if not converged and it >= max_iters:
            break

    # subtract pressure gradient on open faces (ghost pressure 0 outside)
    gx = np.zeros_like(out.u)
    gx[1:-1, :, :] = (p[1:, :, :] - p[:-1, :, :]) * inv[0]
    gx[0, :, :] = p[0, :, :] * inv[0]
    gx[-1, :, :] = -p[-1, :, :] * inv[0]
    out.u -= gx * openx

    gy = np.zeros_like(out.v)
    gy[:, 1:-1, :] = (p[:, 1:, :] - p[:, :-1, :]) * inv[1]
    gy[:, 0, :] = p[:, 0, :] * inv[1]
    gy[:, -1, :] = -p[:, -1, :] * inv[1]
    out.v -= gy * openy

    gz = np.zeros_like(out.w)
    gz[:, :, 1:-1] = (p[:, :, 1:] - p[:, :, :-1]) * inv[2]
    gz[:, :, 0] = p[:, :, 0] * inv[2]
    gz[:, :, -1] = -p[:, :, -1] * inv[2]
    out.w -= gz * openz

    final = divergence(out)
    final[solid_cells] = 0.0
    residual = float(np.abs(final).max()) if final.size else 0.0
    report = ProjectionReport(iterations=it, residual=residual,
                              converged=residual <= tol)
    if not report.converged:
        warnings.warn(f"pressure projection stopped at residual {residual:.3g} "
                      f"after {it} iterations (tol {tol:.3g})", RuntimeWarning,
                      stacklevel=2)
    return out, report


def max_divergence(state, obstacles=()):
    """Max |divergence| over fluid cells; the per-step health metric."""
    div = divergence(state.velocity)
    if obstacles:
        div[solid_cell_mask(state.velocity, obstacles)] = 0.0
    return float(np.abs(div).max()) if div.size else 0.0


def total_mass(density):
    return float(density.values.sum() * np.prod(density.cell))


def center_of_mass(density):
    m = density.values.sum()
    if m <= 0:
        return density.bbox_min + 0.5 * (density.bbox_max - density.bbox_min)
    pts = density.center_points()
    return (pts * density.values.ravel()[:, None]).sum(axis=0) / m


# ---------------------------------------------------------------------------
# stepping


def step(state, config):
    """Advance one step; returns the next SimState (input untouched)."""
    dt = config.dt
    vel = advect_maccormack(state.velocity, state.velocity, dt, config.cfl_warn)
    vel = add_buoyancy(vel, state.density, config.buoyancy_coeff, dt)
    for wind in config.wind:
        vel = add_wind(vel, wind, dt)
    vel = apply_obstacles(vel, config.obstacles)
    solid, closed = (None, None)
    if config.obstacles:
        solid, closed = solid_face_masks(vel, config.obstacles)
    vel, report = project(vel, solid_cells=solid, tol=config.projection_tol,
                          max_iters=config.projection_max_iters,
                          wall_open=config.wall_bc == "open",
                          closed_faces=closed)
    dens_values = _maccormack_lattice(state.density.values, state.density.origin,
                                      state.density.cell, vel, dt)
    np.maximum(dens_values, 0.0, out=dens_values)
    density = ScalarGrid(state.density.bbox_min, state.density.bbox_max, dens_values)
    return SimState(density=density, velocity=vel,
                    step_index=state.step_index + 1,
                    clock=state.clock + dt, projection=report)


def advect_particles(positions, velocity, dt):
    """RK2 midpoint advection of particle centers through the staggered
    field; positions outside the bbox see zero velocity."""
    pos = np.asarray(positions, dtype=np.float64).reshape(-1, 3)
    if pos.shape[0] == 0:
        return pos.copy()
    v0 = velocity.sample(pos, outside_zero=True)
    mid = pos + 0.5 * dt * v0
    v1 = velocity.sample(mid, outside_zero=True)
    return pos + dt * v1


def init_from_asset(asset, frame_index, config):
    """Build the initial state from one asset frame: density splatted from
    visual particles, velocity from physical particles, both over the
    visual-particle bounding region."""
    fr = asset.frame(frame_index)
    if fr.n_visual == 0:
        raise AssetError(f"frame {frame_index} has no visual particles")
    bmin, bmax = restrict_bbox(fr.vis_positions, fr.vis_scales, config.padding_sigmas)
    density = splat_density(fr.vis_positions, fr.vis_scales, fr.vis_rotations,
                            fr.vis_opacities, config.resolution, bmin, bmax)
    kscale = config.kernel_scale
    if kscale is None:
        kscale = 1.5 * density.cell
    velocity = splat_velocity(fr.phy_positions, fr.phy_velocities, kscale,
                              config.resolution, bmin, bmax)
    return SimState(density=density, velocity=velocity)


# ---------------------------------------------------------------------------
# interaction scenario presets


SCENARIO_NAMES = ("none", "wind-global", "wind-local", "obstacle")
SCENARIO_WIND_FORCE = (0.005, 0.0, 0.0)
SCENARIO_LOCAL_RADIUS = 30.0
SCENARIO_BALL_RADIUS = 10.0
SCENARIO_BALL_XY = (50.0, 70.0)


def scenario_config(name, bbox_min, bbox_max, base=None):
    """SimConfig for the published interaction scenarios, interpreted in
    grid-index units: global wind (0.005,0,0); the same wind confined to a
    radius-30 sphere at the scene center; a rigid radius-10 ball at
    (50, 70, z_center)."""
    cfg = base if base is not None else SimConfig()
    bmin = np.asarray(bbox_min, dtype=np.float64)
    bmax = np.asarray(bbox_max, dtype=np.float64)
    center = 0.5 * (bmin + bmax)
    if name == "none":
        return replace(cfg, wind=[], obstacles=[])
    if name == "wind-global":
        return replace(cfg, wind=[WindForce(SCENARIO_WIND_FORCE)], obstacles=[])
    if name == "wind-local":
        return replace(cfg, wind=[WindForce(SCENARIO_WIND_FORCE,
                                            SphereRegion(center, SCENARIO_LOCAL_RADIUS))],
                       obstacles=[])
    if name == "obstacle":
        ball = SphereObstacle((SCENARIO_BALL_XY[0], SCENARIO_BALL_XY[1], center[2]),
                              SCENARIO_BALL_RADIUS)
        return replace(cfg, wind=[], obstacles=[ball])
    raise ValueError(f"unknown scenario {name!r}; expected one of {SCENARIO_NAMES}")
