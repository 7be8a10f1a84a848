"""Cell-centered scalar grids and MAC staggered vector grids.

Scalars (density, pressure) live at cell centers. Velocity components live
on the faces normal to them: u on x-faces (nx+1,ny,nz), v on y-faces
(nx,ny+1,nz), w on z-faces (nx,ny,nz+1). All arrays are float64 C-order.

The grid dump format (magic "WSG1") is a UTF-8 JSON header line followed by
raw little-endian f32 blocks, one per field, staggered fields as u,v,w.
"""

import json
from dataclasses import dataclass

import numpy as np

from . import kernels


class GridError(ValueError):
    pass


def _as_vec3(x):
    v = np.asarray(x, dtype=np.float64).reshape(3)
    return v.copy()


@dataclass
class ScalarGrid:
    bbox_min: np.ndarray
    bbox_max: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        self.bbox_min = _as_vec3(self.bbox_min)
        self.bbox_max = _as_vec3(self.bbox_max)
        self.values = np.ascontiguousarray(self.values, dtype=np.float64)
        if self.values.ndim != 3:
            raise GridError("scalar grid values must be 3-D")
        if not np.all(self.bbox_max > self.bbox_min):
            raise GridError("bbox max must exceed bbox min on every axis")

    @classmethod
    def zeros(cls, resolution, bbox_min, bbox_max):
        res = tuple(int(n) for n in resolution)
        if any(n < 1 for n in res):
            raise GridError("resolution components must be >= 1")
        return cls(bbox_min, bbox_max, np.zeros(res))

    @property
    def resolution(self):
        return self.values.shape

    @property
    def cell(self):
        return (self.bbox_max - self.bbox_min) / np.array(self.resolution, dtype=np.float64)

    @property
    def origin(self):
        """World position of cell center (0,0,0)."""
        return self.bbox_min + 0.5 * self.cell

    def center_points(self):
        """(N,3) world coordinates of all cell centers, C-order."""
        return lattice_points(self.resolution, self.origin, self.cell)

    def sample(self, points):
        """Clamped trilinear sample at (N,3) world points."""
        pts = np.ascontiguousarray(points, dtype=np.float64).reshape(-1, 3)
        o = self.origin
        ic = 1.0 / self.cell
        return kernels.trilinear(self.values, o[0], o[1], o[2],
                                 ic[0], ic[1], ic[2],
                                 np.ascontiguousarray(pts[:, 0]),
                                 np.ascontiguousarray(pts[:, 1]),
                                 np.ascontiguousarray(pts[:, 2]))

    def copy(self):
        return ScalarGrid(self.bbox_min, self.bbox_max, self.values.copy())


@dataclass
class StaggeredVectorGrid:
    bbox_min: np.ndarray
    bbox_max: np.ndarray
    u: np.ndarray
    v: np.ndarray
    w: np.ndarray

    def __post_init__(self):
        self.bbox_min = _as_vec3(self.bbox_min)
        self.bbox_max = _as_vec3(self.bbox_max)
        self.u = np.ascontiguousarray(self.u, dtype=np.float64)
        self.v = np.ascontiguousarray(self.v, dtype=np.float64)
        self.w = np.ascontiguousarray(self.w, dtype=np.float64)
        nx, ny, nz = self.resolution
        if self.u.shape != (nx + 1, ny, nz) or self.v.shape != (nx, ny + 1, nz) \
                or self.w.shape != (nx, ny, nz + 1):
            raise GridError("staggered component shapes are inconsistent")
        if not np.all(self.bbox_max > self.bbox_min):
            raise GridError("bbox max must exceed bbox min on every axis")

    @classmethod
    def zeros(cls, resolution, bbox_min, bbox_max):
        nx, ny, nz = (int(n) for n in resolution)
        return cls(bbox_min, bbox_max,
                   np.zeros((nx + 1, ny, nz)),
                   np.zeros((nx, ny + 1, nz)),
                   np.zeros((nx, ny, nz + 1)))

    @property
    def resolution(self):
        return (self.u.shape[0] - 1, self.u.shape[1], self.u.shape[2])

    @property
    def cell(self):
        return (self.bbox_max - self.bbox_min) / np.array(self.resolution, dtype=np.float64)

    def component(self, axis):
        return (self.u, self.v, self.w)[axis]

    def face_origin(self, axis):
        """World position of face node (0,0,0) for the given component."""
        c = self.cell
        off = 0.5 * c
        off[axis] = 0.0
        return self.bbox_min + off

    def face_points(self, axis):
        comp = self.component(axis)
        return lattice_points(comp.shape, self.face_origin(axis), self.cell)

    def sample(self, points, outside_zero=False):
        """Trilinear velocity at (N,3) world points; each component is
        interpolated on its own face lattice. With outside_zero, points
        strictly outside the bbox get velocity 0."""
        pts = np.ascontiguousarray(points, dtype=np.float64).reshape(-1, 3)
        xs = np.ascontiguousarray(pts[:, 0])
        ys = np.ascontiguousarray(pts[:, 1])
        zs = np.ascontiguousarray(pts[:, 2])
        ic = 1.0 / self.cell
        out = np.empty((pts.shape[0], 3))
        for axis in range(3):
            o = self.face_origin(axis)
            out[:, axis] = kernels.trilinear(self.component(axis),
                                             o[0], o[1], o[2],
                                             ic[0], ic[1], ic[2], xs, ys, zs)
        if outside_zero:
            inside = np.all((pts >= self.bbox_min) & (pts <= self.bbox_max), axis=1)
            out[~inside] = 0.0
        return out

    def max_abs(self):
        return max(np.abs(self.u).max(initial=0.0),
                   np.abs(self.v).max(initial=0.0),
                   np.abs(self.w).max(initial=0.0))

    def copy(self):
        return StaggeredVectorGrid(self.bbox_min, self.bbox_max,
                                   self.u.copy(), self.v.copy(), self.w.copy())


def lattice_points(shape, origin, cell):
    nx, ny, nz = shape
    xs = origin[0] + cell[0] * np.arange(nx)
    ys = origin[1] + cell[1] * np.arange(ny)
    zs = origin[2] + cell[2] * np.arange(nz)
    X, Y, Z = np.meshgrid(xs, ys, zs, indexing="ij")
    return np.stack([X.ravel(), Y.ravel(), Z.ravel()], axis=1)


GRID_MAGIC = "WSG1"


def save_grids(path, fields):
    """Write named grids ({"density": ScalarGrid, "velocity": Staggered...})
    sharing one bbox to a WSG1 file."""
    if not fields:
        raise GridError("no fields to save")
    grids = list(fields.values())
    bmin, bmax = grids[0].bbox_min, grids[0].bbox_max
    for g in grids[1:]:
        if not (np.array_equal(g.bbox_min, bmin) and np.array_equal(g.bbox_max, bmax)):
            raise GridError("all fields in one dump must share a bbox")
    header = {
        "magic": GRID_MAGIC,
        "bbox": [*map(float, bmin), *map(float, bmax)],
        "fields": [],
    }
    for name, g in fields.items():
        if isinstance(g, ScalarGrid):
            header["fields"].append({"name": name, "kind": "scalar",
                                     "shape": list(g.resolution)})
        elif isinstance(g, StaggeredVectorGrid):
            header["fields"].append({"name": name, "kind": "staggered",
                                     "resolution": list(g.resolution)})
        else:
            raise GridError(f"unsupported field type for {name!r}")
    with open(path, "wb") as fh:
        fh.write((json.dumps(header, separators=(",", ":")) + "\n").encode("utf-8"))
        for g in fields.values():
            if isinstance(g, ScalarGrid):
                fh.write(g.values.astype("<f4").tobytes(order="C"))
            else:
                for comp in (g.u, g.v, g.w):
                    fh.write(comp.astype("<f4").tobytes(order="C"))


def load_grids(path):
    with open(path, "rb") as fh:
        header_line = fh.readline()
        try:
            header = json.loads(header_line.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise GridError(f"bad grid dump header: {exc}") from exc
        if header.get("magic") != GRID_MAGIC:
            raise GridError(f"not a {GRID_MAGIC} file")
        bbox = header["bbox"]
        bmin, bmax = bbox[:3], bbox[3:]
        out = {}
        for spec in header["fields"]:
            if spec["kind"] == "scalar":
                shape = tuple(spec["shape"])
                n = int(np.prod(shape))
                data = np.frombuffer(fh.read(4 * n), dtype="<f4")
                if data.size != n:
                    raise GridError(f"truncated field {spec['name']!r}")
                out[spec["name"]] = ScalarGrid(bmin, bmax,
                                               data.astype(np.float64).reshape(shape))
            elif spec["kind"] == "staggered":
                nx, ny, nz = spec["resolution"]
                comps = []
                for shape in ((nx + 1, ny, nz), (nx, ny + 1, nz), (nx, ny, nz + 1)):
                    n = int(np.prod(shape))
                    data = np.frombuffer(fh.read(4 * n), dtype="<f4")
                    if data.size != n:
                        raise GridError(f"truncated field {spec['name']!r}")
                    comps.append(data.astype(np.float64).reshape(shape))
                out[spec["name"]] = StaggeredVectorGrid(bmin, bmax, *comps)
            else:
                raise GridError(f"unknown field kind {spec['kind']!r}")
    return out
