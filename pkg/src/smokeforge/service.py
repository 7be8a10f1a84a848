"""Interactive simulation sessions.

A Session owns one SimState and applies edit commands strictly between
steps, so a run is a deterministic function of the initial asset frame and
the command sequence. Every applied command (and every automatic step) can
be journaled to a JSONL log; `replay_log` rebuilds the exact final state.

Wire protocol (JSON, transported over the websocket in server.py):

  client -> server: {"seq": int, "cmd": str, "params": {...}}
      set_wind        {"winds": [{"force": [fx,fy,fz], "region":
                        {"type":"global"} | {"type":"sphere","center":[x,y,z],"radius":r}}]}
      add_obstacle    {"center": [x,y,z], "radius": r}      -> ack carries "id"
      remove_obstacle {"id": n}
      set_buoyancy    {"value": b}
      step            {"n": k}
      pause / resume  {}
      reset           {"frame": k}
      snapshot        {}

  server -> client:
      {"type":"ack","seq":s,"session_seq":n,"applied_at_step":k, ...extras}
      {"type":"error","seq":s,"reason":"..."}
      {"type":"meta", bbox/resolution/fps...}          (on subscribe)
      {"type":"frame","step_index":k,"clock":t,"max_divergence":d,
       "total_mass":m,"mode":"slice"|"render","width":w,"height":h,
       "dtype":"f32"|"u8","data":base64 or null,"binary_follows":bool}
"""

import base64
import json
from collections import deque
from dataclasses import dataclass, field, replace

import numpy as np

from . import solver
from .camera import CameraPose, Intrinsics
from .render import RenderSettings, render_density
from .solver import (SimConfig, SphereObstacle, SphereRegion, WindForce,
                     init_from_asset, max_divergence, total_mass)

COMMANDS = ("set_wind", "add_obstacle", "remove_obstacle", "set_buoyancy",
            "step", "pause", "resume", "reset", "snapshot")


class CommandError(ValueError):
    pass


@dataclass
class Ack:
    seq: object
    ok: bool
    applied_at_step: int | None = None
    session_seq: int | None = None
    reason: str | None = None
    extras: dict = field(default_factory=dict)

    def to_message(self):
        if self.ok:
            msg = {"type": "ack", "seq": self.seq, "session_seq": self.session_seq,
                   "applied_at_step": self.applied_at_step}
            msg.update(self.extras)
        else:
            msg = {"type": "error", "seq": self.seq, "reason": self.reason}
        return msg


@dataclass
class Subscription:
    mode: str = "slice"
    encoding: str = "base64"
    width: int = 192
    height: int = 192
    max_queued: int = 8
    queue: deque = field(default_factory=lambda: deque(maxlen=8))

    def __post_init__(self):
        self.queue = deque(maxlen=self.max_queued)


def _vec3(x, what):
    try:
        v = [float(c) for c in x]
    except (TypeError, ValueError) as exc:
        raise CommandError(f"{what} must be a 3-vector") from exc
    if len(v) != 3 or not all(np.isfinite(v)):
        raise CommandError(f"{what} must be a finite 3-vector")
    return v


def _parse_region(d):
    if d is None or d.get("type") == "global":
        return None
    if d.get("type") == "sphere":
        r = float(d.get("radius", 0))
        if not np.isfinite(r) or r <= 0:
            raise CommandError("sphere region radius must be positive")
        return SphereRegion(_vec3(d.get("center"), "region center"), r)
    raise CommandError(f"unknown wind region type {d.get('type')!r}")


def _parse_winds(params):
    winds = params.get("winds")
    if not isinstance(winds, list):
        raise CommandError("set_wind needs a 'winds' list")
    out = []
    for w in winds:
        if not isinstance(w, dict):
            raise CommandError("each wind must be an object")
        out.append(WindForce(_vec3(w.get("force"), "wind force"),
                             _parse_region(w.get("region"))))
    return out


def wind_to_dict(w):
    region = {"type": "global"} if w.region is None else \
        {"type": "sphere", "center": [float(c) for c in w.region.center],
         "radius": float(w.region.radius)}
    return {"force": [float(c) for c in w.force], "region": region}


def obstacle_to_dict(ob):
    return {"center": [float(c) for c in ob.center], "radius": float(ob.radius)}


def config_to_dict(cfg):
    return {
        "dt": cfg.dt, "buoyancy_coeff": cfg.buoyancy_coeff,
        "wind": [wind_to_dict(w) for w in cfg.wind],
        "obstacles": [obstacle_to_dict(ob) for ob in cfg.obstacles],
        "projection_tol": cfg.projection_tol,
        "projection_max_iters": cfg.projection_max_iters,
        "kernel_scale": None if cfg.kernel_scale is None else
            [float(c) for c in cfg.kernel_scale],
        "resolution": list(cfg.resolution),
        "padding_sigmas": cfg.padding_sigmas,
        "wall_bc": cfg.wall_bc,
    }


def config_from_dict(d):
    return SimConfig(
        dt=d["dt"], buoyancy_coeff=d["buoyancy_coeff"],
        wind=[WindForce(w["force"], _parse_region(w["region"])) for w in d["wind"]],
        obstacles=[SphereObstacle(o["center"], o["radius"]) for o in d["obstacles"]],
        projection_tol=d["projection_tol"],
        projection_max_iters=d["projection_max_iters"],
        kernel_scale=d["kernel_scale"],
        resolution=tuple(d["resolution"]),
        padding_sigmas=d["padding_sigmas"],
        wall_bc=d["wall_bc"],
    )


class Session:
    """Single-owner simulation session; not thread-safe by design (one
    owner task mutates it, snapshots handed out are copies)."""

    def __init__(self, asset, config=None, frame=1, log_path=None, asset_path=None):
        self.asset = asset
        self.config = config if config is not None else SimConfig()
        self.state = init_from_asset(asset, frame, self.config)
        self.initial_frame = frame
        self.obstacles = {}
        self._next_obstacle_id = 1
        for ob in self.config.obstacles:
            self.obstacles[self._next_obstacle_id] = ob
            self._next_obstacle_id += 1
        self.running = False
        self.session_seq = 0
        self.subscriptions = []
        self._log = None
        if log_path is not None:
            self._log = open(log_path, "w", encoding="utf-8")
            self._log_record({"type": "init", "asset": asset_path,
                              "frame": frame, "config": config_to_dict(self.config)})

    # -- logging -----------------------------------------------------------

    def _log_record(self, rec):
        if self._log is not None:
            self._log.write(json.dumps(rec, separators=(",", ":")) + "\n")
            self._log.flush()

    def close(self):
        if self._log is not None:
            self._log.close()
            self._log = None

    # -- stepping ----------------------------------------------------------

    def step_once(self, record=True):
        """Advance one step and fan the new frame out to subscribers."""
        self.state = solver.step(self.state, self.config)
        if record:
            self._log_record({"type": "auto_step"})
        self._emit_frames()

    def _run_steps(self, n):
        for _ in range(n):
            self.state = solver.step(self.state, self.config)
            self._emit_frames()

    # -- frames ------------------------------------------------------------

    def subscribe(self, params=None):
        params = params or {}
        mode = params.get("mode", "slice")
        if mode not in ("slice", "render"):
            raise CommandError(f"unknown frame mode {mode!r}")
        encoding = params.get("encoding", "base64")
        if encoding not in ("base64", "binary"):
            raise CommandError(f"unknown payload encoding {encoding!r}")
        sub = Subscription(mode=mode, encoding=encoding,
                           width=int(params.get("width", 192)),
                           height=int(params.get("height", 192)),
                           max_queued=int(params.get("max_queued", 8)))
        self.subscriptions.append(sub)
        return sub

    def unsubscribe(self, sub):
        if sub in self.subscriptions:
            self.subscriptions.remove(sub)

    def meta_message(self):
        g = self.state.density
        return {"type": "meta",
                "bbox_min": [float(c) for c in g.bbox_min],
                "bbox_max": [float(c) for c in g.bbox_max],
                "resolution": list(g.resolution),
                "fps": float(self.asset.fps),
                "frames": len(self.asset.frames),
                "step_index": self.state.step_index,
                "obstacles": [{"id": i, **obstacle_to_dict(ob)}
                              for i, ob in self.obstacles.items()]}

    def _default_view(self, width, height):
        g = self.state.density
        center = 0.5 * (g.bbox_min + g.bbox_max)
        size = g.bbox_max - g.bbox_min
        dist = 1.6 * float(max(size[0], size[1]))
        position = center + np.array([0.0, 0.0, 0.5 * size[2] + dist])
        pose = CameraPose(np.eye(3), position)
        focal = 0.85 * width * dist / max(float(size[0]), 1e-9)
        return pose, Intrinsics(focal=focal, cx=width / 2, cy=height / 2,
                                width=width, height=height)

    def _frame_payload(self, sub):
        if sub.mode == "slice":
            g = self.state.density
            nz = g.resolution[2]
            data = np.ascontiguousarray(g.values[:, :, nz // 2], dtype="<f4")
            width, height = g.resolution[0], g.resolution[1]
            dtype = "f32"
            raw = data.tobytes(order="C")
        else:
            pose, intr = self._default_view(sub.width, sub.height)
            settings = RenderSettings(width=sub.width, height=sub.height,
                                      samples_per_ray=96)
            img = render_density(self.state.density, pose, intr, settings)
            raw = (np.clip(img, 0, 1) * 255).astype(np.uint8).tobytes(order="C")
            width, height = sub.width, sub.height
            dtype = "u8"
        msg = {"type": "frame",
               "step_index": self.state.step_index,
               "clock": self.state.clock,
               "max_divergence": max_divergence(self.state, self.config.obstacles),
               "total_mass": total_mass(self.state.density),
               "mode": sub.mode, "width": width, "height": height,
               "dtype": dtype, "layout": "x-major" if sub.mode == "slice" else "row-major"}
        if sub.encoding == "base64":
            msg["data"] = base64.b64encode(raw).decode("ascii")
            msg["binary_follows"] = False
            return msg, None
        msg["data"] = None
        msg["binary_follows"] = True
        return msg, raw

    def _emit_frames(self):
        for sub in self.subscriptions:
            sub.queue.append(self._frame_payload(sub))

    # -- commands ----------------------------------------------------------

    def handle_message(self, msg):
        """Validate and apply one client message; returns an Ack. Unknown or
        malformed input is rejected without touching the state."""
        if not isinstance(msg, dict):
            return Ack(seq=None, ok=False, reason="message must be a JSON object")
        seq = msg.get("seq")
        cmd = msg.get("cmd")
        params = msg.get("params")
        if params is None:
            params = {}
        if cmd not in COMMANDS:
            return Ack(seq=seq, ok=False, reason=f"unknown command {cmd!r}")
        if not isinstance(params, dict):
            return Ack(seq=seq, ok=False, reason="params must be an object")
        try:
            return self.apply_command(seq, cmd, params)
        except (CommandError, ValueError, TypeError, KeyError) as exc:
            return Ack(seq=seq, ok=False, reason=str(exc))

    def apply_command(self, seq, cmd, params, record=True):
        """Apply a validated command at the current step boundary."""
        extras = {}
        boundary = self.state.step_index
        if cmd == "set_wind":
            self.config.wind = _parse_winds(params)
        elif cmd == "add_obstacle":
            ob = SphereObstacle(_vec3(params.get("center"), "obstacle center"),
                                float(params.get("radius", 0)))
            oid = self._next_obstacle_id
            self._next_obstacle_id += 1
            self.obstacles[oid] = ob
            self.config.obstacles = list(self.obstacles.values())
            extras["id"] = oid
        elif cmd == "remove_obstacle":
            oid = params.get("id")
            if oid not in self.obstacles:
                raise CommandError(f"unknown obstacle id {oid!r}")
            del self.obstacles[oid]
            self.config.obstacles = list(self.obstacles.values())
        elif cmd == "set_buoyancy":
            v = float(params.get("value"))
            if not np.isfinite(v):
                raise CommandError("buoyancy must be finite")
            self.config.buoyancy_coeff = v
        elif cmd == "step":
            n = int(params.get("n", 1))
            if n < 0:
                raise CommandError("step count must be non-negative")
        elif cmd == "pause":
            self.running = False
        elif cmd == "resume":
            self.running = True
        elif cmd == "reset":
            frame = int(params.get("frame", self.initial_frame))
            self.state = init_from_asset(self.asset, frame, self.config)
        elif cmd == "snapshot":
            extras.update({"step_index": self.state.step_index,
                           "clock": self.state.clock,
                           "total_mass": total_mass(self.state.density),
                           "max_divergence": max_divergence(self.state,
                                                            self.config.obstacles),
                           "running": self.running,
                           "obstacles": [{"id": i, **obstacle_to_dict(ob)}
                                         for i, ob in self.obstacles.items()]})
        self.session_seq += 1
        if record and cmd != "snapshot":
            self._log_record({"type": "cmd", "seq": seq, "cmd": cmd,
                              "params": params, "at_step": boundary})
        if cmd == "step":
            self._run_steps(int(params.get("n", 1)))
        return Ack(seq=seq, ok=True, applied_at_step=boundary,
                   session_seq=self.session_seq, extras=extras)

    def snapshot_state(self):
        """Immutable deep copy for out-of-band consumers."""
        return self.state.copy()


def replay_log(log_path, load_asset_fn=None, asset=None):
    """Rebuild a session from its JSONL command log. The asset is loaded
    from the logged path unless given explicitly."""
    from .asset import load_asset as _load

    load_asset_fn = load_asset_fn or _load
    with open(log_path, encoding="utf-8") as fh:
        records = [json.loads(line) for line in fh if line.strip()]
    if not records or records[0].get("type") != "init":
        raise ValueError("replay log must start with an init record")
    init = records[0]
    if asset is None:
        if not init.get("asset"):
            raise ValueError("log has no asset path; pass asset=")
        asset = load_asset_fn(init["asset"])
    session = Session(asset, config=config_from_dict(init["config"]),
                      frame=init["frame"])
    for rec in records[1:]:
        if rec["type"] == "cmd":
            session.apply_command(rec["seq"], rec["cmd"], rec["params"], record=False)
        elif rec["type"] == "auto_step":
            session.step_once(record=False)
        else:
            raise ValueError(f"unknown log record type {rec['type']!r}")
    return session
