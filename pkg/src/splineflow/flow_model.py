"""Trajectory data types, synthetic flow fields and 4-point grouping.

Units are centimeters and seconds everywhere. Points are always stored with
three coordinates; 2D flows keep z = 0 and record ``dims = 2``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import InvalidArgumentError, ShapeError

FIELD_KINDS = ("uniform", "vortex", "hill")

# kind -> (dims, default shape parameters)
_FIELD_DEFAULTS = {
    "uniform": (3, {"direction": (1.0, 0.0, 0.0), "spread": 1.0}),
    "vortex": (2, {"radius": 1.0, "center": (0.0, 0.0)}),
    "hill": (2, {"height": 2.0, "width": 5.0, "decay": 4.0, "x_start": -15.0,
                 "y_min": 0.5, "y_max": 6.0}),
}


def _frozen(a):
    a = np.ascontiguousarray(a, dtype=np.float64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Flow:
    """M trajectories of S points each.

    ``points`` has shape (M, S, 3); the z column is zero when ``dims == 2``.
    """

    points: np.ndarray
    dims: int = 3
    dt: float | None = None

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim != 3 or pts.shape[2] != 3:
            raise ShapeError(f"flow points must have shape (M, S, 3), got {pts.shape}")
        M, S, _ = pts.shape
        if M < 1 or S < 4:
            raise ShapeError(f"flow needs M >= 1 and S >= 4, got M={M}, S={S}")
        if self.dims not in (2, 3):
            raise InvalidArgumentError(f"dims must be 2 or 3, got {self.dims}")
        if not np.all(np.isfinite(pts)):
            raise InvalidArgumentError("flow coordinates must be finite")
        if self.dt is not None and not self.dt > 0:
            raise InvalidArgumentError(f"dt must be positive, got {self.dt}")
        object.__setattr__(self, "points", _frozen(pts))

    @classmethod
    def from_trajectories(cls, trajectories, dims=None, dt=None):
        """Build a flow from a sequence of (S, d) trajectories, d in {2, 3}."""
        trajs = [np.asarray(t, dtype=np.float64) for t in trajectories]
        if not trajs:
            raise ShapeError("flow needs at least one trajectory")
        lengths = {t.shape[0] for t in trajs}
        widths = {t.shape[1] if t.ndim == 2 else -1 for t in trajs}
        if len(lengths) != 1:
            raise ShapeError(f"ragged flow: trajectory lengths {sorted(lengths)}")
        if len(widths) != 1 or widths.pop() not in (2, 3):
            raise ShapeError("every trajectory must be an (S, 2) or (S, 3) array")
        arr = np.stack(trajs)
        d = arr.shape[2]
        if d == 2:
            arr = np.concatenate([arr, np.zeros(arr.shape[:2] + (1,))], axis=2)
        return cls(arr, dims=dims if dims is not None else d, dt=dt)

    @property
    def M(self):
        return self.points.shape[0]

    @property
    def S(self):
        return self.points.shape[1]

    @property
    def N(self):
        """Number of complete groups of four (shared endpoints)."""
        return (self.S - 1) // 3

    def coords(self):
        """Points restricted to the active dimensions, shape (M, S, dims)."""
        return self.points[:, :, : self.dims]

    def subset(self, start, stop):
        return Flow(self.points[start:stop], dims=self.dims, dt=self.dt)

    def __eq__(self, other):
        if not isinstance(other, Flow):
            return NotImplemented
        return (self.dims == other.dims and self.dt == other.dt
                and self.points.shape == other.points.shape
                and bool(np.array_equal(self.points, other.points)))

    __hash__ = None


@dataclass(frozen=True)
class GroupOfFour:
    points: np.ndarray  # (4, d)
    bezier: np.ndarray  # (4, d): rows A, B, C, D
    group_index: int

    @property
    def dims(self):
        return self.points.shape[1]


@dataclass(frozen=True)
class GroundTruth:
    polyline: np.ndarray  # (K, 3)
    fine_dt: float

    def __post_init__(self):
        if not self.fine_dt > 0:
            raise InvalidArgumentError("fine_dt must be positive")
        if len(self.polyline) < 2:
            raise InvalidArgumentError("ground truth needs at least 2 points")
        object.__setattr__(self, "polyline", _frozen(self.polyline))


@dataclass(frozen=True)
class FlowField:
    """Analytic, time-independent velocity field.

    ``speed`` is the scalar flow speed s in cm/s. For the vortex it is the
    tangential speed at ``radius``, so the angular speed is speed / radius.
    ``max_step`` bounds the internal RK4 step in seconds.
    """

    kind: str = "uniform"
    speed: float = 1.0
    params: dict = field(default_factory=dict)
    seed: int = 0
    max_step: float = 0.01

    def __post_init__(self):
        if self.kind not in FIELD_KINDS:
            raise InvalidArgumentError(f"unknown field kind {self.kind!r}; expected one of {FIELD_KINDS}")
        if not (math.isfinite(self.speed) and self.speed > 0):
            raise InvalidArgumentError(f"speed must be positive, got {self.speed}")
        if not self.max_step > 0:
            raise InvalidArgumentError("max_step must be positive")
        merged = dict(_FIELD_DEFAULTS[self.kind][1])
        unknown = set(self.params) - set(merged)
        if unknown:
            raise InvalidArgumentError(f"unknown {self.kind} parameters: {sorted(unknown)}")
        merged.update(self.params)
        object.__setattr__(self, "params", merged)

    @property
    def dims(self):
        return _FIELD_DEFAULTS[self.kind][0]

    @property
    def angular_speed(self):
        return self.speed / self.params["radius"]

    @property
    def period(self):
        """Revolution time of the vortex (None for other kinds)."""
        if self.kind != "vortex":
            return None
        return 2.0 * math.pi / self.angular_speed

    def velocity(self, pts):
        """Velocity at ``pts`` of shape (..., 3)."""
        pts = np.asarray(pts, dtype=np.float64)
        out = np.zeros_like(pts)
        p = self.params
        if self.kind == "uniform":
            d = np.asarray(p["direction"], dtype=np.float64)
            out[...] = self.speed * d / np.linalg.norm(d)
        elif self.kind == "vortex":
            w = self.angular_speed
            cx, cy = p["center"]
            out[..., 0] = -w * (pts[..., 1] - cy)
            out[..., 1] = w * (pts[..., 0] - cx)
        else:
            # terrain-following flow over a Gaussian hill h(x)
            x, y = pts[..., 0], pts[..., 1]
            h = p["height"] * np.exp(-0.5 * (x / p["width"]) ** 2)
            dh = -x / p["width"] ** 2 * h
            out[..., 0] = self.speed
            out[..., 1] = self.speed * dh * np.exp(-np.maximum(y, 0.0) / p["decay"])
        return out

    def seed_points(self, M):
        """M distinct, reproducible start points; the first is canonical."""
        rng = np.random.default_rng(self.seed)
        p = self.params
        pts = np.zeros((M, 3))
        if self.kind == "uniform":
            if M > 1:
                pts[1:, 1:] = rng.uniform(-p["spread"], p["spread"], size=(M - 1, 2))
        elif self.kind == "vortex":
            cx, cy = p["center"]
            r = np.full(M, p["radius"], dtype=np.float64)
            phase = np.zeros(M)
            if M > 1:
                r[1:] = p["radius"] * rng.uniform(0.5, 1.5, size=M - 1)
                phase[1:] = rng.uniform(0.0, 2.0 * math.pi, size=M - 1)
            pts[:, 0] = cx + r * np.cos(phase)
            pts[:, 1] = cy + r * np.sin(phase)
        else:
            pts[:, 0] = p["x_start"]
            pts[:, 1] = np.linspace(p["y_min"], p["y_max"], M) if M > 1 else p["y_min"]
            if M > 1:
                pts[1:, 0] += rng.uniform(-0.5, 0.5, size=M - 1)
        return pts


def _rk4_advance(fld, pts, interval):
    n = max(1, math.ceil(interval / fld.max_step - 1e-12))
    h = interval / n
    for _ in range(n):
        k1 = fld.velocity(pts)
        k2 = fld.velocity(pts + 0.5 * h * k1)
        k3 = fld.velocity(pts + 0.5 * h * k2)
        k4 = fld.velocity(pts + h * k3)
        pts = pts + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return pts


def _sample(fld, starts, intervals):
    out = np.empty((starts.shape[0], len(intervals) + 1, 3))
    cur = starts.copy()
    out[:, 0] = cur
    for j, dt in enumerate(intervals):
        cur = _rk4_advance(fld, cur, dt)
        out[:, j + 1] = cur
    return out


def generate_flow(fld: FlowField, M: int, S: int, coarse_dt: float) -> Flow:
    """Advect M seed points through ``fld`` and sample every ``coarse_dt``."""
    if not isinstance(M, (int, np.integer)) or M < 1:
        raise InvalidArgumentError(f"M must be a positive integer, got {M!r}")
    if not isinstance(S, (int, np.integer)) or S < 4:
        raise InvalidArgumentError(f"S must be an integer >= 4, got {S!r}")
    if not (coarse_dt > 0 and math.isfinite(coarse_dt)):
        raise InvalidArgumentError(f"coarse_dt must be positive, got {coarse_dt!r}")
    pts = _sample(fld, fld.seed_points(int(M)), [coarse_dt] * (int(S) - 1))
    if fld.dims == 2:
        pts[:, :, 2] = 0.0
    return Flow(pts, dims=fld.dims, dt=float(coarse_dt))


def ground_truth(fld: FlowField, start, duration: float, fine_dt: float) -> GroundTruth:
    """Finely sampled reference trajectory from the same RK4 integrator."""
    if not (fine_dt > 0 and duration > 0) or fine_dt > duration:
        raise InvalidArgumentError(
            f"need 0 < fine_dt <= duration, got fine_dt={fine_dt}, duration={duration}")
    start = np.asarray(start, dtype=np.float64).reshape(-1)
    if start.size == 2:
        start = np.append(start, 0.0)
    n = math.ceil(duration / fine_dt - 1e-9)
    intervals = [fine_dt] * (n - 1) + [duration - fine_dt * (n - 1)]
    poly = _sample(fld, start[None, :], intervals)[0]
    return GroundTruth(poly, float(fine_dt))


def bezier_power_coeffs(P1, P2, P3, P4):
    """Power-basis coefficients (A, B, C, D) of the cubic Bezier P1..P4.

    b(s) = A s^3 + B s^2 + C s + D with s in [0, 1]; works componentwise on
    scalars or arrays of matching shape.
    """
    P1, P2, P3, P4 = (np.asarray(P, dtype=np.float64) for P in (P1, P2, P3, P4))
    A = -P1 + 3.0 * P2 - 3.0 * P3 + P4
    B = 3.0 * P1 - 6.0 * P2 + 3.0 * P3
    C = -3.0 * P1 + 3.0 * P2
    D = P1.copy()
    return A, B, C, D


def _check_length(S, strict):
    rem = (S - 1) % 3
    if S < 4:
        raise ShapeError(f"a trajectory needs at least 4 points, got {S}")
    if rem:
        if strict:
            raise ShapeError(f"trajectory length S={S} does not satisfy (S - 1) mod 3 == 0")
        warnings.warn(f"dropping {rem} trailing point(s): S={S} is not 3N+1", stacklevel=3)
    return (S - 1) // 3


def group_indices(S, strict=True):
    """Index array of shape (N, 4) selecting the shared-endpoint groups."""
    N = _check_length(S, strict)
    return 3 * np.arange(N)[:, None] + np.arange(4)[None, :]


def group_points(trajectory: Sequence, strict: bool = True) -> list[GroupOfFour]:
    traj = np.asarray(trajectory, dtype=np.float64)
    if traj.ndim == 1:
        traj = traj[:, None]
    idx = group_indices(traj.shape[0], strict=strict)
    groups = []
    for g, rows in enumerate(idx):
        P = traj[rows]
        bez = np.stack(bezier_power_coeffs(*P))
        groups.append(GroupOfFour(P, bez, g))
    return groups


def flatten_groups(groups: Sequence[GroupOfFour]) -> np.ndarray:
    """Inverse of group_points: rejoin groups, keeping shared points once."""
    parts = [groups[0].points[:1]] + [g.points[1:] for g in groups]
    return np.concatenate(parts)


def truncate_flow(flow: Flow, strict: bool = True) -> Flow:
    """Return ``flow`` cut to S = 3N + 1 (relaxed) or validate it (strict)."""
    N = _check_length(flow.S, strict)
    if 3 * N + 1 == flow.S:
        return flow
    return Flow(flow.points[:, : 3 * N + 1], dims=flow.dims, dt=flow.dt)
