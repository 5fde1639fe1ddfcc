"""CFL arithmetic, time-step equivalence, flop estimates and error metrics."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import InvalidArgumentError
from .flow_model import GroundTruth


def _positive(name, value):
    if not (isinstance(value, (int, float, np.integer, np.floating)) and math.isfinite(value) and value > 0):
        raise InvalidArgumentError(f"{name} must be a positive finite number, got {value!r}")


def cfl_max_timestep(space_step, speed):
    """Largest stable time step, space_step / speed (s)."""
    _positive("speed", speed)
    if not math.isfinite(space_step):
        raise InvalidArgumentError("space_step must be finite")
    return space_step / speed


def cfl_min_spacestep(time_step, speed):
    """Smallest space step compatible with ``time_step``, time_step * speed (cm)."""
    _positive("time_step", time_step)
    _positive("speed", speed)
    return time_step * speed


@dataclass(frozen=True)
class EquivalenceReport:
    dt_splines: float
    dt_fd: float
    ratio: float
    label: str = "heuristic equivalence"


def virtual_equivalence(L, N, V, s) -> EquivalenceReport:
    """Time steps of the spline method and of the V-times-finer FD grid.

    dt_splines = L / (3 N s) and dt_fd = L / (3 N V s).  Evaluated in exact
    rational arithmetic and rounded once, so ``ratio`` is exactly V.
    """
    for name, v in (("L", L), ("N", N), ("V", V), ("s", s)):
        _positive(name, v)
    Lq, Nq, Vq, sq = (Fraction(x) for x in (L, N, V, s))
    dt_s = Lq / (3 * Nq * sq)
    dt_f = Lq / (3 * Nq * Vq * sq)
    return EquivalenceReport(float(dt_s), float(dt_f), float(dt_s / dt_f))


def flops_coeffs(M, N, dims=3):
    """Flop counts for computing all coefficients of a flow.

    ``dense_theoretic`` = 2 (4M)(5M) N, one full G product per group;
    ``paper_order`` = 10 M^2 N; ``sparse_actual`` = 2 * 11M * 3N * dims.
    """
    for name, v in (("M", M), ("N", N), ("dims", dims)):
        _positive(name, v)
    return {
        "dense_theoretic": 40 * M * M * N,
        "paper_order": 10 * M * M * N,
        "sparse_actual": 2 * 11 * M * 3 * N * dims,
    }


def flops_values(M, N, V, dims=1):
    """Flop counts for evaluating all cubics: exact 8 M (V+1) 3N per dimension."""
    for name, v in (("M", M), ("N", N), ("V", V), ("dims", dims)):
        _positive(name, v)
    return {
        "exact": 8 * M * (V + 1) * 3 * N * dims,
        "paper_order": 10 * M * V * N,
    }


def order_of_magnitude(x):
    return int(math.floor(math.log10(x)))


@dataclass(frozen=True)
class ErrorMetrics:
    max_deviation: float
    rms_deviation: float
    mean_chord: float

    @property
    def rel_max(self):
        return self.max_deviation / self.mean_chord

    @property
    def rel_rms(self):
        return self.rms_deviation / self.mean_chord


def point_to_polyline(points, polyline, chunk=4096):
    """Distance from each point to the nearest point of a polyline."""
    points = np.asarray(points, dtype=np.float64)
    poly = np.asarray(polyline, dtype=np.float64)
    if len(poly) == 1:
        return np.linalg.norm(points - poly[0], axis=1)
    a, b = poly[:-1], poly[1:]
    ab = b - a
    ab2 = np.einsum("ij,ij->i", ab, ab)
    safe = np.where(ab2 > 0, ab2, 1.0)
    out = np.empty(len(points))
    for s in range(0, len(points), chunk):
        p = points[s: s + chunk, None, :]
        t = np.einsum("pkj,kj->pk", p - a, ab) / safe
        t = np.clip(np.where(ab2 > 0, t, 0.0), 0.0, 1.0)
        nearest = a + t[..., None] * ab
        seg = np.min(np.sum((p - nearest) ** 2, axis=2), axis=1)
        # vertices exactly, so points lying on the polyline give zero
        vert = np.min(np.sum((p - poly) ** 2, axis=2), axis=1)
        out[s: s + chunk] = np.sqrt(np.minimum(seg, vert))
    return out


def mean_chord(coarse):
    coarse = np.asarray(coarse, dtype=np.float64)
    return float(np.mean(np.linalg.norm(np.diff(coarse, axis=0), axis=1)))


def trajectory_error(snapshot, truth, coarse=None) -> ErrorMetrics:
    """Deviation of a spline polyline from the reference trajectory.

    ``snapshot`` is an (n, d) polyline, ``truth`` a GroundTruth or polyline and
    ``coarse`` the data samples the spline came from (used for the mean chord
    normalizer; defaults to ``snapshot`` itself).
    """
    snap = np.asarray(snapshot, dtype=np.float64)
    ref = truth.polyline if isinstance(truth, GroundTruth) else np.asarray(truth, dtype=np.float64)
    if snap.size == 0 or ref.size == 0:
        raise InvalidArgumentError("trajectory_error needs non-empty polylines")
    d = min(snap.shape[1], ref.shape[1])
    dist = point_to_polyline(snap[:, :d], ref[:, :d])
    chord = mean_chord((snap if coarse is None else np.asarray(coarse))[:, :d])
    return ErrorMetrics(float(dist.max()), float(np.sqrt(np.mean(dist ** 2))), chord)


def pooled_error(per_traj):
    """Combine per-trajectory metrics (equal point counts assumed)."""
    per_traj = list(per_traj)
    return ErrorMetrics(
        max(m.max_deviation for m in per_traj),
        float(np.sqrt(np.mean([m.rms_deviation ** 2 for m in per_traj]))),
        float(np.mean([m.mean_chord for m in per_traj])),
    )
