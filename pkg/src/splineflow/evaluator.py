"""Batched evaluation of cubic segments through a tick matrix.

Each coefficient row (a, b, c, d) times the 4 x (V+1) tick matrix gives the
curve at t = 0, 1/V, ..., 1 in a single product.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .batch_sparse import CoeffPlane, FlopCounter, SplineFit
from .errors import IncompleteInputError, InvalidArgumentError, ShapeError


def tick_matrix(V: int) -> np.ndarray:
    """4 x (V+1) matrix whose column j is ((j/V)^3, (j/V)^2, j/V, 1)."""
    if not isinstance(V, (int, np.integer)) or V < 1:
        raise InvalidArgumentError(f"V must be a positive integer, got {V!r}")
    t = np.arange(V + 1, dtype=np.float64) / V
    t2 = t * t
    return np.stack([t2 * t, t2, t, np.ones_like(t)])


def eval_segment_batch(C, ticks, counter: FlopCounter | None = None) -> np.ndarray:
    """Product of coefficient rows with the tick matrix.

    ``C`` is a CoeffPlane or any array whose last axis is (a, b, c, d); the
    result replaces that axis with the V + 1 tick values.  The product is
    accumulated term by term so each entry is independent of the batch shape.
    """
    arr = C.values if isinstance(C, CoeffPlane) else np.asarray(C, dtype=np.float64)
    ticks = np.asarray(ticks, dtype=np.float64)
    if arr.shape[-1:] != (4,) or ticks.ndim != 2 or ticks.shape[0] != 4:
        raise ShapeError(f"cannot multiply coefficients {arr.shape} by ticks {ticks.shape}")
    out = arr[..., 0, None] * ticks[0]
    for r in (1, 2, 3):
        out += arr[..., r, None] * ticks[r]
    if counter is not None:
        counter.add("eval", 8 * (arr.size // 4) * ticks.shape[1])
    return out


@dataclass(frozen=True)
class Snapshot:
    """Fine polylines, shape (M, 3 N V + 1, 3); z is zero for 2D flows."""

    points: np.ndarray
    V: int
    dims: int

    @property
    def M(self):
        return self.points.shape[0]

    @property
    def n_points(self):
        return self.points.shape[1]

    def __eq__(self, other):
        if not isinstance(other, Snapshot):
            return NotImplemented
        return (self.V == other.V and self.dims == other.dims
                and self.points.shape == other.points.shape
                and bool(np.array_equal(self.points, other.points)))

    __hash__ = None


def planes_to_coeffs(planes, N, dims):
    """Stack a {(group, k, dim): CoeffPlane} mapping into an (M, N, 3, dims, 4) array."""
    if not isinstance(planes, Mapping):
        planes = {(p.group_index, p.k, p.dim): p for p in planes}
    missing = [(g, k, d) for g in range(N) for k in (1, 2, 3) for d in range(dims)
               if (g, k, d) not in planes]
    if missing:
        raise IncompleteInputError(f"{len(missing)} coefficient plane(s) missing, first {missing[0]}")
    M = next(iter(planes.values())).M
    out = np.empty((M, N, 3, dims, 4))
    for (g, k, d), p in planes.items():
        if not (0 <= g < N and 0 <= d < dims):
            continue
        if p.values.shape != (M, 4):
            raise ShapeError(f"plane {(g, k, d)} has shape {p.values.shape}, expected {(M, 4)}")
        out[:, g, k - 1, d] = p.values
    return out


def assemble_snapshot(fit, V: int, counter: FlopCounter | None = None,
                      N: int | None = None, dims: int | None = None, out=None) -> Snapshot:
    """Evaluate all 3N segments of every trajectory and join them.

    ``fit`` is a SplineFit or a collection of CoeffPlanes (then ``N`` and
    ``dims`` are required).  The t = 0 sample of every segment after the first
    is dropped, giving 3 N V + 1 points per trajectory.  ``out`` may be a
    preallocated zero-filled (M, 3 N V + 1, 3) array to write into.
    """
    if isinstance(fit, SplineFit):
        coeffs = fit.coeffs
    else:
        if N is None or dims is None:
            raise InvalidArgumentError("N and dims are required when passing planes")
        coeffs = planes_to_coeffs(fit, N, dims)
    ticks = tick_matrix(V)
    M, N, _, d, _ = coeffs.shape
    shape = (M, 3 * N * V + 1, 3)
    if out is None:
        out = np.zeros(shape)
    elif out.shape != shape:
        raise ShapeError(f"output array has shape {out.shape}, expected {shape}")
    for g in range(N):
        vals = eval_segment_batch(coeffs[:, g], ticks, counter)  # (M, 3, d, V+1)
        for k in range(3):
            j = 3 * g + k
            seg = np.swapaxes(vals[:, k], 1, 2)  # (M, V+1, d)
            if j == 0:
                out[:, : V + 1, :d] = seg
            else:
                out[:, j * V + 1: (j + 1) * V + 1, :d] = seg[:, 1:]
    return Snapshot(out, int(V), int(d))
