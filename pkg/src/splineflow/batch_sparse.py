"""Block-diagonal global matrix G and batched coefficient computation.

G is 4M x 5M with M copies of the constant block T on its diagonal.  Three
storages represent the same operator:

* ``constant_block`` keeps only T and applies it to each 5-slice of the input
  (the execution path);
* ``csr`` is an explicit compressed-sparse-row matrix (float64 values,
  int32 column indices, int64 row offsets);
* ``dense`` materializes all 20 M^2 entries (oracle use, small M only).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import InvalidArgumentError, ShapeError
from .flow_model import Flow, bezier_power_coeffs, group_indices, truncate_flow
from .spline_kernel import (
    T_NONZEROS,
    BlendParams,
    Convention,
    apply_t,
    bezier_segment_coeffs,
    fifth_element,
    t_matrix,
)

STORAGES = ("constant_block", "csr", "dense")
NNZ_PER_BLOCK = len(T_NONZEROS)  # 11

VALUE_BYTES = np.dtype(np.float64).itemsize
INDEX_BYTES = np.dtype(np.int32).itemsize
OFFSET_BYTES = np.dtype(np.int64).itemsize
COUNT_BYTES = 8  # block count stored as u64


class FlopCounter:
    """Accumulates instrumented floating point operation counts by category."""

    def __init__(self):
        self.counts = {}

    def add(self, key, n):
        self.counts[key] = self.counts.get(key, 0) + int(n)

    def __getitem__(self, key):
        return self.counts.get(key, 0)

    def merge(self, other):
        for k, v in other.counts.items():
            self.add(k, v)


class BlockSparseG:
    def __init__(self, M, storage="constant_block"):
        if not isinstance(M, (int, np.integer)) or M < 1:
            raise InvalidArgumentError(f"M must be a positive integer, got {M!r}")
        if storage not in STORAGES:
            raise InvalidArgumentError(f"unknown storage {storage!r}; expected one of {STORAGES}")
        self.M = int(M)
        self.storage = storage
        self.block = t_matrix()
        self.indptr = self.indices = self.data = self.dense = None
        if storage == "csr":
            self._build_csr()
        elif storage == "dense":
            self.dense = np.kron(np.eye(self.M), self.block.astype(np.float64))

    def _build_csr(self):
        M = self.M
        rows = np.array([r for r, _, _ in T_NONZEROS])
        cols = np.array([c for _, c, _ in T_NONZEROS], dtype=np.int32)
        vals = np.array([v for _, _, v in T_NONZEROS])
        per_row = np.bincount(rows, minlength=4)
        counts = np.tile(per_row, M)
        self.indptr = np.zeros(4 * M + 1, dtype=np.int64)
        np.cumsum(counts, out=self.indptr[1:])
        blocks = np.arange(M, dtype=np.int32)[:, None]
        self.indices = (cols[None, :] + 5 * blocks).ravel()
        self.data = np.tile(vals, M)

    @property
    def shape(self):
        return (4 * self.M, 5 * self.M)

    @property
    def nnz(self):
        return NNZ_PER_BLOCK * self.M

    @property
    def density_exact(self):
        return Fraction(self.nnz, 20 * self.M * self.M)

    @property
    def density(self):
        return float(self.density_exact)

    def toarray(self):
        if self.dense is not None:
            return self.dense.copy()
        return np.kron(np.eye(self.M), self.block.astype(np.float64))

    def matvec(self, x):
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (5 * self.M,):
            raise ShapeError(f"G is {self.shape}, input has shape {x.shape}")
        if self.storage == "constant_block":
            return apply_t(x.reshape(self.M, 5)).ravel()
        if self.storage == "csr":
            return np.add.reduceat(self.data * x[self.indices], self.indptr[:-1])
        return self.dense @ x

    def __matmul__(self, x):
        return self.matvec(x)


def assemble_g(M, storage="constant_block") -> BlockSparseG:
    return BlockSparseG(M, storage)


@dataclass(frozen=True)
class StackedInput:
    """Length-5M vector of (P_{k+1}, P_k, B, C, e) tuples for one dimension."""

    values: np.ndarray
    group_index: int
    k: int
    dim: int
    convention: Convention

    @property
    def M(self):
        return self.values.shape[0] // 5


@dataclass(frozen=True)
class CoeffPlane:
    """M x 4 matrix of (a, b, c, d), one row per trajectory."""

    values: np.ndarray
    group_index: int
    k: int
    dim: int
    meta: dict = field(default_factory=dict)

    @property
    def M(self):
        return self.values.shape[0]


def _as_points(flow):
    """(M, S, d) array from a Flow or a (possibly ragged) list of trajectories."""
    if isinstance(flow, Flow):
        return flow.coords()
    try:
        arr = np.asarray(flow, dtype=np.float64)
    except ValueError:
        arr = None
    if arr is None or arr.ndim != 3:
        lengths = sorted({len(t) for t in flow})
        raise ShapeError(f"ragged or malformed flow (trajectory lengths {lengths})")
    return arr


def stacked_inputs(points, group_index, conv=Convention.BEZIER_A):
    """(M, 3, d, 5) stacked input tuples for all three segments of one group."""
    P = points[:, 3 * group_index: 3 * group_index + 4, :]  # (M, 4, d)
    A, B, C, _ = bezier_power_coeffs(P[:, 0], P[:, 1], P[:, 2], P[:, 3])
    e = fifth_element(A, conv)
    out = np.empty(P.shape[:1] + (3, P.shape[2], 5))
    for k in (1, 2, 3):
        out[:, k - 1, :, 0] = P[:, k]
        out[:, k - 1, :, 1] = P[:, k - 1]
        out[:, k - 1, :, 2] = B
        out[:, k - 1, :, 3] = C
        out[:, k - 1, :, 4] = e
    return out


def assemble_b(flow, group_index, k, conv=Convention.BEZIER_A, strict=True):
    """Stacked input vectors for segment ``k`` of group ``group_index``, one per dimension."""
    conv = Convention.parse(conv)
    if k not in (1, 2, 3):
        raise InvalidArgumentError(f"segment index k must be 1, 2 or 3, got {k!r}")
    pts = _as_points(flow)
    N = group_indices(pts.shape[1], strict=strict).shape[0]
    if not 0 <= group_index < N:
        raise InvalidArgumentError(f"group index {group_index} outside 0..{N - 1}")
    st = stacked_inputs(pts, group_index, conv)[:, k - 1]  # (M, d, 5)
    return [StackedInput(np.ascontiguousarray(st[:, d]).ravel(), group_index, k, d, conv)
            for d in range(st.shape[1])]


def batched_coeffs(G: BlockSparseG, b: StackedInput, counter: FlopCounter | None = None) -> CoeffPlane:
    values = b.values if isinstance(b, StackedInput) else np.asarray(b, dtype=np.float64)
    if values.shape != (G.shape[1],):
        raise ShapeError(f"G is {G.shape}, stacked input has shape {values.shape}")
    out = G.matvec(values).reshape(G.M, 4)
    if counter is not None:
        counter.add("coeff_sparse_actual", 2 * G.nnz)
    if isinstance(b, StackedInput):
        return CoeffPlane(out, b.group_index, b.k, b.dim, {"convention": b.convention.value})
    return CoeffPlane(out, -1, 0, -1)


def memory_report(M):
    """Bytes needed by each storage of G, with the widths actually used."""
    if M < 1:
        raise InvalidArgumentError("M must be positive")
    nnz = NNZ_PER_BLOCK * M
    return {
        "dense": 20 * M * M * VALUE_BYTES,
        "csr": nnz * (VALUE_BYTES + INDEX_BYTES) + (4 * M + 1) * OFFSET_BYTES,
        "constant_block": NNZ_PER_BLOCK * VALUE_BYTES + COUNT_BYTES,
    }


@dataclass(frozen=True)
class SplineFit:
    """All segment coefficients of a flow.

    ``coeffs`` has shape (M, N, 3, dims, 4): trajectory, group, segment k - 1,
    dimension, (a, b, c, d).  ``curve`` is ``"v"`` for the blended curve or
    ``"u"`` for the raw segment splines.
    """

    coeffs: np.ndarray
    convention: Convention = Convention.BEZIER_A
    alpha: float = 0.5
    beta: float = 0.5
    curve: str = "v"
    dt: float | None = None

    @property
    def M(self):
        return self.coeffs.shape[0]

    @property
    def N(self):
        return self.coeffs.shape[1]

    @property
    def dims(self):
        return self.coeffs.shape[3]

    def plane(self, group_index, k, dim):
        return CoeffPlane(self.coeffs[:, group_index, k - 1, dim, :], group_index, k, dim,
                          {"convention": self.convention.value, "curve": self.curve})

    def planes(self):
        for g in range(self.N):
            for k in (1, 2, 3):
                for d in range(self.dims):
                    yield self.plane(g, k, d)

    def same_settings(self, other):
        return (self.convention == other.convention and self.alpha == other.alpha
                and self.beta == other.beta and self.curve == other.curve)

    def __eq__(self, other):
        if not isinstance(other, SplineFit):
            return NotImplemented
        return (self.same_settings(other) and self.dt == other.dt
                and self.coeffs.shape == other.coeffs.shape
                and bool(np.array_equal(self.coeffs, other.coeffs)))

    __hash__ = None


def _bezier_segments(points, group_index):
    """(M, 3, d, 4) power coefficients of b((k - 1 + t)/3) for k = 1, 2, 3."""
    P = points[:, 3 * group_index: 3 * group_index + 4, :]
    bez = np.stack(bezier_power_coeffs(P[:, 0], P[:, 1], P[:, 2], P[:, 3]))  # (4, M, d)
    segs = [np.moveaxis(bezier_segment_coeffs(bez, k), 0, -1) for k in (1, 2, 3)]
    return np.stack(segs, axis=1)


def fit_flow(flow: Flow, conv=Convention.BEZIER_A, params=None, curve="v",
             storage="constant_block", counter: FlopCounter | None = None,
             strict=True) -> SplineFit:
    """Coefficients of every segment of every trajectory.

    One batched product per (group, segment, dimension); the constant-block
    path stacks the three segments and all dimensions of a group together.
    """
    conv = Convention.parse(conv)
    params = params if params is not None else BlendParams()
    if curve not in ("u", "v"):
        raise InvalidArgumentError(f"curve must be 'u' or 'v', got {curve!r}")
    flow = truncate_flow(flow, strict=strict)
    pts = flow.coords()
    M, _, d = pts.shape
    N = flow.N
    coeffs = np.empty((M, N, 3, d, 4))
    G = None if storage == "constant_block" else assemble_g(M, storage)
    for g in range(N):
        if G is None:
            u = apply_t(stacked_inputs(pts, g, conv))
            if counter is not None:
                counter.add("coeff_sparse_actual", 2 * NNZ_PER_BLOCK * M * 3 * d)
        else:
            u = np.empty((M, 3, d, 4))
            for k in (1, 2, 3):
                for b in assemble_b(pts, g, k, conv):
                    u[:, k - 1, b.dim] = batched_coeffs(G, b, counter).values
        if counter is not None:
            counter.add("coeff_dense_theoretic", 2 * (4 * M) * (5 * M))
        if curve == "v":
            u = params.alpha * _bezier_segments(pts, g) + params.beta * u
        coeffs[:, g] = u
    return SplineFit(coeffs, conv, params.alpha, params.beta, curve, flow.dt)
