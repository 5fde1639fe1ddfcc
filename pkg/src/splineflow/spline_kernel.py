"""Constant coefficient matrix, per-segment cubic fits and the Bezier blend.

Each group of four points P1..P4 yields three cubic segments u_k, k = 1, 2, 3,
t in [0, 1].  Their coefficients come from one fixed 4x5 integer matrix

    (a, b, c, d) = T @ (P_{k+1}, P_k, B, C, e)

where B, C are the group Bezier power coefficients and the fifth entry ``e``
depends on the convention: ``bezier_A`` uses the Bezier coefficient A (the
value that makes the slope/curvature rows consistent, so constant data stays
constant), ``paper_literal`` uses the constant 1.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError, NumericError, RangeError
from .flow_model import GroupOfFour

_T = np.array(
    [
        [1, -1, -3, -1, -6],
        [0, 0, 1, 0, 3],
        [0, 0, 2, 1, 3],
        [0, 1, 0, 0, 0],
    ],
    dtype=np.int64,
)
_T.setflags(write=False)
_TF = _T.astype(np.float64)
_TF.setflags(write=False)

# (row, col, value) of the 11 nonzeros, row-major
T_NONZEROS = tuple((int(r), int(c), float(_T[r, c])) for r, c in zip(*np.nonzero(_T)))


class Convention(str, enum.Enum):
    BEZIER_A = "bezier_A"
    PAPER_LITERAL = "paper_literal"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        key = str(value).replace("-", "_").lower()
        for member in cls:
            if member.value.lower() == key:
                return member
        raise InvalidArgumentError(f"unknown convention {value!r}")

    @property
    def cli_name(self):
        return self.value.replace("_", "-")


def t_matrix() -> np.ndarray:
    """The constant 4x5 integer matrix (a fresh, writable copy)."""
    return _T.copy()


def fifth_element(A, convention):
    if Convention.parse(convention) is Convention.BEZIER_A:
        return np.asarray(A, dtype=np.float64)
    return np.ones_like(np.asarray(A, dtype=np.float64))


def apply_t(stacked):
    """Multiply T into the last axis (length 5) of ``stacked``.

    The product is written as a fixed-order sum over the nonzeros of T, so
    every output element is computed the same way whatever the batch shape.
    """
    stacked = np.asarray(stacked, dtype=np.float64)
    if stacked.shape[-1] != 5:
        raise InvalidArgumentError(f"last axis must have length 5, got {stacked.shape}")
    x0, x1, x2, x3, x4 = np.moveaxis(stacked, -1, 0)
    # rows of T written out term by term, summed in the order of T_NONZEROS
    out = np.stack([
        x0 - x1 - 3.0 * x2 - x3 - 6.0 * x4,
        x2 + 3.0 * x4,
        2.0 * x2 + x3 + 3.0 * x4,
        x1 + 0.0,
    ], axis=-1)
    return out


@dataclass(frozen=True)
class SegmentCoeffs:
    """Cubic a t^3 + b t^2 + c t + d; ``coeffs`` has shape (4, dims)."""

    coeffs: np.ndarray
    k: int
    group_index: int | None = None

    @property
    def a(self):
        return self.coeffs[0]

    @property
    def b(self):
        return self.coeffs[1]

    @property
    def c(self):
        return self.coeffs[2]

    @property
    def d(self):
        return self.coeffs[3]


@dataclass(frozen=True)
class BlendParams:
    alpha: float = 0.5
    beta: float = 0.5
    allow_unnormalized: bool = False

    def __post_init__(self):
        for name in ("alpha", "beta"):
            v = getattr(self, name)
            if not 0.0 < v < 1.0:
                raise InvalidArgumentError(f"{name} must lie strictly in (0, 1), got {v}")
        if not self.allow_unnormalized and abs(self.alpha + self.beta - 1.0) > 1e-12:
            raise InvalidArgumentError(
                f"alpha + beta must equal 1 (got {self.alpha + self.beta}); "
                "set allow_unnormalized to override")


def _check_k(k):
    if k not in (1, 2, 3):
        raise InvalidArgumentError(f"segment index k must be 1, 2 or 3, got {k!r}")


def segment_coeffs(group: GroupOfFour, k: int, conv=Convention.BEZIER_A) -> SegmentCoeffs:
    _check_k(k)
    P = group.points
    A, B, C, _ = group.bezier
    stacked = np.stack([P[k], P[k - 1], B, C, fifth_element(A, conv)], axis=-1)
    return SegmentCoeffs(apply_t(stacked).T.copy(), k, group.group_index)


def bezier_segment_coeffs(bezier, k):
    """Power coefficients in t of b((k - 1 + t) / 3) for bezier rows (A, B, C, D)."""
    _check_k(k)
    A, B, C, D = np.asarray(bezier, dtype=np.float64)
    s0 = (k - 1) / 3.0
    h = 1.0 / 3.0
    return np.stack([
        A * h**3,
        (3.0 * A * s0 + B) * h**2,
        (3.0 * A * s0**2 + 2.0 * B * s0 + C) * h,
        ((A * s0 + B) * s0 + C) * s0 + D,
    ])


def blend_arrays(bez_seg, u, alpha, beta):
    return alpha * np.asarray(bez_seg) + beta * np.asarray(u)


def blend(group: GroupOfFour, k: int, u: SegmentCoeffs, params: BlendParams = BlendParams()) -> SegmentCoeffs:
    """Coefficients of v(t) = alpha * b_k(t) + beta * u(t)."""
    _check_k(k)
    if u.k != k:
        raise InvalidArgumentError(f"spline belongs to segment {u.k}, not {k}")
    if u.group_index is not None and u.group_index != group.group_index:
        raise InvalidArgumentError(
            f"spline belongs to group {u.group_index}, not {group.group_index}")
    if u.coeffs.shape != (4, group.dims) or not np.array_equal(u.d, group.points[k - 1]):
        raise InvalidArgumentError("spline does not start at P_k of this group")
    bk = bezier_segment_coeffs(group.bezier, k)
    return SegmentCoeffs(blend_arrays(bk, u.coeffs, params.alpha, params.beta), k, group.group_index)


def horner(coeffs, t):
    """((a t + b) t + c) t + d for coeffs with leading axis of length 4."""
    a, b, c, d = np.asarray(coeffs, dtype=np.float64)
    return ((a * t + b) * t + c) * t + d


def eval_cubic(coeffs, t):
    """Evaluate a cubic at t in [0, 1].

    Accepts a SegmentCoeffs or an array with leading axis (a, b, c, d).  The
    value is computed as a dot product with (t^3, t^2, t, 1) and by Horner;
    disagreement beyond 1e-14 of the coefficient scale raises NumericError.
    """
    if not 0.0 <= t <= 1.0:
        raise RangeError(f"t must lie in [0, 1], got {t}")
    arr = coeffs.coeffs if isinstance(coeffs, SegmentCoeffs) else np.asarray(coeffs, dtype=np.float64)
    a, b, c, d = arr
    dot = a * (t * t * t) + b * (t * t) + c * t + d
    nested = ((a * t + b) * t + c) * t + d
    scale = np.abs(a) + np.abs(b) + np.abs(c) + np.abs(d)
    if np.any(np.abs(dot - nested) > 1e-14 * np.maximum(scale, np.finfo(float).tiny)):
        raise NumericError("dot-product and Horner evaluations disagree")
    return nested
