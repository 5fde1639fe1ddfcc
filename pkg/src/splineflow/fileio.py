"""Readers and writers for flow, coefficient, snapshot and report files.

CSV files start with a ``#splineflow-<kind> v1 key=value ...`` header and an
optional ``#config {json}`` line.  Floats are written with 17 significant
digits, so reading back gives the identical doubles.  Binary files are
little-endian and begin with a 4-byte magic.
"""

from __future__ import annotations

import io
import json
import math
import re
import struct
from pathlib import Path

import numpy as np

from .batch_sparse import SplineFit
from .errors import IncompleteInputError, ParseError
from .evaluator import Snapshot
from .flow_model import Flow
from .spline_kernel import Convention

FLOW_MAGIC = b"SFLW"
COEF_MAGIC = b"SCOF"
VERSION = 1

_FLOAT = "%.17g"
_HEADER_RE = re.compile(r"^#splineflow-(\w+) v(\d+)((?: \S+=\S*)*)\s*$")


def _fmt_dt(dt):
    return "none" if dt is None else repr(float(dt))


def _header(kind, **fields):
    return f"#splineflow-{kind} v{VERSION} " + " ".join(f"{k}={v}" for k, v in fields.items())


def _config_line(config):
    if config is None:
        return ""
    return "#config " + json.dumps(config, sort_keys=True, default=str) + "\n"


def parse_header(line, kind, path=None):
    m = _HEADER_RE.match(line.rstrip("\n"))
    if not m or m.group(1) != kind:
        raise ParseError(f"expected a '#splineflow-{kind}' header", 1, path)
    if int(m.group(2)) != VERSION:
        raise ParseError(f"unsupported version v{m.group(2)}", 1, path)
    fields = dict(tok.split("=", 1) for tok in m.group(3).split())
    return fields


def _field(fields, key, conv, path):
    if key not in fields:
        raise ParseError(f"header is missing '{key}'", 1, path)
    try:
        return conv(fields[key])
    except ValueError as exc:
        raise ParseError(f"bad header value {key}={fields[key]!r}: {exc}", 1, path) from None


def _parse_dt(s):
    return None if s == "none" else float(s)


def _read_lines(path):
    try:
        return Path(path).read_text().splitlines()
    except UnicodeDecodeError as exc:
        raise ParseError(f"not a text file: {exc}", None, path) from None


def _body(lines, ncols, path):
    """Numeric table from the non-comment lines, with line-numbered errors."""
    start = 0
    while start < len(lines) and lines[start].startswith("#"):
        start += 1
    body = lines[start:]
    try:
        arr = np.loadtxt(io.StringIO("\n".join(body)), delimiter=",", ndmin=2) if body else np.empty((0, ncols))
        if arr.shape[1] != ncols:
            raise ValueError
        if not np.all(np.isfinite(arr)):
            raise ValueError
        return arr, start
    except ValueError:
        pass
    for i, line in enumerate(body):
        parts = line.split(",")
        if len(parts) != ncols:
            raise ParseError(f"expected {ncols} columns, found {len(parts)}", start + i + 1, path)
        try:
            vals = [float(p) for p in parts]
        except ValueError:
            raise ParseError(f"non-numeric field in {line!r}", start + i + 1, path) from None
        if not all(math.isfinite(v) for v in vals):
            raise ParseError(f"non-finite value in {line!r}", start + i + 1, path)
    raise ParseError("malformed table", None, path)


def read_config(path):
    """The embedded RunConfig dict of a CSV output, or None."""
    for line in _read_lines(path)[:3]:
        if line.startswith("#config "):
            return json.loads(line[len("#config "):])
    return None


def _index_columns(arr, cols, shape, start, path):
    idx = arr[:, cols]
    if np.any(idx != np.round(idx)) or np.any(idx < 0):
        raise ParseError("index columns must be non-negative integers", start + 1, path)
    idx = idx.astype(np.int64)
    for c, n in enumerate(shape):
        bad = np.nonzero(idx[:, c] >= n)[0]
        if bad.size:
            raise ParseError(f"index {idx[bad[0], c]} out of range (< {n})", start + bad[0] + 1, path)
    flat = np.ravel_multi_index(tuple(idx.T), shape)
    expected = int(np.prod(shape))
    if len(np.unique(flat)) != len(flat):
        raise ParseError("duplicate rows", None, path)
    if len(flat) < expected:
        raise IncompleteInputError(f"{path}: {expected - len(flat)} of {expected} rows missing")
    return flat


# ---------------------------------------------------------------- flow files

def write_flow_csv(flow: Flow, path, config=None):
    M, S = flow.M, flow.S
    with open(path, "w") as fh:
        fh.write(_header("flow", M=M, S=S, dims=flow.dims, dt=_fmt_dt(flow.dt)) + "\n")
        fh.write(_config_line(config))
        ids = np.indices((M, S)).reshape(2, -1).T
        table = np.hstack([ids, flow.points.reshape(-1, 3)])
        np.savetxt(fh, table, fmt=["%d", "%d", _FLOAT, _FLOAT, _FLOAT], delimiter=",")


def read_flow_csv(path) -> Flow:
    lines = _read_lines(path)
    if not lines:
        raise ParseError("empty file", None, path)
    f = parse_header(lines[0], "flow", path)
    M = _field(f, "M", int, path)
    S = _field(f, "S", int, path)
    dims = _field(f, "dims", int, path)
    dt = _field(f, "dt", _parse_dt, path)
    if M < 1 or S < 4 or dims not in (2, 3):
        raise ParseError(f"invalid header values M={M} S={S} dims={dims}", 1, path)
    arr, start = _body(lines, 5, path)
    flat = _index_columns(arr, [0, 1], (M, S), start, path)
    pts = np.empty((M * S, 3))
    pts[flat] = arr[:, 2:]
    return Flow(pts.reshape(M, S, 3), dims=dims, dt=dt)


def _write_trailer(fh, config):
    blob = json.dumps(config, sort_keys=True, default=str).encode() if config is not None else b""
    fh.write(struct.pack("<I", len(blob)))
    fh.write(blob)


def write_flow_bin(flow: Flow, path, config=None):
    dt = math.nan if flow.dt is None else float(flow.dt)
    with open(path, "wb") as fh:
        fh.write(FLOW_MAGIC)
        fh.write(struct.pack("<IQQBd", VERSION, flow.M, flow.S, flow.dims, dt))
        fh.write(np.ascontiguousarray(flow.coords(), dtype="<f8").tobytes())
        _write_trailer(fh, config)


def _unpack(fmt, data, offset, path):
    size = struct.calcsize(fmt)
    if len(data) < offset + size:
        raise ParseError("truncated binary file", None, path)
    return struct.unpack_from(fmt, data, offset), offset + size


def read_flow_bin(path) -> Flow:
    data = Path(path).read_bytes()
    if data[:4] != FLOW_MAGIC:
        raise ParseError("bad magic, expected SFLW", None, path)
    (ver, M, S, dims, dt), off = _unpack("<IQQBd", data, 4, path)
    if ver != VERSION or dims not in (2, 3):
        raise ParseError(f"unsupported version {ver} or dims {dims}", None, path)
    n = M * S * dims * 8
    if len(data) < off + n:
        raise ParseError("truncated binary file", None, path)
    coords = np.frombuffer(data, dtype="<f8", count=M * S * dims, offset=off).reshape(M, S, dims)
    pts = np.zeros((M, S, 3))
    pts[:, :, :dims] = coords
    return Flow(pts, dims=dims, dt=None if math.isnan(dt) else dt)


# --------------------------------------------------------- coefficient files

_CURVES = ("v", "u")
_CONVS = (Convention.BEZIER_A, Convention.PAPER_LITERAL)


def write_coeffs_csv(fit: SplineFit, path, config=None):
    M, N, _, d, _ = fit.coeffs.shape
    with open(path, "w") as fh:
        fh.write(_header("coeffs", M=M, N=N, dims=d, conv=fit.convention.value,
                         alpha=repr(fit.alpha), beta=repr(fit.beta), curve=fit.curve,
                         dt=_fmt_dt(fit.dt)) + "\n")
        fh.write(_config_line(config))
        ids = np.indices((M, N, 3, d)).reshape(4, -1).T
        ids[:, 2] += 1
        table = np.hstack([ids, fit.coeffs.reshape(-1, 4)])
        np.savetxt(fh, table, fmt=["%d"] * 4 + [_FLOAT] * 4, delimiter=",")


def read_coeffs_csv(path) -> SplineFit:
    lines = _read_lines(path)
    if not lines:
        raise ParseError("empty file", None, path)
    f = parse_header(lines[0], "coeffs", path)
    M = _field(f, "M", int, path)
    N = _field(f, "N", int, path)
    dims = _field(f, "dims", int, path)
    try:
        conv = Convention.parse(f.get("conv", ""))
    except ValueError:
        raise ParseError(f"unknown convention {f.get('conv')!r}", 1, path) from None
    alpha = _field(f, "alpha", float, path)
    beta = _field(f, "beta", float, path)
    curve = f.get("curve", "v")
    dt = _parse_dt(f.get("dt", "none"))
    if curve not in _CURVES or M < 1 or N < 1 or dims not in (2, 3):
        raise ParseError("invalid header values", 1, path)
    arr, start = _body(lines, 8, path)
    arr = arr.copy()
    arr[:, 2] -= 1
    flat = _index_columns(arr, [0, 1, 2, 3], (M, N, 3, dims), start, path)
    coeffs = np.empty((M * N * 3 * dims, 4))
    coeffs[flat] = arr[:, 4:]
    return SplineFit(coeffs.reshape(M, N, 3, dims, 4), conv, alpha, beta, curve, dt)


def write_coeffs_bin(fit: SplineFit, path, config=None):
    M, N, _, d, _ = fit.coeffs.shape
    dt = math.nan if fit.dt is None else float(fit.dt)
    with open(path, "wb") as fh:
        fh.write(COEF_MAGIC)
        fh.write(struct.pack("<IQQBBBddd", VERSION, M, N, d, _CONVS.index(fit.convention),
                             _CURVES.index(fit.curve), fit.alpha, fit.beta, dt))
        fh.write(np.ascontiguousarray(fit.coeffs, dtype="<f8").tobytes())
        _write_trailer(fh, config)


def read_coeffs_bin(path) -> SplineFit:
    data = Path(path).read_bytes()
    if data[:4] != COEF_MAGIC:
        raise ParseError("bad magic, expected SCOF", None, path)
    (ver, M, N, d, conv, curve, alpha, beta, dt), off = _unpack("<IQQBBBddd", data, 4, path)
    if ver != VERSION or d not in (2, 3) or conv > 1 or curve > 1:
        raise ParseError("unsupported binary coefficient header", None, path)
    count = M * N * 3 * d * 4
    if len(data) < off + 8 * count:
        raise ParseError("truncated binary file", None, path)
    coeffs = np.frombuffer(data, dtype="<f8", count=count, offset=off).reshape(M, N, 3, d, 4).copy()
    return SplineFit(coeffs, _CONVS[conv], alpha, beta, _CURVES[curve], None if math.isnan(dt) else dt)


def _magic(path):
    with open(path, "rb") as fh:
        return fh.read(4)


def read_flow(path) -> Flow:
    return read_flow_bin(path) if _magic(path) == FLOW_MAGIC else read_flow_csv(path)


def read_coeffs(path) -> SplineFit:
    return read_coeffs_bin(path) if _magic(path) == COEF_MAGIC else read_coeffs_csv(path)


def write_flow(flow, path, fmt="csv", config=None):
    (write_flow_bin if fmt == "bin" else write_flow_csv)(flow, path, config)


def write_coeffs(fit, path, fmt="csv", config=None):
    (write_coeffs_bin if fmt == "bin" else write_coeffs_csv)(fit, path, config)


# ------------------------------------------------------------ snapshot files

def write_snapshot_csv(snap: Snapshot, path, config=None):
    M, P = snap.M, snap.n_points
    with open(path, "w") as fh:
        fh.write(_header("snap", M=M, points=P, dims=snap.dims, V=snap.V) + "\n")
        fh.write(_config_line(config))
        ids = np.indices((M, P)).reshape(2, -1).T
        table = np.hstack([ids, snap.points.reshape(-1, 3)])
        np.savetxt(fh, table, fmt=["%d", "%d", _FLOAT, _FLOAT, _FLOAT], delimiter=",")


def read_snapshot_csv(path) -> Snapshot:
    lines = _read_lines(path)
    if not lines:
        raise ParseError("empty file", None, path)
    f = parse_header(lines[0], "snap", path)
    M = _field(f, "M", int, path)
    P = _field(f, "points", int, path)
    dims = _field(f, "dims", int, path)
    V = _field(f, "V", int, path)
    arr, start = _body(lines, 5, path)
    flat = _index_columns(arr, [0, 1], (M, P), start, path)
    pts = np.empty((M * P, 3))
    pts[flat] = arr[:, 2:]
    return Snapshot(pts.reshape(M, P, 3), V, dims)


def write_pairs_csv(truths, snap: Snapshot, path, config=None):
    """Paired truth/spline polylines for external plotting."""
    with open(path, "w") as fh:
        fh.write(_header("pairs", M=snap.M, dims=snap.dims, V=snap.V) + "\n")
        fh.write(_config_line(config))
        fh.write("traj_id,source,sample_idx,x,y,z\n")
        for i in range(snap.M):
            for source, poly in (("truth", truths[i]), ("spline", snap.points[i])):
                for j, (x, y, z) in enumerate(poly):
                    fh.write(f"{i},{source},{j},{x:.17g},{y:.17g},{z:.17g}\n")


def write_metrics_csv(rows, path, config=None):
    """rows: iterable of (metric, value, units)."""
    with open(path, "w") as fh:
        fh.write(_config_line(config))
        fh.write("metric,value,units\n")
        for metric, value, units in rows:
            val = repr(value) if isinstance(value, float) else str(value)
            fh.write(f"{metric},{val},{units}\n")


BENCH_COLUMNS = ("p", "M", "N", "V", "stage", "time_execution_s", "time_cpu_s",
                 "time_overhead_s", "speedup", "flops_instrumented", "flops_exact")


def write_bench_csv(rows, path, warnings_=(), config=None):
    with open(path, "w") as fh:
        fh.write(_config_line(config))
        for w in warnings_:
            fh.write(f"#warning {w}\n")
        fh.write(",".join(BENCH_COLUMNS) + "\n")
        for r in rows:
            fh.write(",".join(str(r[c]) for c in BENCH_COLUMNS) + "\n")
