"""SPMD execution over disjoint trajectory shards.

Workers are threads in one process.  Each runs the same pure kernel on its
own contiguous range of trajectories and writes into a pre-assigned slice of
the output; there is no communication between workers.

Timing: ``time_cpu`` of a worker is its thread CPU time spent in the kernel.
The aggregate ``time_cpu`` is the sum over workers divided by p, and
``time_overhead`` is the wall clock of the parallel region minus that, so
``time_execution = time_cpu + time_overhead``.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .batch_sparse import FlopCounter, SplineFit, fit_flow
from .errors import DivisibilityError, InvalidArgumentError, ShardError
from .evaluator import Snapshot, assemble_snapshot
from .flow_model import Flow, truncate_flow
from .spline_kernel import BlendParams, Convention

STAGES = ("fit", "eval", "pipeline")
OVERHEAD_FORMULA = "time_overhead = wall - sum(worker_cpu) / p"


@dataclass(frozen=True)
class Partition:
    p: int
    shards: tuple  # of (start, stop), 0-based half-open

    @property
    def sizes(self):
        return tuple(b - a for a, b in self.shards)


def partition(M: int, p: int, mode: str = "strict") -> Partition:
    if mode not in ("strict", "relaxed"):
        raise InvalidArgumentError(f"mode must be 'strict' or 'relaxed', got {mode!r}")
    if p < 1 or M < 1:
        raise InvalidArgumentError(f"need M >= 1 and p >= 1, got M={M}, p={p}")
    if p > M:
        raise InvalidArgumentError(f"more workers than trajectories: p={p} > M={M}")
    if mode == "strict" and M % p:
        raise DivisibilityError(f"strict partitioning needs M mod p == 0 (M={M}, p={p})")
    base, extra = divmod(M, p)
    shards, start = [], 0
    for i in range(p):
        stop = start + base + (1 if i < extra else 0)
        shards.append((start, stop))
        start = stop
    return Partition(p, tuple(shards))


@dataclass(frozen=True)
class TimingBreakdown:
    time_execution: float
    time_cpu: float
    time_overhead: float
    worker_cpu: tuple = ()
    worker_idle: tuple = ()
    formula: str = OVERHEAD_FORMULA

    @classmethod
    def from_measurements(cls, wall, worker_cpu):
        cpu = sum(worker_cpu) / len(worker_cpu)
        overhead = max(wall - cpu, 0.0)
        idle = tuple(max(wall - w, 0.0) for w in worker_cpu)
        return cls(cpu + overhead, cpu, overhead, tuple(worker_cpu), idle)


@dataclass
class SpmdResult:
    fit: SplineFit | None = None
    snapshot: Snapshot | None = None
    flops: FlopCounter = field(default_factory=FlopCounter)


def run_spmd(flow: Flow, p: int, stage: str = "pipeline", V: int = 10,
             conv=Convention.BEZIER_A, params: BlendParams | None = None,
             curve: str = "v", mode: str = "relaxed", fit: SplineFit | None = None,
             strict_length: bool = True):
    """Run a stage over p worker threads.

    Returns ``(SpmdResult, TimingBreakdown)``.  For ``stage="eval"`` the
    coefficients are taken from ``fit`` or computed serially beforehand
    (outside the timed region).
    """
    if stage not in STAGES:
        raise InvalidArgumentError(f"stage must be one of {STAGES}, got {stage!r}")
    conv = Convention.parse(conv)
    params = params if params is not None else BlendParams()
    flow = truncate_flow(flow, strict=strict_length)
    part = partition(flow.M, p, mode)
    if stage == "eval" and fit is None:
        fit = fit_flow(flow, conv, params, curve)

    M, N, d = flow.M, flow.N, flow.dims
    coeffs = np.empty((M, N, 3, d, 4)) if stage != "eval" else fit.coeffs
    snap_pts = np.zeros((M, 3 * N * V + 1, 3)) if stage != "fit" else None
    counters = [FlopCounter() for _ in part.shards]

    def work(i):
        a, b = part.shards[i]
        t0 = time.thread_time()
        try:
            if stage == "eval":
                sub = SplineFit(coeffs[a:b], fit.convention, fit.alpha, fit.beta, fit.curve, fit.dt)
            else:
                sub = fit_flow(flow.subset(a, b), conv, params, curve, counter=counters[i])
                coeffs[a:b] = sub.coeffs
            if snap_pts is not None:
                assemble_snapshot(sub, V, counters[i], out=snap_pts[a:b])
        except Exception as exc:  # attributed to the shard
            raise ShardError((a, b), exc) from exc
        return time.thread_time() - t0

    wall0 = time.perf_counter()
    with ThreadPoolExecutor(max_workers=p) as pool:
        futures = [pool.submit(work, i) for i in range(p)]
        worker_cpu = [f.result() for f in futures]
    wall = time.perf_counter() - wall0

    flops = FlopCounter()
    for c in counters:
        flops.merge(c)
    if stage != "eval":
        # the dense-theoretic count models one 4M x 5M product per group over the whole flow
        flops.counts["coeff_dense_theoretic"] = 40 * M * M * N
        fit = SplineFit(coeffs, conv, params.alpha, params.beta, curve, flow.dt)
    result = SpmdResult(fit=fit if stage != "eval" else None, flops=flops)
    if snap_pts is not None:
        result.snapshot = Snapshot(snap_pts, int(V), d)
    return result, TimingBreakdown.from_measurements(wall, worker_cpu)


def speedup_report(flow: Flow, p_list, stage: str = "pipeline", V: int = 10,
                   repeats: int = 3, mode: str = "relaxed", **kwargs):
    """Rows of (p, time_execution, time_cpu, time_overhead, speedup).

    Each configuration is run ``repeats`` times and the fastest run kept.
    Speedup is relative to the p = 1 execution time.
    """
    fit = None
    if stage == "eval":
        fit = fit_flow(truncate_flow(flow), kwargs.get("conv", Convention.BEZIER_A),
                       kwargs.get("params"), kwargs.get("curve", "v"))
    rows = []
    base = None
    for p in [1] + [q for q in p_list if q != 1]:
        best = flops = None
        for _ in range(max(1, repeats)):
            res, tb = run_spmd(flow, p, stage, V, mode=mode, fit=fit, **kwargs)
            if best is None or tb.time_execution < best.time_execution:
                best, flops = tb, res.flops
        if p == 1:
            base = best.time_execution
        rows.append({
            "p": p,
            "time_execution": best.time_execution,
            "time_cpu": best.time_cpu,
            "time_overhead": best.time_overhead,
            "speedup": 1.0 if p == 1 else base / best.time_execution,
            "worker_cpu": best.worker_cpu,
            "flops": dict(flops.counts),
        })
    wanted = set(p_list)
    return [r for r in rows if r["p"] in wanted]
