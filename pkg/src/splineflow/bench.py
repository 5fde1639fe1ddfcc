"""Benchmark harness: SPMD timings, scaling in M and flop cross-checks."""

from __future__ import annotations

import os

from .analysis import flops_coeffs, flops_values
from .flow_model import FlowField, generate_flow
from .partitioner import speedup_report


def available_cores():
    try:
        return len(os.sched_getaffinity(0))
    except AttributeError:  # not Linux
        return os.cpu_count() or 1


def bench_flow(M, N, seed=0):
    """Cheap synthetic flow for timing: uniform field, one RK4 step per sample."""
    fld = FlowField("uniform", 1.0, {"direction": (1.0, 0.5, 0.25)}, seed=seed, max_step=1.0)
    return generate_flow(fld, M, 3 * N + 1, 1.0)


def expected_flops(stage, M, N, V, dims):
    fit = flops_coeffs(M, N, dims)["sparse_actual"]
    ev = flops_values(M, N, V, dims)["exact"]
    return {"fit": fit, "eval": ev, "pipeline": fit + ev}[stage]


def instrumented_flops(stage, counts):
    fit = counts.get("coeff_sparse_actual", 0)
    ev = counts.get("eval", 0)
    return {"fit": fit, "eval": ev, "pipeline": fit + ev}[stage]


def run_bench(M_list, p_list, N=100, V=10, stages=("eval",), repeats=3, seed=0, **kwargs):
    """Rows for the bench report plus a list of warnings."""
    warnings_ = []
    cores = available_cores()
    if max(p_list) > cores:
        warnings_.append(f"host has {cores} usable core(s) but p up to {max(p_list)} requested; "
                         "speedup rows are not meaningful")
    rows = []
    for M in M_list:
        flow = bench_flow(M, N, seed)
        usable = [p for p in p_list if p <= M]
        for stage in stages:
            for r in speedup_report(flow, usable, stage, V, repeats=repeats, **kwargs):
                rows.append({
                    "p": r["p"], "M": M, "N": N, "V": V, "stage": stage,
                    "time_execution_s": r["time_execution"],
                    "time_cpu_s": r["time_cpu"],
                    "time_overhead_s": r["time_overhead"],
                    "speedup": r["speedup"],
                    "flops_instrumented": instrumented_flops(stage, r["flops"]),
                    "flops_exact": expected_flops(stage, M, N, V, flow.dims),
                })
    return rows, warnings_


def scaling_ratios(rows, stage="eval", p=1):
    """time(2m) / time(m) for every pair of M values that differ by a factor 2."""
    times = {r["M"]: r["time_execution_s"] for r in rows if r["stage"] == stage and r["p"] == p}
    return {m: times[2 * m] / times[m] for m in sorted(times) if 2 * m in times}
