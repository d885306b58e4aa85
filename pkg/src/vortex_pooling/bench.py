"""Timing harness for the pooling pyramid implementations.

Every contender is first run on a float64 copy of the input and checked
against the direct-summation pyramid; timings are only produced once all
contenders agree.
"""
from __future__ import annotations

import statistics
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from .footprint import pyramid_cost
from .pooling import (
    OpCounter,
    PoolSpec,
    _check_pyramid_args,
    _pad_hw,
    count_map,
    pyramid_cascaded,
    pyramid_naive,
)
from .tensor import as_fmap, rng_fill

GATE_TOL = 1e-9


class BenchmarkMismatch(RuntimeError):
    """Two implementations disagreed, so no timing is reported."""


@dataclass
class BenchResult:
    impl_name: str
    h: int
    w: int
    c: int
    dtype: str
    reps: int
    median_ns: int
    per_element_ns: float
    add_count: int
    threads: int = 1
    speedup_vs_naive: float = 1.0

    def to_json_dict(self) -> dict:
        return asdict(self)


def pyramid_integral(x, base_k: int = 3, levels: int = 3, counter=None):
    """Pyramid levels from summed-area tables; timed contender only, never an oracle."""
    x = as_fmap(x)
    _check_pyramid_args(base_k, levels)
    h, w, c = x.shape
    maps = []
    for i in range(1, levels + 1):
        k = base_k**i
        r = (k - 1) // 2
        xp = _pad_hw(np.asarray(x, dtype=np.float64), r)
        sat = np.zeros((xp.shape[0] + 1, xp.shape[1] + 1, c))
        np.cumsum(np.cumsum(xp, axis=0), axis=1, out=sat[1:, 1:])
        s = sat[k:k + h, k:k + w] - sat[:h, k:k + w] - sat[k:k + h, :w] + sat[:h, :w]
        if counter is not None:
            counter.adds += 2 * xp.size + 3 * s.size
            counter.divides += s.size
        maps.append((s / count_map(h, w, PoolSpec(k))).astype(x.dtype))
    return maps


def _naive(x, k, levels, counter=None):
    return pyramid_naive(x, k, levels, counter).maps


def _cascaded(x, k, levels, counter=None):
    return pyramid_cascaded(x, k, levels, counter).maps


IMPLS = {"naive": _naive, "cascaded": _cascaded, "integral": pyramid_integral}


def _run_threaded(fn, x, k, levels, threads, pool):
    if threads <= 1 or x.shape[2] == 1:
        return fn(x, k, levels)
    chunks = np.array_split(np.arange(x.shape[2]), min(threads, x.shape[2]))
    parts = list(pool.map(lambda idx: fn(x[:, :, idx], k, levels), chunks))
    return [np.concatenate([p[i] for p in parts], axis=2) for i in range(levels)]


def check_agreement(x, k, levels, impls=("naive", "cascaded", "integral"), tol=GATE_TOL):
    """Max abs deviation of each contender from the naive pyramid, on float64 input."""
    x64 = np.asarray(x, dtype=np.float64)
    ref = IMPLS["naive"](x64, k, levels)
    worst = {}
    for name in impls:
        if name == "naive":
            continue
        got = IMPLS[name](x64, k, levels)
        worst[name] = max(float(np.max(np.abs(a - b))) for a, b in zip(got, ref))
        if not worst[name] <= tol:
            raise BenchmarkMismatch(
                f"{name} deviates from naive by {worst[name]:.3e} (> {tol:.0e})")
    return worst


def bench_pyramid(k: int = 3, levels: int = 3, h: int = 129, w: int = 129, c: int = 64,
                  dtype="f32", reps: int = 5, warmup: int = 3, threads: int = 1,
                  seed: int = 0, impls=("naive", "cascaded", "integral")) -> list:
    if reps < 5:
        raise ValueError("reps must be >= 5")
    if warmup < 3:
        raise ValueError("warmup must be >= 3")
    if min(h, w, c) < 1:
        raise ValueError("dims must be positive")
    np_dtype = {"f32": np.float32, "f64": np.float64}[dtype]
    x = rng_fill(seed, h, w, c, np_dtype)
    check_agreement(x, k, levels, impls)

    counts = {}
    for name in impls:
        counter = OpCounter()
        IMPLS[name](x, k, levels, counter)
        counts[name] = counter.adds
    times = {name: [] for name in impls}
    with ThreadPoolExecutor(max_workers=max(threads, 1)) as pool:
        for _ in range(warmup):
            for name in impls:
                _run_threaded(IMPLS[name], x, k, levels, threads, pool)
        # interleave contenders so clock and cache drift hit all of them alike
        for _ in range(reps):
            for name in impls:
                t0 = time.perf_counter_ns()
                _run_threaded(IMPLS[name], x, k, levels, threads, pool)
                times[name].append(time.perf_counter_ns() - t0)
    results = []
    for name in impls:
        med = int(statistics.median(times[name]))
        results.append(BenchResult(name, h, w, c, dtype, reps, med, med / (h * w * c),
                                   counts[name], threads))
    base = next((r.median_ns for r in results if r.impl_name == "naive"), None)
    if base:
        for r in results:
            r.speedup_vs_naive = base / r.median_ns
    return results


def predicted_adds(k, levels, h, w, c, impl) -> int:
    return pyramid_cost(k, levels, h, w, c, impl).pool_adds
