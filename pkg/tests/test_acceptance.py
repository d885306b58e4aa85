"""Acceptance criteria, one test each.

Run with ``pytest tests/test_acceptance.py -s`` to see one PASS/FAIL line per
criterion together with its measured value and wall time.
"""
import time

import numpy as np

from vortex_pooling.bench import bench_pyramid
from vortex_pooling.footprint import counted, footprint, footprint_oracle, op_count
from vortex_pooling.modules import (
    aspp_config,
    aspp_plus_config,
    module_a_config,
    module_b_config,
    random_bank,
)
from vortex_pooling.pooling import PoolSpec, avg_pool, count_map, sum_pool
from vortex_pooling.suites import (
    adjoint_suite,
    gradient_suite,
    module_equivalence,
    pyramid_equivalence,
)
from vortex_pooling.tensor import rng_fill


def report(n, title, ok, detail, started, limit):
    elapsed = time.perf_counter() - started
    in_time = elapsed < limit
    status = "PASS" if ok and in_time else "FAIL"
    print(f"\n[{status}] criterion {n}: {title}: {detail} ({elapsed:.2f}s, limit {limit}s)")
    assert ok, detail
    assert in_time, f"took {elapsed:.2f}s, limit {limit}s"


def test_1_utilization_ratios():
    t0 = time.perf_counter()
    aspp = footprint(aspp_config(), 65, 65, mode="unclipped")
    a5 = footprint(module_a_config(5), 65, 65, mode="unclipped")
    a9 = footprint(module_a_config(9), 65, 65, mode="unclipped")
    b = footprint(module_b_config(), 65, 65, mode="clipped")
    ok = (aspp.u == 25 and abs(aspp.r - 25 / 4225) < 1e-12
          and abs(a5.r - 0.148) <= 0.001 and abs(a9.r - 0.479) <= 0.001
          and b.r == 1.0)
    detail = (f"aspp u={aspp.u} r={aspp.r:.4f}; module_a5 r={a5.r:.4f}; "
              f"module_a9 r={a9.r:.4f}; module_b clipped r={b.r:.4f}")
    report(1, "utilization ratios", ok, detail, t0, 1.0)


def test_2_pyramid_equivalence():
    t0 = time.perf_counter()
    cases = pyramid_equivalence(seed=1, cases=200, max_size=64, max_c=8)
    worst = max(cases, key=lambda c: c.max_abs_diff)
    ok = len(cases) >= 200 and worst.max_abs_diff <= 1e-9
    report(2, "pyramid equivalence", ok,
           f"{len(cases)} cases, max |diff|={worst.max_abs_diff:.3g} at {worst.label}", t0, 60)


def test_3_module_equivalence():
    t0 = time.perf_counter()
    cases = module_equivalence(seed=1, cases=100, min_size=8, max_size=64, max_c=16)
    worst = max(cases, key=lambda c: c.max_abs_diff)
    ok = len(cases) >= 100 and worst.max_abs_diff <= 1e-9
    report(3, "module equivalence", ok,
           f"{len(cases)} cases, max |diff|={worst.max_abs_diff:.3g} at {worst.label}", t0, 120)


def test_4_gradients():
    t0 = time.perf_counter()
    reps = gradient_suite(eps=1e-5, tol=1e-6)
    gaps = adjoint_suite()
    worst_fd = max(reps, key=lambda r: r.max_rel_err)
    worst_adj = max(gaps, key=lambda g: g[1])
    ok = all(r.passed for r in reps) and worst_adj[1] <= 1e-9
    detail = (f"{len(reps)} finite-diff ops, worst rel err {worst_fd.max_rel_err:.3g} "
              f"({worst_fd.op_name}); {len(gaps)} adjoint ops, worst gap "
              f"{worst_adj[1]:.3g} ({worst_adj[0]})")
    report(4, "gradient correctness", ok, detail, t0, 120)


def test_5_footprint_oracle():
    t0 = time.perf_counter()
    # module B uses the cascaded pyramid, which is exactly equal to the naive one
    # and evaluates the per-position oracle several times faster
    kinds = [aspp_config(), aspp_plus_config(), module_a_config(5), module_b_config("cascaded")]
    mismatches = []
    for n in (9, 33, 65):
        for cfg in kinds:
            rep = footprint(cfg, n, n)
            truth = footprint_oracle(cfg, n, n)
            if rep.u != len(truth):
                mismatches.append(f"{cfg.kind}@{n}: {rep.u} vs {len(truth)}")
    report(5, "footprint vs oracle", not mismatches,
           "; ".join(mismatches) or "4 kinds x 3 sizes exact", t0, 60)


def test_6_cost_model():
    t0 = time.perf_counter()
    mismatches = []
    h, w, c = 17, 14, 3
    for cfg in (module_b_config("naive", 2), module_b_config("cascaded", 2),
                module_a_config(5, 2), module_a_config(9, 2), aspp_config(2)):
        counter = counted(cfg, rng_fill(6, h, w, c), random_bank(cfg, c))
        cost = op_count(cfg, h, w, c)
        got = (counter.adds, counter.count_adds, counter.divides)
        want = (cost.pool_adds, cost.count_adds, cost.divides)
        if got != want:
            mismatches.append(f"{cfg.kind}[{cfg.pyramid_impl}] {got} != {want}")
    naive = op_count(module_b_config("naive"), h, w, c).pool_adds_per_element
    casc = op_count(module_b_config("cascaded"), h, w, c).pool_adds_per_element
    ok = not mismatches and (naive, casc) == (819, 27)
    detail = "; ".join(mismatches) or f"counters exact, ratio {naive}/{casc} = {naive / casc:.1f}"
    report(6, "cost model", ok, detail, t0, 60)


def test_7_speed_ordering():
    t0 = time.perf_counter()
    res = {r.impl_name: r for r in bench_pyramid(3, 3, 129, 129, 64, "f32", reps=5,
                                                 impls=("naive", "cascaded"))}
    speedup = res["cascaded"].speedup_vs_naive
    report(7, "speed ordering", speedup >= 3.0,
           f"cascaded {speedup:.1f}x faster than naive "
           f"({res['naive'].median_ns / 1e6:.0f} ms vs {res['cascaded'].median_ns / 1e6:.0f} ms)",
           t0, 60)


def test_8_property_suites():
    t0 = time.perf_counter()
    failures = []
    checked = 0
    for k in (1, 3, 5, 9):
        for d in (1, 3, 9):
            spec = PoolSpec(k, d)
            for h in (1, 2, 7, 16):
                for w in (1, 2, 7, 16):
                    checked += 1
                    tag = f"k={k} d={d} {h}x{w}"
                    const = np.full((h, w, 2), -0.375)
                    if np.max(np.abs(avg_pool(const, spec) - const)) > 1e-12:
                        failures.append(f"constant {tag}")
                    x = rng_fill(checked, h, w, 2)
                    if k == 1 and not np.array_equal(avg_pool(x, spec), x):
                        failures.append(f"identity {tag}")
                    # the window sum of a unit impulse at p, summed over outputs,
                    # counts the windows containing p, which by symmetry is count_map at p
                    counts = count_map(h, w, spec)[:, :, 0]
                    for i in range(h):
                        for j in range(w):
                            e = np.zeros((h, w, 1))
                            e[i, j] = 1.0
                            if sum_pool(e, PoolSpec(k, d, "sum")).sum() != counts[i, j]:
                                failures.append(f"impulse {tag} at {(i, j)}")
    report(8, "conservation and identity", not failures,
           f"{checked} kernel/dilation/shape combinations"
           + (f", failures: {failures[:5]}" if failures else ""), t0, 30)

