"""Seeded verification suites shared by the command line and the test-suite."""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .conv import bilinear_upsample, conv2d
from .grad import (
    GradOp,
    adjoint_gap,
    avg_pool_backward,
    bilinear_upsample_backward,
    conv2d_backward,
    finite_diff_check,
    module_backward,
    pyramid_cascaded_backward,
    pyramid_naive_backward,
)
from .modules import (
    aspp_config,
    module_a_config,
    module_b_config,
    module_forward,
    random_bank,
    with_impl,
)
from .pooling import PoolSpec, avg_pool, pyramid_cascaded, pyramid_naive, sum_pool
from .tensor import WeightTensor, rng_fill, rng_weights


@dataclass
class EquivalenceCase:
    label: str
    max_abs_diff: float


def _levels_for(k, rng, max_kernel=125):
    top = 1
    while k ** (top + 1) <= max_kernel and top < 3:
        top += 1
    return int(rng.integers(1, top + 1))


def pyramid_equivalence(seed: int = 1, cases: int = 200, max_size: int = 64,
                        max_c: int = 8) -> list:
    """Cascaded vs naive pyramid over random shapes, kernels and depths."""
    rng = np.random.default_rng(seed)
    out = []
    for n in range(cases):
        h, w = (int(v) for v in rng.integers(1, max_size + 1, size=2))
        c = int(rng.integers(1, max_c + 1))
        k = int(rng.choice([3, 5]))
        levels = _levels_for(k, rng)
        x = rng_fill(seed * 100003 + n, h, w, c)
        a = pyramid_naive(x, k, levels).maps
        b = pyramid_cascaded(x, k, levels).maps
        diff = max(float(np.max(np.abs(p - q))) for p, q in zip(a, b))
        out.append(EquivalenceCase(f"{h}x{w}x{c} k={k} L={levels}", diff))
    return out


def module_equivalence(seed: int = 1, cases: int = 100, min_size: int = 8,
                       max_size: int = 64, max_c: int = 16) -> list:
    """Module B with naive vs cascaded pooling over random shapes and weights."""
    rng = np.random.default_rng(seed + 7)
    out = []
    for n in range(cases):
        h, w = (int(v) for v in rng.integers(min_size, max_size + 1, size=2))
        c = int(rng.integers(1, max_c + 1))
        oc = int(rng.integers(1, 5))
        cfg = module_b_config("naive", branch_out_c=oc)
        x = rng_fill(seed * 7919 + n, h, w, c)
        bank = random_bank(cfg, c, seed=seed * 31 + n)
        a = module_forward(x, cfg, bank)
        b = module_forward(x, with_impl(cfg, "cascaded"), bank)
        out.append(EquivalenceCase(f"{h}x{w}x{c} out_c={oc}", float(np.max(np.abs(a - b)))))
    return out


# --------------------------------------------------------------------------
# gradients


def _stack(maps):
    return np.concatenate(maps, axis=2)


def _split(g, levels):
    return np.split(np.asarray(g), levels, axis=2)


def gradient_cases():
    """``(GradOp, x)`` pairs covering every backward pass."""
    cases = []
    x = rng_fill(71, 6, 7, 2)
    for norm in ("sum", "avg_valid_count", "avg_include_pad"):
        spec = PoolSpec(3, 2, norm)
        fwd = (lambda s: lambda u: sum_pool(u, s))(spec) if norm == "sum" else \
            (lambda s: lambda u: avg_pool(u, s))(spec)
        cases.append((GradOp(f"avg_pool[{norm},k=3,d=2]", fwd,
                             (lambda s: lambda u, g: avg_pool_backward(g, 6, 7, s))(spec)), x))

    x = rng_fill(72, 7, 6, 2)
    cases.append((GradOp("pyramid_naive[k=3,L=2]",
                         lambda u: _stack(pyramid_naive(u, 3, 2).maps),
                         lambda u, g: pyramid_naive_backward(_split(g, 2), 3)), x))
    cases.append((GradOp("pyramid_cascaded[k=3,L=2]",
                         lambda u: _stack(pyramid_cascaded(u, 3, 2).maps),
                         lambda u, g: pyramid_cascaded_backward(_split(g, 2), 3)), x))

    xc = rng_fill(51, 7, 7, 2)
    wt = rng_weights(52, 2, 2, 3, 3)
    cases.append((GradOp("conv2d.dx[3x3,d=2]",
                         lambda u: conv2d(u, wt, 2),
                         lambda u, g: conv2d_backward(g, u, wt, 2)[0]), xc))
    cases.append((GradOp("conv2d.dw[3x3,d=2]",
                         lambda p: conv2d(xc, WeightTensor(p, wt.bias), 2),
                         lambda p, g: conv2d_backward(g, xc, WeightTensor(p, wt.bias), 2)[1]),
                  wt.weights))
    cases.append((GradOp("conv2d.db[3x3,d=2]",
                         lambda p: conv2d(xc, WeightTensor(wt.weights, p), 2),
                         lambda p, g: conv2d_backward(g, xc, WeightTensor(wt.weights, p), 2)[2]),
                  wt.bias))

    x = rng_fill(73, 4, 5, 2)
    cases.append((GradOp("bilinear_upsample[4x5->9x7]",
                         lambda u: bilinear_upsample(u, 9, 7),
                         lambda u, g: bilinear_upsample_backward(g, 4, 5)), x))

    x = rng_fill(61, 10, 10, 3)
    for cfg in (module_b_config("naive", 2), module_b_config("cascaded", 2),
                aspp_config(2), module_a_config(5, 2)):
        bank = random_bank(cfg, 3, seed=62)
        label = f"{cfg.kind}[{cfg.pyramid_impl}]" if cfg.kind == "module_b" else cfg.kind
        cases.append((GradOp(f"module_backward.dx {label}",
                             (lambda c_, b_: lambda u: module_forward(u, c_, b_))(cfg, bank),
                             (lambda c_, b_: lambda u, g: module_backward(g, u, c_, b_)[0])(cfg, bank)),
                      x))
    cfg = module_b_config("cascaded", 2)
    bank = random_bank(cfg, 3, seed=62)
    name = cfg.branches[-1].name

    def with_w(p):
        return {**bank, name: WeightTensor(p, bank[name].bias)}

    cases.append((GradOp(f"module_backward.dw module_b[{name}]",
                         lambda p: module_forward(x, cfg, with_w(p)),
                         lambda p, g: module_backward(g, x, cfg, with_w(p))[1][name][0]),
                  bank[name].weights))
    return cases


def gradient_suite(eps: float = 1e-5, tol: float = 1e-6) -> list:
    return [finite_diff_check(op, x, eps, tol) for op, x in gradient_cases()]


def _zero_bias(bank):
    return {k: WeightTensor(v.weights, np.zeros_like(v.bias)) for k, v in bank.items()}


def adjoint_cases():
    """``(name, F, F^T, u, v)`` for every linear op."""
    out = []
    u = rng_fill(81, 9, 8, 3)
    v = rng_fill(82, 9, 8, 3)
    for norm in ("sum", "avg_valid_count", "avg_include_pad"):
        for k, d in ((3, 1), (5, 2), (9, 1)):
            spec = PoolSpec(k, d, norm)
            fwd = (lambda s: (lambda a: sum_pool(a, s)) if s.norm == "sum"
                   else (lambda a: avg_pool(a, s)))(spec)
            out.append((f"avg_pool[{norm},k={k},d={d}]", fwd,
                        (lambda s: lambda b: avg_pool_backward(b, 9, 8, s))(spec), u, v))

    vp = rng_fill(83, 9, 8, 9)
    out.append(("pyramid_naive[k=3,L=3]", lambda a: _stack(pyramid_naive(a, 3, 3).maps),
                lambda b: pyramid_naive_backward(_split(b, 3), 3), u, vp))
    out.append(("pyramid_cascaded[k=3,L=3]", lambda a: _stack(pyramid_cascaded(a, 3, 3).maps),
                lambda b: pyramid_cascaded_backward(_split(b, 3), 3), u, vp))

    wt = rng_weights(84, 4, 3, 3, 3)
    wt = WeightTensor(wt.weights, np.zeros(4))
    vc = rng_fill(85, 9, 8, 4)
    out.append(("conv2d[3x3,d=2]", lambda a: conv2d(a, wt, 2),
                lambda b: conv2d_backward(b, u, wt, 2)[0], u, vc))

    vu = rng_fill(86, 20, 17, 3)
    out.append(("bilinear_upsample[9x8->20x17]", lambda a: bilinear_upsample(a, 20, 17),
                lambda b: bilinear_upsample_backward(b, 9, 8), u, vu))

    for cfg in (module_b_config("naive", 2), module_b_config("cascaded", 2),
                aspp_config(2), module_a_config(5, 2)):
        bank = _zero_bias(random_bank(cfg, 3, seed=87))
        vm = rng_fill(88, 9, 8, cfg.out_c)
        label = f"module_forward {cfg.kind}[{cfg.pyramid_impl}]"
        out.append((label,
                    (lambda c_, b_: lambda a: module_forward(a, c_, b_))(cfg, bank),
                    (lambda c_, b_: lambda b: module_backward(b, u, c_, b_)[0])(cfg, bank),
                    u, vm))
    return out


def adjoint_suite() -> list:
    return [(name, adjoint_gap(f, ft, u, v)) for name, f, ft, u, v in adjoint_cases()]


def cascade_gradient_gap(seed: int = 61, h: int = 19, w: int = 23, c: int = 3) -> float:
    """Max abs difference of naive and cascaded module-B input gradients."""
    cfg = module_b_config("naive", 2)
    x = rng_fill(seed, h, w, c)
    bank = random_bank(cfg, c, seed=seed + 1)
    dy = rng_fill(seed + 2, h, w, cfg.out_c)
    a = module_backward(dy, x, cfg, bank)[0]
    b = module_backward(dy, x, replace(cfg, pyramid_impl="cascaded"), bank)[0]
    return float(np.max(np.abs(a - b)))
