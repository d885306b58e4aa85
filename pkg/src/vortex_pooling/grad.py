"""Backward passes and finite-difference checking.

All forward ops here are linear (affine with a bias), so each backward pass
is the exact transpose of its forward map and central differences carry no
truncation error.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from .conv import interp_axis
from .modules import ModuleConfig, branch_weights, pooled_inputs, pyramid_plan
from .pooling import PoolSpec, _pad_hw, _valid_window_sum, count_map, window_sum
from .tensor import WeightTensor, as_fmap, uniform_pm1


def avg_pool_backward(dy, h: int, w: int, spec: PoolSpec) -> np.ndarray:
    dy = np.asarray(dy, dtype=np.float64)
    if dy.shape[:2] != (h, w):
        raise ValueError(f"gradient has spatial size {dy.shape[:2]}, expected {(h, w)}")
    # the tap set is symmetric, so the zero-padded window sum is self-adjoint
    if spec.norm == "avg_valid_count":
        dy = dy / count_map(h, w, spec)
    out = window_sum(dy, spec.kernel, spec.dilation)
    if spec.norm == "avg_include_pad":
        out /= float(spec.kernel * spec.kernel)
    return out


def pyramid_naive_backward(dys, base_k: int) -> np.ndarray:
    """Gradient w.r.t. the input of all pyramid levels, level ``i`` receiving ``dys[i-1]``."""
    h, w = dys[0].shape[:2]
    dx = np.zeros(np.shape(dys[0]))
    for i, dy in enumerate(dys, start=1):
        dx += avg_pool_backward(dy, h, w, PoolSpec(base_k**i))
    return dx


def _window_sum_adjoint(g, k, d):
    # transpose of _valid_window_sum: a "full" window sum growing g by d*(k-1)
    return _valid_window_sum(_pad_hw(g, d * (k - 1)), k, d)


def pyramid_cascaded_backward(dys, base_k: int) -> np.ndarray:
    """Transpose of the cascade, walking the padded grids from the top level down."""
    levels = len(dys)
    h, w = dys[0].shape[:2]
    big = (base_k**levels - 1) // 2
    grad = None
    for i in range(levels, 0, -1):
        span = big - (base_k**i - 1) // 2
        top = np.asarray(dys[i - 1], dtype=np.float64) / count_map(h, w, PoolSpec(base_k**i))
        if grad is None:
            grad = np.zeros((h + 2 * span, w + 2 * span) + top.shape[2:])
        grad[span:span + h, span:span + w] += top
        grad = _window_sum_adjoint(grad, base_k, base_k ** (i - 1))
    return grad[big:big + h, big:big + w]


def conv2d_backward(dy, x, wt: WeightTensor, dilation: int = 1):
    """Returns ``(dx, dweights, dbias)`` in float64."""
    x = as_fmap(x)
    dy = np.asarray(dy, dtype=np.float64)
    h, w, c = x.shape
    if dy.shape != (h, w, wt.out_c):
        raise ValueError(f"gradient shape {dy.shape} does not match output {(h, w, wt.out_c)}")
    if wt.in_c != c:
        raise ValueError(f"weights expect {wt.in_c} input channels, map has {c}")
    rh, rw = dilation * (wt.kh - 1) // 2, dilation * (wt.kw - 1) // 2
    xp = np.pad(np.asarray(x, dtype=np.float64), ((rh, rh), (rw, rw), (0, 0)))
    dxp = np.zeros_like(xp)
    wts = np.asarray(wt.weights, dtype=np.float64)
    dw = np.zeros(wts.shape)
    dy2 = dy.reshape(-1, wt.out_c)
    for a in range(wt.kh):
        for b in range(wt.kw):
            rows = slice(a * dilation, a * dilation + h)
            cols = slice(b * dilation, b * dilation + w)
            dxp[rows, cols] += dy @ wts[:, :, a, b]
            dw[:, :, a, b] = dy2.T @ xp[rows, cols].reshape(-1, c)
    return dxp[rh:rh + h, rw:rw + w], dw, dy.sum(axis=(0, 1))


def bilinear_upsample_backward(dy, h: int, w: int) -> np.ndarray:
    dy = np.asarray(dy, dtype=np.float64)
    out_h, out_w = dy.shape[:2]
    lo, hi, f = interp_axis(w, out_w)
    drows = np.zeros((out_h, w) + dy.shape[2:])
    np.add.at(drows, (slice(None), lo), dy * (1 - f)[None, :, None])
    np.add.at(drows, (slice(None), hi), dy * f[None, :, None])
    lo, hi, f = interp_axis(h, out_h)
    dx = np.zeros((h, w) + dy.shape[2:])
    np.add.at(dx, lo, drows * (1 - f)[:, None, None])
    np.add.at(dx, hi, drows * f[:, None, None])
    return dx


def module_backward(dy, x, cfg: ModuleConfig, bank):
    """Returns ``(dx, {branch: (dweights, dbias)})``."""
    x = as_fmap(x)
    h, w, c = x.shape
    dy = np.asarray(dy, dtype=np.float64)
    if dy.shape != (h, w, cfg.out_c):
        raise ValueError(f"gradient shape {dy.shape} does not match output {(h, w, cfg.out_c)}")
    weights = branch_weights(cfg, bank, c)
    pooled = pooled_inputs(x, cfg)
    dpooled = {}
    params = {}
    for idx, b in enumerate(cfg.branches):
        block = dy[:, :, idx * cfg.branch_out_c:(idx + 1) * cfg.branch_out_c]
        dp, dw, db = conv2d_backward(block, pooled[b.name], weights[b.name], b.conv_dilation)
        params[b.name] = (dw, db)
        key = (b.pool_kernel, b.pool_dilation)
        dpooled[key] = dpooled[key] + dp if key in dpooled else dp
    dx = np.zeros((h, w, c))
    if cfg.pyramid_impl == "cascaded":
        base, levels = pyramid_plan(cfg)
        dys = [dpooled.pop((base**i, 1), np.zeros((h, w, c))) for i in range(1, levels + 1)]
        dx += pyramid_cascaded_backward(dys, base)
    for (k, d), dp in dpooled.items():
        dx += dp if k == 1 else avg_pool_backward(dp, h, w, PoolSpec(k, d))
    return dx, params


# --------------------------------------------------------------------------
# checking


class GradOp(NamedTuple):
    """A forward map and its vector-Jacobian product ``vjp(x, dy) -> dx``."""

    name: str
    forward: Callable
    vjp: Callable


@dataclass
class GradCheckReport:
    op_name: str
    max_rel_err: float
    worst_index: int
    passed: bool
    probes: int = 0


def finite_diff_check(op: GradOp, x, eps: float = 1e-5, tol: float = 1e-6,
                      probes: int = 200, seed: int = 0) -> GradCheckReport:
    """Compare ``op.vjp`` against central differences of ``<op.forward(x), v>``.

    ``v`` is a fixed splitmix64 cotangent.  At most ``probes`` input
    coordinates are checked, drawn with a seeded generator.
    """
    x = np.array(x, dtype=np.float64)
    y = np.asarray(op.forward(x), dtype=np.float64)
    v = uniform_pm1(seed + 0x5EED, y.size).reshape(y.shape)
    analytic = np.asarray(op.vjp(x, v), dtype=np.float64)
    if analytic.shape != x.shape:
        raise ValueError(f"{op.name}: vjp shape {analytic.shape} != input shape {x.shape}")
    if x.size <= probes:
        idx = np.arange(x.size)
    else:
        idx = np.sort(np.random.default_rng(seed).choice(x.size, probes, replace=False))
    worst, worst_i = 0.0, -1
    for i in idx:
        xp = x.copy()
        xm = x.copy()
        xp.flat[i] += eps
        xm.flat[i] -= eps
        # difference the outputs before contracting so untouched entries cancel exactly;
        # divide by the step actually stored, not the nominal 2 * eps
        diff = np.asarray(op.forward(xp), np.float64) - np.asarray(op.forward(xm), np.float64)
        g = float(np.vdot(diff, v)) / (xp.flat[i] - xm.flat[i])
        a = float(analytic.flat[i])
        if not (np.isfinite(g) and np.isfinite(a)):
            raise FloatingPointError(f"{op.name}: non-finite gradient at index {i}")
        err = abs(a - g) / max(abs(a), abs(g), 1e-8)
        if err > worst or worst_i < 0:
            worst, worst_i = err, int(i)
    return GradCheckReport(op.name, float(worst), worst_i, bool(worst <= tol), len(idx))


def adjoint_gap(forward, adjoint, u, v) -> float:
    """Relative mismatch of ``<F u, v>`` and ``<u, F^T v>``."""
    lhs = float(np.vdot(np.asarray(forward(u), np.float64), v))
    rhs = float(np.vdot(u, np.asarray(adjoint(v), np.float64)))
    scale = max(abs(lhs), abs(rhs), 1e-300)
    return abs(lhs - rhs) / scale
