"""Dependency footprints, utilization ratios and arithmetic cost models.

The footprint of an output position is the set of input positions that
influence it.  In ``unclipped`` mode it is the union over branches of the
Minkowski sum of conv-tap offsets and pooling-window offsets, with no map
boundary.  In ``clipped`` mode the same composition is evaluated on the
actual map: a conv tap that lands outside the map reads zero padding and
contributes nothing, and pooling windows are cut at the border.
The utilization ratio is ``u / (h * w)``.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .modules import ModuleConfig, module_forward, pyramid_plan
from .pooling import OpCounter
from .tensor import WeightTensor

MODES = ("clipped", "unclipped")


@dataclass(frozen=True)
class FootprintReport:
    u: int
    h: int
    w: int
    mode: str
    pixel: tuple | None = None

    @property
    def r(self) -> float:
        return self.u / (self.h * self.w)


def _taps(k, d):
    return [d * (a - (k - 1) // 2) for a in range(k)]


def _branch_offsets_1d(b):
    return (_taps(b.conv_kernel, b.conv_dilation), _taps(b.pool_kernel, b.pool_dilation))


def offset_set(cfg: ModuleConfig) -> set:
    """Unclipped footprint as a set of ``(dy, dx)`` offsets."""
    out = set()
    for b in cfg.branches:
        conv, pool = _branch_offsets_1d(b)
        axis = sorted({t + s for t in conv for s in pool})
        out.update((dy, dx) for dy in axis for dx in axis)
    return out


def default_pixel(h, w):
    return (h // 2, w // 2)


def clipped_set(cfg: ModuleConfig, h: int, w: int, pixel) -> set:
    """Positions of an ``h x w`` map influencing output ``pixel``."""
    pi, pj = pixel
    out = set()
    for b in cfg.branches:
        conv, pool = _branch_offsets_1d(b)
        rows = sorted({pi + t + s for t in conv if 0 <= pi + t < h for s in pool if 0 <= pi + t + s < h})
        cols = sorted({pj + t + s for t in conv if 0 <= pj + t < w for s in pool if 0 <= pj + t + s < w})
        out.update((i, j) for i in rows for j in cols)
    return out


def footprint(cfg: ModuleConfig, h: int, w: int, pixel=None, mode: str = "clipped") -> FootprintReport:
    if mode not in MODES:
        raise ValueError(f"unknown footprint mode {mode!r}; expected one of {MODES}")
    if mode == "unclipped":
        return FootprintReport(len(offset_set(cfg)), h, w, mode)
    pixel = default_pixel(h, w) if pixel is None else tuple(pixel)
    if not (0 <= pixel[0] < h and 0 <= pixel[1] < w):
        raise ValueError(f"pixel {pixel} is outside the {h}x{w} map")
    return FootprintReport(len(clipped_set(cfg, h, w, pixel)), h, w, mode, pixel)


def _ones_bank(cfg: ModuleConfig):
    return {
        b.name: WeightTensor.ones(1, 1, b.conv_kernel, b.conv_kernel)
        for b in cfg.branches
    }


def footprint_oracle(cfg: ModuleConfig, h: int, w: int, pixel=None) -> set:
    """Brute force: perturb each input position and watch the output at ``pixel``.

    Runs the real forward pass with all-ones single-channel weights, so every
    nonzero influence is strictly positive.
    """
    if h > 129 or w > 129:
        raise ValueError("footprint_oracle is limited to maps of at most 129 x 129")
    pixel = default_pixel(h, w) if pixel is None else tuple(pixel)
    one = replace(cfg, include_image_level=False, branch_out_c=1)
    bank = _ones_bank(one)
    found = set()
    x = np.zeros((h, w, 1))
    for i in range(h):
        for j in range(w):
            x[i, j, 0] = 1.0
            y = module_forward(x, one, bank)
            x[i, j, 0] = 0.0
            if np.any(y[pixel[0], pixel[1]] != 0):
                found.add((i, j))
    return found


# --------------------------------------------------------------------------
# cost model


@dataclass(frozen=True)
class CostModel:
    """Arithmetic of one forward pass by the reference algorithms.

    ``pool_adds_per_element`` is the number of window taps summed per output
    element (per position and channel); the totals include the padded halo
    evaluated by the cascade.
    """

    pool_adds_per_element: int
    pool_adds: int
    count_adds: int
    divides: int
    conv_mults: int

    @property
    def adds(self) -> int:
        return self.pool_adds + self.count_adds


def pyramid_cost(base_k: int, levels: int, h: int, w: int, c: int, impl: str) -> CostModel:
    """Pooling arithmetic of one pyramid evaluation."""
    k2 = base_k * base_k
    if impl == "naive":
        per = sum(base_k ** (2 * i) for i in range(1, levels + 1))
        return CostModel(per, per * h * w * c, 0, levels * h * w * c, 0)
    if impl != "cascaded":
        raise ValueError(f"unknown pyramid impl {impl!r}")
    big = (base_k**levels - 1) // 2
    cells = line = 0
    for i in range(1, levels + 1):
        m = big - (base_k**i - 1) // 2
        cells += (h + 2 * m) * (w + 2 * m)
        line += (h + 2 * m) + (w + 2 * m)
    return CostModel(levels * k2, k2 * cells * c, base_k * line, levels * h * w * c, 0)


def op_count(cfg: ModuleConfig, h: int, w: int, c: int) -> CostModel:
    """Arithmetic of ``module_forward(x, cfg, bank)`` on an ``h x w x c`` input."""
    per = adds = count_adds = divides = 0
    pyramid_kernels = set()
    if cfg.pyramid_impl == "cascaded":
        base, levels = pyramid_plan(cfg)
        pc = pyramid_cost(base, levels, h, w, c, "cascaded")
        per, adds, count_adds, divides = (pc.pool_adds_per_element, pc.pool_adds,
                                          pc.count_adds, pc.divides)
        pyramid_kernels = {base**i for i in range(1, levels + 1)}
    seen = set()
    for b in cfg.branches:
        key = (b.pool_kernel, b.pool_dilation)
        if b.pool_kernel == 1 or key in seen or b.pool_kernel in pyramid_kernels:
            continue
        seen.add(key)
        k2 = b.pool_kernel**2
        per += k2
        adds += k2 * h * w * c
        divides += h * w * c
    mults = sum(b.conv_kernel**2 * c * cfg.branch_out_c for b in cfg.branches) * h * w
    return CostModel(per, adds, count_adds, divides, mults)


def counted(cfg: ModuleConfig, x, bank) -> OpCounter:
    """Run ``module_forward`` with instrumented pooling counters."""
    counter = OpCounter()
    module_forward(x, cfg, bank, counter)
    return counter
