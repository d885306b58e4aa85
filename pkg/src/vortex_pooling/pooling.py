"""Stride-1, same-size pooling and the multi-scale pooling pyramid.

Every window is centred on the output position; taps that fall outside the
map read zero.  Sums are always accumulated in float64 and the taps of a
window are visited in row-major order, so results do not depend on how the
work is split.

The pyramid has two evaluation paths.  :func:`pyramid_naive` sums each
``k**i`` window directly and is kept deliberately simple, since the other
paths are checked against it.  :func:`pyramid_cascaded` builds level
``i + 1`` from the running window sums of level ``i`` with a ``k``-tap pooling
dilated by ``k**i``.  Running sums go through the cascade on a grid padded
by the largest radius, and the in-bounds tap counts through the same cascade
on the row and column vectors they factor into, so each level is the exact
valid-count average at the borders too.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .tensor import as_fmap

NORMS = ("sum", "avg_valid_count", "avg_include_pad")

_MAX_KERNEL = 2**31 - 1


@dataclass(frozen=True)
class PoolSpec:
    kernel: int
    dilation: int = 1
    norm: str = "avg_valid_count"

    def __post_init__(self):
        if self.kernel < 1 or self.kernel % 2 == 0:
            raise ValueError(f"pool kernel must be odd and positive, got {self.kernel}")
        if self.dilation < 1:
            raise ValueError(f"pool dilation must be >= 1, got {self.dilation}")
        if self.norm not in NORMS:
            raise ValueError(f"unknown norm {self.norm!r}; expected one of {NORMS}")

    @property
    def radius(self) -> int:
        return self.dilation * (self.kernel - 1) // 2


@dataclass
class OpCounter:
    """Arithmetic tallies filled in by the reference loops when passed in.

    ``adds`` counts window-tap additions on data tensors, ``count_adds`` the
    same on the row and column tap-count vectors of the cascade, ``divides``
    the normalisation divisions.
    """

    adds: int = 0
    count_adds: int = 0
    divides: int = 0


@dataclass
class Pyramid:
    base_k: int
    levels: int
    maps: list = field(default_factory=list)

    def kernel(self, level: int) -> int:
        """Effective kernel of 1-based ``level``."""
        return self.base_k**level


def _valid_window_sum(xp, k, d, counter=None, count_field="adds"):
    """Sum of the k x k taps (spacing d) over positions whose window fits in ``xp``."""
    span = d * (k - 1)
    oh, ow = xp.shape[0] - span, xp.shape[1] - span
    out = np.zeros((oh, ow) + xp.shape[2:], dtype=np.float64)
    for a in range(k):
        for b in range(k):
            out += xp[a * d:a * d + oh, b * d:b * d + ow]
    if counter is not None:
        setattr(counter, count_field, getattr(counter, count_field) + k * k * out.size)
    return out


def _pad_hw(x, r):
    if r == 0:
        return x
    return np.pad(x, ((r, r), (r, r)) + ((0, 0),) * (x.ndim - 2))


def _pad_hw64(x, r):
    # cast and pad in one allocation; a separate float64 copy costs cache space
    h, w = x.shape[:2]
    out = np.zeros((h + 2 * r, w + 2 * r) + x.shape[2:])
    out[r:r + h, r:r + w] = x
    return out


def window_sum(x, kernel, dilation=1, counter=None):
    """Zero-padded same-size window sum in float64."""
    r = dilation * (kernel - 1) // 2
    return _valid_window_sum(_pad_hw64(np.asarray(x), r), kernel, dilation, counter)


def _tap_counts_1d(n, k, d):
    r = (k - 1) // 2
    pos = np.arange(n)[:, None] + d * (np.arange(k)[None, :] - r)
    return ((pos >= 0) & (pos < n)).sum(axis=1)


def count_map(h: int, w: int, spec: PoolSpec) -> np.ndarray:
    """Number of in-bounds taps of ``spec``'s window at every position, ``(h, w, 1)``."""
    rows = _tap_counts_1d(h, spec.kernel, spec.dilation)
    cols = _tap_counts_1d(w, spec.kernel, spec.dilation)
    return np.outer(rows, cols).astype(np.float64)[:, :, None]


def sum_pool(x, spec: PoolSpec, counter=None) -> np.ndarray:
    x = as_fmap(x)
    return window_sum(x, spec.kernel, spec.dilation, counter).astype(x.dtype)


def _avg_pool64(x, spec, counter=None):
    s = window_sum(x, spec.kernel, spec.dilation, counter)
    if spec.norm == "sum":
        return s
    if counter is not None:
        counter.divides += s.size
    if spec.norm == "avg_include_pad":
        return s / float(spec.kernel * spec.kernel)
    return s / count_map(x.shape[0], x.shape[1], spec)


def avg_pool(x, spec: PoolSpec, counter=None) -> np.ndarray:
    x = as_fmap(x)
    if spec.norm == "sum":
        raise ValueError("avg_pool needs an averaging norm, use sum_pool for norm='sum'")
    return _avg_pool64(x, spec, counter).astype(x.dtype)


def _check_pyramid_args(base_k, levels):
    if base_k < 3 or base_k % 2 == 0:
        raise ValueError(f"base kernel must be odd and >= 3, got {base_k}")
    if levels < 1:
        raise ValueError(f"pyramid needs at least one level, got {levels}")
    if base_k**levels > _MAX_KERNEL:
        raise OverflowError(f"effective kernel {base_k}**{levels} overflows")


def pyramid_naive(x, base_k: int = 3, levels: int = 3, counter=None) -> Pyramid:
    """Each level averaged directly over its full ``base_k**i`` window."""
    x = as_fmap(x)
    _check_pyramid_args(base_k, levels)
    maps = [
        _avg_pool64(x, PoolSpec(base_k**i), counter).astype(x.dtype)
        for i in range(1, levels + 1)
    ]
    return Pyramid(base_k, levels, maps)


def _cascade_counts_1d(n, base_k, levels, counter=None):
    # the count map factors as rows x cols, so the count cascade runs on vectors
    big = (base_k**levels - 1) // 2
    v = np.pad(np.ones(n), big)
    out = []
    for i in range(levels):
        d = base_k**i
        span = d * (base_k - 1)
        v = sum(v[a * d:a * d + v.size - span] for a in range(base_k))
        if counter is not None:
            counter.count_adds += base_k * v.size
        m = big - (base_k ** (i + 1) - 1) // 2
        out.append(v[m:m + n])
    return out


def cascade_sums(x, base_k, levels, counter=None):
    """Running window sums and tap counts of every level, cropped to ``x``'s size.

    Returns two lists of float64 arrays, ``(h, w, c)`` sums and ``(h, w, 1)``
    counts.
    """
    h, w = x.shape[:2]
    big = (base_k**levels - 1) // 2
    s = _pad_hw64(np.asarray(x), big)
    rows = _cascade_counts_1d(h, base_k, levels, counter)
    cols = _cascade_counts_1d(w, base_k, levels, counter)
    sums, counts = [], []
    for i in range(levels):
        s = _valid_window_sum(s, base_k, base_k**i, counter)
        m = big - (base_k ** (i + 1) - 1) // 2
        sums.append(s[m:m + h, m:m + w])
        counts.append(np.outer(rows[i], cols[i])[:, :, None])
    return sums, counts


def pyramid_cascaded(x, base_k: int = 3, levels: int = 3, counter=None) -> Pyramid:
    """Each level built from the previous one's running sums."""
    x = as_fmap(x)
    _check_pyramid_args(base_k, levels)
    sums, counts = cascade_sums(x, base_k, levels, counter)
    maps = []
    for s, n in zip(sums, counts):
        if counter is not None:
            counter.divides += s.size
        maps.append((s / n).astype(x.dtype))
    return Pyramid(base_k, levels, maps)


def global_avg_pool(x) -> np.ndarray:
    """Per-channel mean over all positions, float64 vector of length c."""
    x = as_fmap(x)
    return np.asarray(x, dtype=np.float64).mean(axis=(0, 1))
