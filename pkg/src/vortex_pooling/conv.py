"""Dilated same-size convolution, bilinear upsampling and spatial broadcast."""
from __future__ import annotations

import numpy as np

from .tensor import WeightTensor, as_fmap


def _check_conv(x, wt: WeightTensor, dilation):
    if wt.in_c != x.shape[2]:
        raise ValueError(f"weights expect {wt.in_c} input channels, map has {x.shape[2]}")
    if dilation < 1:
        raise ValueError(f"dilation must be >= 1, got {dilation}")


def conv2d(x, wt: WeightTensor, dilation: int = 1) -> np.ndarray:
    """Zero-padded correlation; output has ``x``'s size and ``wt.out_c`` channels."""
    x = as_fmap(x)
    _check_conv(x, wt, dilation)
    h, w, _ = x.shape
    rh, rw = dilation * (wt.kh - 1) // 2, dilation * (wt.kw - 1) // 2
    xp = np.pad(np.asarray(x, dtype=np.float64), ((rh, rh), (rw, rw), (0, 0)))
    wts = np.asarray(wt.weights, dtype=np.float64)
    out = np.zeros((h, w, wt.out_c))
    for a in range(wt.kh):
        for b in range(wt.kw):
            tap = xp[a * dilation:a * dilation + h, b * dilation:b * dilation + w]
            out += tap @ wts[:, :, a, b].T
    out += np.asarray(wt.bias, dtype=np.float64)
    return out.astype(x.dtype)


def interp_axis(n_in: int, n_out: int):
    """Align-corners source indices ``(lo, hi)`` and blend fractions for one axis."""
    if n_out == 1 or n_in == 1:
        src = np.zeros(n_out)
    else:
        src = np.arange(n_out) * (n_in - 1) / (n_out - 1)
    lo = np.floor(src).astype(np.intp)
    hi = np.minimum(lo + 1, n_in - 1)
    return lo, hi, src - lo


def bilinear_upsample(x, out_h: int, out_w: int) -> np.ndarray:
    x = as_fmap(x)
    if out_h < 1 or out_w < 1:
        raise ValueError(f"output size must be positive, got {(out_h, out_w)}")
    x64 = np.asarray(x, dtype=np.float64)
    lo, hi, f = interp_axis(x.shape[0], out_h)
    rows = x64[lo] + f[:, None, None] * (x64[hi] - x64[lo])
    lo, hi, f = interp_axis(x.shape[1], out_w)
    out = rows[:, lo] + f[None, :, None] * (rows[:, hi] - rows[:, lo])
    return out.astype(x.dtype)


def broadcast_spatial(v, h: int, w: int, dtype=np.float64) -> np.ndarray:
    v = np.asarray(v, dtype=dtype).reshape(-1)
    return np.broadcast_to(v, (h, w, v.size)).copy()
