"""Feature maps, weight tensors, binary file formats and seeded generation.

A feature map is a plain ``numpy.ndarray`` of shape ``(h, w, c)`` and dtype
float32 or float64.  Element ``(i, j, k)`` lives at flat index
``(i * w + j) * c + k``, which is numpy's C order for that shape.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

FMAP_MAGIC = b"VPFM"
WBANK_MAGIC = b"VPWB"
FORMAT_VERSION = 1

_DTYPE_CODES = {0: np.dtype("<f4"), 1: np.dtype("<f8")}
_CODE_OF = {np.dtype(np.float32): 0, np.dtype(np.float64): 1}

_FMAP_HEADER = struct.Struct("<4sIB3xIII")  # 24 bytes


class FormatError(ValueError):
    """Malformed FMAP or VPWB file."""


class BadMagicError(FormatError):
    pass


class TruncatedError(FormatError):
    pass


class DtypeCodeError(FormatError):
    pass


class ZeroDimensionError(FormatError):
    pass


def as_fmap(x, dtype=None) -> np.ndarray:
    """Validate ``x`` as an ``(h, w, c)`` float32/float64 feature map."""
    x = np.asarray(x)
    if dtype is not None:
        x = x.astype(dtype, copy=False)
    if x.ndim != 3:
        raise ValueError(f"feature map must be 3-D (h, w, c), got shape {x.shape}")
    if min(x.shape) < 1:
        raise ValueError(f"feature map dimensions must be positive, got {x.shape}")
    if x.dtype not in _CODE_OF:
        raise TypeError(f"feature map dtype must be float32 or float64, got {x.dtype}")
    return x


@dataclass(frozen=True)
class WeightTensor:
    """Convolution filter ``weights[o, ci, a, b]`` plus per-output ``bias``."""

    weights: np.ndarray
    bias: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights)
        b = np.asarray(self.bias)
        if w.ndim != 4:
            raise ValueError(f"weights must be (out_c, in_c, kh, kw), got {w.shape}")
        if min(w.shape) < 1:
            raise ValueError(f"weight dimensions must be positive, got {w.shape}")
        if w.shape[2] % 2 == 0 or w.shape[3] % 2 == 0:
            raise ValueError(f"kernel sizes must be odd, got {w.shape[2]}x{w.shape[3]}")
        if b.shape != (w.shape[0],):
            raise ValueError(f"bias must have shape ({w.shape[0]},), got {b.shape}")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "bias", b)

    @property
    def out_c(self) -> int:
        return self.weights.shape[0]

    @property
    def in_c(self) -> int:
        return self.weights.shape[1]

    @property
    def kh(self) -> int:
        return self.weights.shape[2]

    @property
    def kw(self) -> int:
        return self.weights.shape[3]

    @property
    def dtype(self):
        return self.weights.dtype

    @classmethod
    def zeros(cls, out_c, in_c, kh=1, kw=1, dtype=np.float64):
        return cls(np.zeros((out_c, in_c, kh, kw), dtype), np.zeros(out_c, dtype))

    @classmethod
    def ones(cls, out_c, in_c, kh=1, kw=1, dtype=np.float64):
        return cls(np.ones((out_c, in_c, kh, kw), dtype), np.zeros(out_c, dtype))

    @classmethod
    def identity(cls, c, dtype=np.float64):
        w = np.zeros((c, c, 1, 1), dtype)
        w[np.arange(c), np.arange(c), 0, 0] = 1
        return cls(w, np.zeros(c, dtype))


# name -> WeightTensor, insertion ordered
WeightBank = dict


# --------------------------------------------------------------------------
# splitmix64


_GOLDEN = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB
_MASK = (1 << 64) - 1


def splitmix64(seed: int, n: int) -> np.ndarray:
    """First ``n`` splitmix64 outputs for ``seed`` as uint64."""
    state = np.uint64(seed & _MASK)
    steps = np.arange(1, n + 1, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = state + steps * np.uint64(_GOLDEN)
        z = (z ^ (z >> np.uint64(30))) * np.uint64(_M1)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(_M2)
    return z ^ (z >> np.uint64(31))


def uniform_pm1(seed: int, n: int) -> np.ndarray:
    """``n`` values in [-1, 1) from the top 53 bits of each splitmix64 output."""
    top = (splitmix64(seed, n) >> np.uint64(11)).astype(np.float64)
    return top * (2.0 / 2.0**53) - 1.0


def rng_fill(seed: int, h: int, w: int, c: int, dtype=np.float64) -> np.ndarray:
    """Reproducible ``(h, w, c)`` map filled in layout order."""
    if min(h, w, c) < 1:
        raise ValueError(f"dimensions must be positive, got {(h, w, c)}")
    return uniform_pm1(seed, h * w * c).reshape(h, w, c).astype(dtype)


def rng_weights(seed: int, out_c: int, in_c: int, kh: int = 3, kw: int = 3,
                dtype=np.float64) -> WeightTensor:
    """Weights then biases drawn from one splitmix64 stream."""
    n = out_c * in_c * kh * kw
    vals = uniform_pm1(seed, n + out_c).astype(dtype)
    return WeightTensor(vals[:n].reshape(out_c, in_c, kh, kw), vals[n:].copy())


def concat_channels(maps) -> np.ndarray:
    maps = [as_fmap(m) for m in maps]
    if not maps:
        raise ValueError("concat_channels needs at least one map")
    h, w = maps[0].shape[:2]
    dt = maps[0].dtype
    for m in maps[1:]:
        if m.shape[:2] != (h, w):
            raise ValueError(f"spatial size mismatch: {m.shape[:2]} vs {(h, w)}")
        if m.dtype != dt:
            raise TypeError(f"dtype mismatch: {m.dtype} vs {dt}")
    return np.concatenate(maps, axis=2)


# --------------------------------------------------------------------------
# FMAP


def encode_fmap(x) -> bytes:
    x = as_fmap(x)
    h, w, c = x.shape
    header = _FMAP_HEADER.pack(FMAP_MAGIC, FORMAT_VERSION, _CODE_OF[x.dtype], h, w, c)
    return header + np.ascontiguousarray(x, dtype=_DTYPE_CODES[_CODE_OF[x.dtype]]).tobytes()


def decode_fmap(buf: bytes) -> np.ndarray:
    if len(buf) < _FMAP_HEADER.size:
        raise TruncatedError(f"file holds {len(buf)} bytes, header needs {_FMAP_HEADER.size}")
    magic, version, code, h, w, c = _FMAP_HEADER.unpack_from(buf)
    if magic != FMAP_MAGIC:
        raise BadMagicError(f"bad magic {magic!r}, expected {FMAP_MAGIC!r}")
    if version != FORMAT_VERSION:
        raise FormatError(f"unsupported FMAP version {version}")
    if code not in _DTYPE_CODES:
        raise DtypeCodeError(f"dtype code {code} is not 0 (f32) or 1 (f64)")
    if 0 in (h, w, c):
        raise ZeroDimensionError(f"zero dimension in header h={h} w={w} c={c}")
    dt = _DTYPE_CODES[code]
    need = h * w * c * dt.itemsize
    payload = len(buf) - _FMAP_HEADER.size
    if payload < need:
        raise TruncatedError(f"payload holds {payload} bytes, header declares {need}")
    if payload > need:
        raise FormatError(f"{payload - need} trailing bytes after payload")
    data = np.frombuffer(buf, dtype=dt, offset=_FMAP_HEADER.size, count=h * w * c)
    return data.astype(dt.newbyteorder("=")).reshape(h, w, c)


def fmap_write(x, path) -> None:
    Path(path).write_bytes(encode_fmap(x))


def fmap_read(path) -> np.ndarray:
    return decode_fmap(Path(path).read_bytes())


# --------------------------------------------------------------------------
# VPWB


_WB_HEADER = struct.Struct("<4sII")
_WB_DIMS = struct.Struct("<BIIII")


def encode_weight_bank(bank: WeightBank) -> bytes:
    parts = [_WB_HEADER.pack(WBANK_MAGIC, FORMAT_VERSION, len(bank))]
    for name, wt in bank.items():
        raw = name.encode("utf-8")
        if len(raw) > 0xFFFF:
            raise ValueError(f"branch name too long: {name[:40]}...")
        code = _CODE_OF.get(wt.weights.dtype)
        if code is None:
            raise TypeError(f"weights of {name!r} must be float32/float64")
        dt = _DTYPE_CODES[code]
        parts.append(struct.pack("<H", len(raw)) + raw)
        parts.append(_WB_DIMS.pack(code, wt.out_c, wt.in_c, wt.kh, wt.kw))
        parts.append(np.ascontiguousarray(wt.weights, dtype=dt).tobytes())
        parts.append(np.ascontiguousarray(wt.bias, dtype=dt).tobytes())
    return b"".join(parts)


def decode_weight_bank(buf: bytes) -> WeightBank:
    view = memoryview(buf)
    pos = 0

    def take(n):
        nonlocal pos
        if pos + n > len(view):
            raise TruncatedError(f"weight bank truncated at byte {pos} (needs {n} more)")
        chunk = view[pos:pos + n]
        pos += n
        return chunk

    magic, version, count = _WB_HEADER.unpack(take(_WB_HEADER.size))
    if magic != WBANK_MAGIC:
        raise BadMagicError(f"bad magic {bytes(magic)!r}, expected {WBANK_MAGIC!r}")
    if version != FORMAT_VERSION:
        raise FormatError(f"unsupported VPWB version {version}")
    bank = {}
    for _ in range(count):
        (nlen,) = struct.unpack("<H", take(2))
        name = bytes(take(nlen)).decode("utf-8")
        code, out_c, in_c, kh, kw = _WB_DIMS.unpack(take(_WB_DIMS.size))
        if code not in _DTYPE_CODES:
            raise DtypeCodeError(f"dtype code {code} for {name!r} is not 0 or 1")
        if 0 in (out_c, in_c, kh, kw):
            raise ZeroDimensionError(f"zero dimension in weights {name!r}")
        dt = _DTYPE_CODES[code]
        n = out_c * in_c * kh * kw
        w = np.frombuffer(take(n * dt.itemsize), dtype=dt).reshape(out_c, in_c, kh, kw)
        b = np.frombuffer(take(out_c * dt.itemsize), dtype=dt)
        native = dt.newbyteorder("=")
        bank[name] = WeightTensor(w.astype(native), b.astype(native))
    if pos != len(view):
        raise FormatError(f"{len(view) - pos} trailing bytes after weight bank")
    return bank


def weight_bank_write(bank: WeightBank, path) -> None:
    Path(path).write_bytes(encode_weight_bank(bank))


def weight_bank_read(path) -> WeightBank:
    return decode_weight_bank(Path(path).read_bytes())
