"""Context modules assembled from pooling + convolution branches.

A module is a list of branches.  Each branch average-pools the input
(valid-count normalisation, identity for ``pool_kernel == 1``), convolves
the pooled map, and the branch outputs are concatenated along channels.
No normalisation layers or nonlinearities sit inside the branches, so every
module is an affine map of its input.

Module configs are stored as ``key = value`` text with one ``[branch NAME]``
block per branch, see :func:`parse_config`.
"""
from __future__ import annotations

import configparser
from dataclasses import dataclass, replace

import numpy as np

from .conv import bilinear_upsample, broadcast_spatial, conv2d
from .pooling import PoolSpec, _avg_pool64, cascade_sums, global_avg_pool
from .tensor import WeightTensor, as_fmap, concat_channels, rng_weights

KINDS = ("aspp", "aspp_plus", "module_a", "module_b", "custom")
PYRAMID_IMPLS = ("naive", "cascaded")
ASPP_RATES = (12, 24, 36)
VORTEX_KERNELS = (1, 3, 9, 27)

IMAGE_LEVEL = "image_level"
HEAD = "head"


@dataclass(frozen=True)
class BranchSpec:
    name: str
    pool_kernel: int = 1
    pool_dilation: int = 1
    conv_kernel: int = 3
    conv_dilation: int = 1

    def __post_init__(self):
        if not self.name or any(ch in self.name for ch in "[]\n"):
            raise ValueError(f"invalid branch name {self.name!r}")
        PoolSpec(self.pool_kernel, self.pool_dilation)
        if self.conv_kernel < 1 or self.conv_kernel % 2 == 0:
            raise ValueError(f"conv kernel must be odd, got {self.conv_kernel}")
        if self.conv_dilation < 1:
            raise ValueError(f"conv dilation must be >= 1, got {self.conv_dilation}")

    @property
    def pool_spec(self) -> PoolSpec:
        return PoolSpec(self.pool_kernel, self.pool_dilation)


def _geometry(branches):
    return [(b.pool_kernel, b.pool_dilation, b.conv_kernel, b.conv_dilation) for b in branches]


@dataclass(frozen=True)
class ModuleConfig:
    kind: str
    branches: tuple
    pyramid_impl: str = "naive"
    include_image_level: bool = False
    branch_out_c: int = 256

    def __post_init__(self):
        object.__setattr__(self, "branches", tuple(self.branches))
        if self.kind not in KINDS:
            raise ValueError(f"unknown module kind {self.kind!r}; expected one of {KINDS}")
        if self.pyramid_impl not in PYRAMID_IMPLS:
            raise ValueError(f"unknown pyramid impl {self.pyramid_impl!r}")
        if self.branch_out_c < 1:
            raise ValueError("branch_out_c must be positive")
        if not self.branches:
            raise ValueError("a module needs at least one branch")
        names = [b.name for b in self.branches]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate branch names in {names}")
        self._check_kind()
        if self.pyramid_impl == "cascaded":
            pyramid_plan(self)

    def _check_kind(self):
        geo = _geometry(self.branches)
        if self.kind == "aspp":
            want = [(1, 1, 1, 1)] + [(1, 1, 3, r) for r in ASPP_RATES]
        elif self.kind == "aspp_plus":
            want = [(1, 1, 3, 1)] + [(1, 1, 3, r) for r in ASPP_RATES]
        elif self.kind == "module_a":
            k = geo[0][0]
            want = [(k, 1, 1, 1)] + [(k, 1, 3, r) for r in ASPP_RATES]
        elif self.kind == "module_b":
            want = [(k, 1, 3, k) for k in VORTEX_KERNELS]
        else:
            return
        if geo != want:
            raise ValueError(f"{self.kind} branches must have geometry {want}, got {geo}")

    @property
    def out_c(self) -> int:
        return self.branch_out_c * len(self.branches)

    def branch(self, name) -> BranchSpec:
        for b in self.branches:
            if b.name == name:
                return b
        raise KeyError(name)


def aspp_config(branch_out_c=256, include_image_level=False) -> ModuleConfig:
    branches = [BranchSpec("conv1x1", conv_kernel=1)]
    branches += [BranchSpec(f"atrous{r}", conv_kernel=3, conv_dilation=r) for r in ASPP_RATES]
    return ModuleConfig("aspp", branches, include_image_level=include_image_level,
                        branch_out_c=branch_out_c)


def aspp_plus_config(branch_out_c=256, include_image_level=False) -> ModuleConfig:
    branches = [BranchSpec("conv3x3", conv_kernel=3)]
    branches += [BranchSpec(f"atrous{r}", conv_kernel=3, conv_dilation=r) for r in ASPP_RATES]
    return ModuleConfig("aspp_plus", branches, include_image_level=include_image_level,
                        branch_out_c=branch_out_c)


def module_a_config(k=5, branch_out_c=256, include_image_level=False) -> ModuleConfig:
    branches = [BranchSpec("conv1x1", pool_kernel=k, conv_kernel=1)]
    branches += [BranchSpec(f"atrous{r}", pool_kernel=k, conv_kernel=3, conv_dilation=r)
                 for r in ASPP_RATES]
    return ModuleConfig("module_a", branches, include_image_level=include_image_level,
                        branch_out_c=branch_out_c)


def module_b_config(pyramid_impl="naive", branch_out_c=256,
                    include_image_level=False) -> ModuleConfig:
    # conv dilation equals the pool kernel so the 27 branch spans 81 positions per axis
    branches = [BranchSpec(f"pool{k}", pool_kernel=k, conv_kernel=3, conv_dilation=k)
                for k in VORTEX_KERNELS]
    return ModuleConfig("module_b", branches, pyramid_impl=pyramid_impl,
                        include_image_level=include_image_level, branch_out_c=branch_out_c)


def pyramid_plan(cfg: ModuleConfig):
    """``(base_k, levels)`` of the cascade serving ``cfg``'s pooled branches."""
    kernels = sorted({b.pool_kernel for b in cfg.branches if b.pool_kernel > 1})
    if not kernels:
        raise ValueError("cascaded pyramid needs at least one pooled branch")
    if any(b.pool_dilation != 1 for b in cfg.branches if b.pool_kernel > 1):
        raise ValueError("cascaded pyramid needs pool_dilation 1 on pooled branches")
    base = kernels[0]
    levels = len(kernels)
    if kernels != [base**i for i in range(1, levels + 1)]:
        raise ValueError(f"pool kernels {kernels} are not successive powers of {base}")
    return base, levels


# --------------------------------------------------------------------------
# config files


def _parse_bool(text):
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _parse_int(key, text):
    try:
        return int(text)
    except ValueError:
        raise ValueError(f"{key}: expected an integer, got {text!r}") from None


_TOP_KEYS = {"kind", "pyramid_impl", "include_image_level", "branch_out_c"}
_BRANCH_KEYS = {"pool_kernel", "pool_dilation", "conv_kernel", "conv_dilation"}


def parse_config(text: str) -> ModuleConfig:
    """Parse the module config text format.

    Grammar: optional ``#``/``;`` comment lines, top-level ``key = value``
    lines (``kind``, ``pyramid_impl``, ``include_image_level``,
    ``branch_out_c``) followed by blocks::

        [branch NAME]
        pool_kernel = 3
        pool_dilation = 1
        conv_kernel = 3
        conv_dilation = 3

    Branch order in the file is the channel order of the output.
    """
    cp = configparser.ConfigParser(interpolation=None, comment_prefixes=("#", ";"))
    cp.optionxform = str
    cp.read_string("[module]\n" + text)
    top = dict(cp["module"])
    unknown = set(top) - _TOP_KEYS
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    if "kind" not in top:
        raise ValueError("config is missing 'kind'")
    branches = []
    for section in cp.sections():
        if section == "module":
            continue
        head, _, name = section.partition(" ")
        if head != "branch" or not name.strip():
            raise ValueError(f"unexpected section [{section}]")
        body = dict(cp[section])
        unknown = set(body) - _BRANCH_KEYS
        if unknown:
            raise ValueError(f"unknown keys in [{section}]: {sorted(unknown)}")
        kw = {k: _parse_int(k, v) for k, v in body.items()}
        branches.append(BranchSpec(name.strip(), **kw))
    return ModuleConfig(
        kind=top["kind"].strip(),
        branches=branches,
        pyramid_impl=top.get("pyramid_impl", "naive").strip(),
        include_image_level=_parse_bool(top.get("include_image_level", "false")),
        branch_out_c=_parse_int("branch_out_c", top.get("branch_out_c", "256")),
    )


def format_config(cfg: ModuleConfig) -> str:
    lines = [
        f"kind = {cfg.kind}",
        f"pyramid_impl = {cfg.pyramid_impl}",
        f"include_image_level = {str(cfg.include_image_level).lower()}",
        f"branch_out_c = {cfg.branch_out_c}",
    ]
    for b in cfg.branches:
        lines += [
            "",
            f"[branch {b.name}]",
            f"pool_kernel = {b.pool_kernel}",
            f"pool_dilation = {b.pool_dilation}",
            f"conv_kernel = {b.conv_kernel}",
            f"conv_dilation = {b.conv_dilation}",
        ]
    return "\n".join(lines) + "\n"


def load_config(path) -> ModuleConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def save_config(cfg: ModuleConfig, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(format_config(cfg))


# --------------------------------------------------------------------------
# forward


def random_bank(cfg: ModuleConfig, in_c: int, seed: int = 0, dtype=np.float64,
                n_classes=None) -> dict:
    """Seeded weights for every branch, plus image-level and head weights on request."""
    bank = {}
    for i, b in enumerate(cfg.branches):
        bank[b.name] = rng_weights(seed + i, cfg.branch_out_c, in_c,
                                   b.conv_kernel, b.conv_kernel, dtype)
    extra = cfg.branch_out_c if cfg.include_image_level else 0
    if cfg.include_image_level:
        bank[IMAGE_LEVEL] = rng_weights(seed + 1000, cfg.branch_out_c, in_c, 1, 1, dtype)
    if n_classes is not None:
        bank[HEAD] = rng_weights(seed + 2000, n_classes, cfg.out_c + extra, 1, 1, dtype)
    return bank


def branch_weights(cfg: ModuleConfig, bank, in_c: int):
    out = {}
    for b in cfg.branches:
        if b.name not in bank:
            raise KeyError(f"weight bank has no entry for branch {b.name!r}")
        wt = bank[b.name]
        if (wt.in_c, wt.kh, wt.kw) != (in_c, b.conv_kernel, b.conv_kernel):
            raise ValueError(
                f"branch {b.name!r} wants in_c={in_c}, kernel {b.conv_kernel}x{b.conv_kernel}; "
                f"bank holds in_c={wt.in_c}, kernel {wt.kh}x{wt.kw}")
        if wt.out_c != cfg.branch_out_c:
            raise ValueError(f"branch {b.name!r} wants out_c={cfg.branch_out_c}, "
                             f"bank holds {wt.out_c}")
        out[b.name] = wt
    return out


def pooled_inputs(x, cfg: ModuleConfig, counter=None) -> dict:
    """Float64 pooled map feeding each branch, keyed by branch name.

    Branches with the same pooling share one evaluation.
    """
    x64 = np.asarray(x, dtype=np.float64)
    by_spec = {}
    if cfg.pyramid_impl == "cascaded":
        base, levels = pyramid_plan(cfg)
        sums, counts = cascade_sums(x64, base, levels, counter)
        for i, (s, n) in enumerate(zip(sums, counts)):
            if counter is not None:
                counter.divides += s.size
            by_spec[(base ** (i + 1), 1)] = s / n
    out = {}
    for b in cfg.branches:
        key = (b.pool_kernel, b.pool_dilation)
        if key not in by_spec:
            if b.pool_kernel == 1:
                by_spec[key] = x64
            else:
                by_spec[key] = _avg_pool64(x64, b.pool_spec, counter)
        out[b.name] = by_spec[key]
    return out


def module_forward(x, cfg: ModuleConfig, bank, counter=None) -> np.ndarray:
    x = as_fmap(x)
    weights = branch_weights(cfg, bank, x.shape[2])
    pooled = pooled_inputs(x, cfg, counter)
    outs = [conv2d(pooled[b.name], weights[b.name], b.conv_dilation) for b in cfg.branches]
    return concat_channels(outs).astype(x.dtype)


def image_level_feature(x, wt: WeightTensor, h=None, w=None) -> np.ndarray:
    """Global average, 1x1 conv, broadcast back to ``h x w`` (defaults to ``x``'s size)."""
    x = as_fmap(x)
    if wt.in_c != x.shape[2]:
        raise ValueError(f"weights expect {wt.in_c} input channels, map has {x.shape[2]}")
    if (wt.kh, wt.kw) != (1, 1):
        raise ValueError("image-level weights must be 1x1")
    h = x.shape[0] if h is None else h
    w = x.shape[1] if w is None else w
    v = global_avg_pool(x)
    y = np.asarray(wt.weights, dtype=np.float64)[:, :, 0, 0] @ v + wt.bias
    return broadcast_spatial(y, h, w, x.dtype)


@dataclass(frozen=True)
class HeadConfig:
    proj: WeightTensor
    out_h: int
    out_w: int

    def __post_init__(self):
        if (self.proj.kh, self.proj.kw) != (1, 1):
            raise ValueError("head projection must be 1x1")
        if self.out_h < 1 or self.out_w < 1:
            raise ValueError("head output size must be positive")


def seg_head(y, yg, head: HeadConfig) -> np.ndarray:
    """Concatenate context and image-level features, project, upsample."""
    y = as_fmap(y)
    parts = [y]
    if yg is not None:
        yg = as_fmap(yg)
        if yg.shape[:2] != y.shape[:2]:
            raise ValueError(f"size mismatch: {y.shape[:2]} vs {yg.shape[:2]}")
        parts.append(yg.astype(y.dtype))
    feats = concat_channels(parts)
    if head.proj.in_c != feats.shape[2]:
        raise ValueError(f"head expects {head.proj.in_c} channels, got {feats.shape[2]}")
    logits = conv2d(feats, head.proj, 1)
    return bilinear_upsample(logits, head.out_h, head.out_w)


def pipeline_forward(x, cfg: ModuleConfig, bank, out_h=None, out_w=None) -> np.ndarray:
    """Context module, optional image-level branch, then the head in ``bank['head']``."""
    x = as_fmap(x)
    y = module_forward(x, cfg, bank)
    yg = None
    if cfg.include_image_level:
        if IMAGE_LEVEL not in bank:
            raise KeyError(f"weight bank has no {IMAGE_LEVEL!r} entry")
        yg = image_level_feature(x, bank[IMAGE_LEVEL])
    if HEAD not in bank:
        raise KeyError(f"weight bank has no {HEAD!r} entry")
    head = HeadConfig(bank[HEAD], out_h or x.shape[0], out_w or x.shape[1])
    return seg_head(y, yg, head)


def argmax_labels(logits) -> np.ndarray:
    """Per-position index of the largest channel; ties go to the lowest index."""
    logits = as_fmap(logits)
    return np.argmax(logits, axis=2)


def with_impl(cfg: ModuleConfig, impl: str) -> ModuleConfig:
    return replace(cfg, pyramid_impl=impl)
