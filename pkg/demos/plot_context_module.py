"""
Running a context module
========================

Forward pass of a vortex module plus image-level feature and a small
segmentation head, written out and read back as FMAP files.
"""

import tempfile
from pathlib import Path

import numpy as np
from vortex_pooling import fmap_read, fmap_write, rng_fill
from vortex_pooling.modules import (
    argmax_labels,
    module_b_config,
    module_forward,
    pipeline_forward,
    random_bank,
)

# 8 output channels per branch keeps the demo small
cfg = module_b_config("cascaded", branch_out_c=8, include_image_level=True)
x = rng_fill(seed=1, h=33, w=33, c=16)
bank = random_bank(cfg, in_c=16, seed=2, n_classes=5)

y = module_forward(x, cfg, bank)
print("module output:", y.shape)

# logits upsampled 8x, then per-pixel labels
logits = pipeline_forward(x, cfg, bank, out_h=264, out_w=264)
labels = argmax_labels(logits)
print("logits:", logits.shape, "label histogram:", np.bincount(labels.ravel(), minlength=5))

with tempfile.TemporaryDirectory() as tmp:
    path = Path(tmp) / "y.fmap"
    fmap_write(y, path)
    print("round trip exact:", np.array_equal(fmap_read(path), y))
