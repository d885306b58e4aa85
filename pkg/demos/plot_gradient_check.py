"""
Checking backward passes
========================

Finite differences and the adjoint identity for a convolution and a module.
"""

import numpy as np
from vortex_pooling import conv2d, rng_fill, rng_weights
from vortex_pooling.grad import GradOp, adjoint_gap, conv2d_backward, finite_diff_check

x = rng_fill(seed=3, h=8, w=8, c=2)
wt = rng_weights(seed=4, out_c=3, in_c=2, kh=3, kw=3)

op = GradOp("conv2d", lambda u: conv2d(u, wt, 2), lambda u, g: conv2d_backward(g, u, wt, 2)[0])
rep = finite_diff_check(op, x)
print(f"{rep.op_name}: worst relative error {rep.max_rel_err:.2e} over {rep.probes} probes")

# with the bias removed the map is linear, so <F u, v> must equal <u, F^T v>
from vortex_pooling.tensor import WeightTensor
lin = WeightTensor(wt.weights, np.zeros(3))
v = rng_fill(seed=5, h=8, w=8, c=3)
gap = adjoint_gap(lambda u: conv2d(u, lin, 2), lambda g: conv2d_backward(g, x, lin, 2)[0], x, v)
print(f"adjoint gap: {gap:.1e}")

# the whole library at once
from vortex_pooling.suites import gradient_suite
print("all ops pass:", all(r.passed for r in gradient_suite()))
