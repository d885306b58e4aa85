"""
Timing the pyramid
==================

Naive, cascaded and integral-image pyramids on a 129 x 129 x 64 float32 map.
Every contender is first checked against the naive result.
"""

from vortex_pooling.bench import bench_pyramid, predicted_adds

for r in bench_pyramid(k=3, levels=3, h=129, w=129, c=64, dtype="f32", reps=5):
    print(f"{r.impl_name:9s} {r.median_ns / 1e6:8.1f} ms  {r.speedup_vs_naive:5.1f}x  adds={r.add_count}")

# per output element: 9 + 81 + 729 taps directly, 3 * 9 through the cascade
print(predicted_adds(3, 3, 1, 1, 1, "naive"), "vs", 27, "adds per element")
