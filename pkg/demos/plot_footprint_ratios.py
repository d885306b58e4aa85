"""
How much of the image does one output see?
==========================================

Utilization ratio of several context modules on a 65 x 65 map.
"""

from vortex_pooling.footprint import footprint, footprint_oracle
from vortex_pooling.modules import aspp_config, module_a_config, module_b_config

configs = {
    "ASPP": aspp_config(),
    "Module A (5x5)": module_a_config(5),
    "Module A (9x9)": module_a_config(9),
    "Module B": module_b_config(),
}

# unclipped counts offsets as if the map were infinite; clipped counts real pixels
for name, cfg in configs.items():
    free = footprint(cfg, 65, 65, mode="unclipped")
    real = footprint(cfg, 65, 65, mode="clipped")
    print(f"{name:15s} unclipped u={free.u:5d} r={free.r:.4f}   clipped u={real.u:5d} r={real.r:.4f}")

# the clipped count is checked against brute force: perturb each input pixel
# and see whether the centre output moves
cfg = module_a_config(5)
print("oracle agrees:", len(footprint_oracle(cfg, 17, 17)) == footprint(cfg, 17, 17).u)
