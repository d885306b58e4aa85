"""Multi-scale context pooling kernels: pooling pyramids, context modules,
their gradients, dependency footprints and timing."""
from .conv import bilinear_upsample, broadcast_spatial, conv2d
from .footprint import CostModel, FootprintReport, footprint, footprint_oracle, op_count
from .grad import (
    GradCheckReport,
    GradOp,
    avg_pool_backward,
    bilinear_upsample_backward,
    conv2d_backward,
    finite_diff_check,
    module_backward,
    pyramid_cascaded_backward,
    pyramid_naive_backward,
)
from .modules import (
    BranchSpec,
    HeadConfig,
    ModuleConfig,
    argmax_labels,
    aspp_config,
    aspp_plus_config,
    image_level_feature,
    module_a_config,
    module_b_config,
    module_forward,
    parse_config,
    format_config,
    seg_head,
)
from .pooling import (
    OpCounter,
    PoolSpec,
    Pyramid,
    avg_pool,
    count_map,
    global_avg_pool,
    pyramid_cascaded,
    pyramid_naive,
    sum_pool,
)
from .tensor import (
    WeightTensor,
    concat_channels,
    fmap_read,
    fmap_write,
    rng_fill,
    rng_weights,
    weight_bank_read,
    weight_bank_write,
)

__version__ = "0.1.0"
