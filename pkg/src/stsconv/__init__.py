"""stsconv: a spatiotemporal-convolution laboratory.

Spatial-temporal separable (STS) convolution, 2D-to-3D weight
initialization, temporal-slice probing, receptive-field accounting,
training-budget planning, and a desk-scale training harness, on top of
deterministic conv kernels with a numba fast path and a pure-numpy
fallback (select with the STSCONV_BACKEND environment variable).
"""

from .backend import get_backend, numba_available, set_num_threads, use_backend
from .budget import (
    BUILTIN_DATASETS,
    DatasetSpec,
    SchedulePlan,
    budget_multiplier,
    format_multiplier,
    from_scratch,
    images_per_epoch,
    plan_fixed_budget,
    plan_sota,
    total_budget,
)
from .checkpoint import Checkpoint, CheckpointError, load_checkpoint, save_checkpoint
from .convops import ConvSpec, conv1d, conv2d, conv3d, conv_backward, mac_count, naive_conv
from .dataset import MOTIONS, SHAPE_STAMPS, MovingShapesDataset, gen_moving_shapes, split
from .gradcheck import max_rel_error, numerical_gradient, run_gradcheck
from .harness import (
    PipelineConfig,
    TrainConfig,
    build_tiny_net,
    pipeline_pretrain_finetune,
    train,
    transfer_2d_weights,
)
from .inflate import (
    ZERO_INIT,
    InflationRates,
    inflate_2d_to_3d,
    init_sts_from_2d,
    zero_init_3d,
)
from .network import Net, NetworkSpec, init_params
from .probe import LinearProbeConfig, linear_probe, probe_network, slice_kernel, stack_slices
from .rf import DilatedSplit, RFTerm, comparison_table, rf_of_layer, rf_of_stack, render_terms
from .sts import (
    STSConfig,
    STSParams,
    assemble_baseline_weights,
    init_sts_random,
    split_baseline_weights,
    sts_backward,
    sts_forward,
    sts_mac_count,
    sts_param_count,
)
from .tensors import ShapeError

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
