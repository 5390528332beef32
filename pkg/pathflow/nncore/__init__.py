"""
Numerical core: layers with hand-derived backward passes, residual network, SGD, gradient checking
"""

from pathflow.nncore.tensor import DTYPE, Mode, as_tensor4, check_finite
from pathflow.nncore.layers import (
    conv2d, conv2d_forward, conv2d_backward,
    batchnorm, batchnorm_forward, batchnorm_backward,
    relu, relu_forward, relu_backward,
    maxpool2, maxpool2_forward, maxpool2_backward,
    global_avg_pool_forward, global_avg_pool_backward,
    dense_forward, dense_backward,
)
from pathflow.nncore.layer_spec import (
    LayerKind, LayerSpec, compose_output_shape, default_architecture,
)
from pathflow.nncore.params import NetworkParams, ParamBlock
from pathflow.nncore.residual import residual_block, residual_block_forward, residual_block_backward
from pathflow.nncore.network import ForwardResult, ResidualNetwork
from pathflow.nncore.optim import SGDOptimizer, sgd_step
from pathflow.nncore.gradcheck import GradCheckReport, grad_check, relative_error
from pathflow.nncore.serialization import decode_model, encode_model, load_model, save_model

__all__ = [
    'DTYPE', 'Mode', 'as_tensor4', 'check_finite',
    'conv2d', 'conv2d_forward', 'conv2d_backward',
    'batchnorm', 'batchnorm_forward', 'batchnorm_backward',
    'relu', 'relu_forward', 'relu_backward',
    'maxpool2', 'maxpool2_forward', 'maxpool2_backward',
    'global_avg_pool_forward', 'global_avg_pool_backward',
    'dense_forward', 'dense_backward',
    'LayerKind', 'LayerSpec', 'compose_output_shape', 'default_architecture',
    'NetworkParams', 'ParamBlock',
    'residual_block', 'residual_block_forward', 'residual_block_backward',
    'ForwardResult', 'ResidualNetwork',
    'SGDOptimizer', 'sgd_step',
    'GradCheckReport', 'grad_check', 'relative_error',
    'decode_model', 'encode_model', 'load_model', 'save_model',
]
