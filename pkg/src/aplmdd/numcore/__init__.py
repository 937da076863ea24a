"""Small numpy tensor kernels with explicit backward passes."""
from .checkpoint import CheckpointError, load_arrays, save_arrays
from .gradcheck import NonFiniteError, grad_check, numeric_grad, relative_error
from .layers import (
    ShapeError,
    batchnorm_backward,
    batchnorm_forward,
    concat_backward,
    concat_forward,
    conv2d_backward,
    conv2d_forward,
    conv_out_size,
    dropout_backward,
    dropout_forward,
    embedding_backward,
    embedding_forward,
    linear_backward,
    linear_forward,
    log_softmax_backward,
    log_softmax_forward,
    relu_backward,
    relu_forward,
    softmax_backward,
    softmax_forward,
)
from .lstm import bilstm_backward, bilstm_forward, length_mask, lstm_backward, lstm_forward, sigmoid
from .optim import OptimConfig, Optimizer, sgd_update
