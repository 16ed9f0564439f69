from .checkpoint import load_checkpoint, save_checkpoint
from .layers import (
    BBBDense,
    Dense,
    DropConnectDense,
    Dropout,
    DropoutDense,
    FlipoutDense,
    bbb_dense_forward,
    dense_forward,
    dropconnect_forward,
    dropout_forward,
    flipout_dense_forward,
    kl_gaussian,
    kl_gaussian_grad,
    softplus,
)
from .losses import gaussian_nll_grad, gaussian_nll_loss, mse_grad, mse_loss
from .lstm import LSTM, lstm_step
from .model import METHODS, ARCHITECTURES, Model, ModelConfig, build_model
from .optim import adam_init, adam_step
from .train import TrainConfig, train
