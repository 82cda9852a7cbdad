"""From-scratch neural classifiers: layers, losses, optimizer, training."""
from .adam import Adam
from .checkpoint import load_checkpoint, save_checkpoint
from .gradcheck import check_model_gradients, relative_error
from .layers import Dense, Lstm, PRelu, sigmoid, uniform_fan_in
from .losses import cross_entropy, softmax
from .network import (
    DNN_HIDDEN,
    LSTM_DENSE,
    LSTM_UNITS,
    REDUCED_LSTM_DENSE,
    REDUCED_LSTM_UNITS,
    DenseClassifier,
    LstmClassifier,
    build_model,
    reinit_output,
)
from .training import (
    TrainConfig,
    TrainResult,
    lr_at_epoch,
    predict,
    split_validation,
    train_model,
)

__all__ = [
    "Adam",
    "Dense",
    "DenseClassifier",
    "DNN_HIDDEN",
    "LSTM_DENSE",
    "LSTM_UNITS",
    "Lstm",
    "LstmClassifier",
    "PRelu",
    "REDUCED_LSTM_DENSE",
    "REDUCED_LSTM_UNITS",
    "TrainConfig",
    "TrainResult",
    "build_model",
    "check_model_gradients",
    "cross_entropy",
    "load_checkpoint",
    "lr_at_epoch",
    "predict",
    "reinit_output",
    "relative_error",
    "save_checkpoint",
    "sigmoid",
    "softmax",
    "split_validation",
    "train_model",
    "uniform_fan_in",
]
