"""Small tensor/backprop engine: layers, losses, optimizers, builders."""

from .layers import (
    Conv2d,
    Dense,
    Flatten,
    LAYER_KINDS,
    MaxPool2d,
    ReLU,
    Sigmoid,
    Softmax,
    layer_kind,
)
from .losses import cross_entropy, cross_entropy_grad
from .network import (
    InitSpec,
    Network,
    build_4layer,
    build_16layer,
    gradient_check,
    shape_walk,
    vgg16_plan,
)
from .optim import AdaDelta, RmsProp, make_optimizer
from .train import TrainHistory, evaluate_accuracy, train
from .units import hebbian_weights, perceptron_output, sigmoid

__all__ = [
    "AdaDelta",
    "Conv2d",
    "Dense",
    "Flatten",
    "InitSpec",
    "LAYER_KINDS",
    "MaxPool2d",
    "Network",
    "ReLU",
    "RmsProp",
    "Sigmoid",
    "Softmax",
    "TrainHistory",
    "build_16layer",
    "build_4layer",
    "cross_entropy",
    "cross_entropy_grad",
    "evaluate_accuracy",
    "gradient_check",
    "hebbian_weights",
    "layer_kind",
    "make_optimizer",
    "perceptron_output",
    "shape_walk",
    "sigmoid",
    "train",
    "vgg16_plan",
]
