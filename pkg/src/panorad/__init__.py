"""Panoramic dental radiograph classification toolkit.

Two pipelines over tooth crops: a bag-of-visual-words chain (dense local
descriptors, learned codebook, locality-constrained encoding, spatial
pyramid pooling, k-NN or pairwise SVM) and a small convolutional network
stack, plus a shared evaluation harness and command-line interface.
"""

__version__ = "0.1.0"

from .errors import ConfigError, DataError, NumericError, ToolError

__all__ = [
    "ConfigError",
    "DataError",
    "NumericError",
    "ToolError",
    "__version__",
]
