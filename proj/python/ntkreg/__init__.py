"""Python bindings for the ntkreg C++ core.

Exposes the main operations: sphere data generation, the ReLU tangent
kernel, network training, kernel least squares by gradient descent, and
the data-driven stopping rule.
"""

from ntkreg._core import (
    __version__,
    eigh,
    forward,
    generate_dataset,
    kappa,
    kernel_matrix,
    kls_fit_predict,
    rwy_stopping_time,
    sample_sphere,
    train_network,
)

__all__ = [
    "__version__",
    "eigh",
    "forward",
    "generate_dataset",
    "kappa",
    "kernel_matrix",
    "kls_fit_predict",
    "rwy_stopping_time",
    "sample_sphere",
    "train_network",
]
