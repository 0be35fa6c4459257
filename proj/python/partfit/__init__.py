"""Part re-projection distance shape fitting."""

from ._core import (
    PART_NAMES,
    __version__,
    chamfer_loss,
    check_gradients,
    distance_descriptor,
    make_toy,
    nn_directed_loss,
    reprojection_gradient,
    reprojection_loss,
    soft_silhouette_loss,
    toy_recovery,
)

__all__ = [
    "PART_NAMES",
    "__version__",
    "chamfer_loss",
    "check_gradients",
    "distance_descriptor",
    "make_toy",
    "nn_directed_loss",
    "reprojection_gradient",
    "reprojection_loss",
    "soft_silhouette_loss",
    "toy_recovery",
]
