"""Edge Wasserstein distance losses for oriented boxes and quadrilaterals."""
from ._backend import BACKEND
from .ewd import (LossConfig, NormScheme, PostFn, Variance, Variant, edwd_obox, edwd_polygon,
                  egwd_obox, gwd_box, kld_box, loss, smooth_l1_loss)
from .geom import BoxDef, OBox5, Quad, canonicalize, rotated_iou, to_corners, to_edges
from .grad import BoxGrad, edwd_grad, fd_gradient

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "BoxDef", "BoxGrad", "LossConfig", "NormScheme", "OBox5", "PostFn", "Quad",
    "Variance", "Variant", "canonicalize", "edwd_grad", "edwd_obox", "edwd_polygon", "egwd_obox",
    "fd_gradient", "gwd_box", "kld_box", "loss", "rotated_iou", "smooth_l1_loss", "to_corners",
    "to_edges",
]
