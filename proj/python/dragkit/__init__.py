"""Region-based drag editing on toy latents."""

from dragkit._core import (
    CancelledError,
    DragConfig,
    DragkitError,
    NonFiniteLossError,
    RegionOp,
    build_gradient_mask,
    centroid,
    disc_mask,
    evaluate_edit,
    mask_iou,
    md1,
    md2,
    min_area_rect,
    region_weights,
    run_drag,
    run_point_drag,
    synthetic_suite,
    target_mask_at,
    transform_at,
    validate_dataset,
)

__version__ = "0.1.0"

__all__ = [
    "CancelledError",
    "DragConfig",
    "DragkitError",
    "NonFiniteLossError",
    "RegionOp",
    "build_gradient_mask",
    "centroid",
    "disc_mask",
    "evaluate_edit",
    "mask_iou",
    "md1",
    "md2",
    "min_area_rect",
    "region_weights",
    "run_drag",
    "run_point_drag",
    "synthetic_suite",
    "target_mask_at",
    "transform_at",
    "validate_dataset",
]
