"""Gated imaging simulation and inversion.

Images are float64 arrays shaped (height, width); gated slices are stacked
as (3, height, width). Depth is Euclidean range in metres.
"""

from ._gatedsim import (
    CalibrationError,
    Profile,
    cyclic_loss,
    default_profiles,
    make_scene,
    masks,
    metrics,
    photometric_loss,
    ratio_depth,
    render,
    solve,
    solve_pixel,
    warp,
)

__all__ = [
    "CalibrationError",
    "Profile",
    "cyclic_loss",
    "default_profiles",
    "make_scene",
    "masks",
    "metrics",
    "photometric_loss",
    "ratio_depth",
    "render",
    "solve",
    "solve_pixel",
    "warp",
]
