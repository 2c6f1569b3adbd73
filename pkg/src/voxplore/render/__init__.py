"""Front-to-back volume renderer with probabilistic shading modes."""

from .tf import (ClassTransferFunction, TfError, TransferFunction1D,
                 TransferFunctionSet, default_class_tfs, grayscale_tf)
from .camera import Camera, CameraError
from .shading import shade_probabilistic, shade_probability_intensity
from .raycast import RenderConfig, render, render_intensity
from .slices import render_slice
from .image import encode_png, save_png, to_uint8
from .palette import CLASS_PALETTE, class_color

__all__ = [
    "ClassTransferFunction", "TfError", "TransferFunction1D",
    "TransferFunctionSet", "default_class_tfs", "grayscale_tf",
    "Camera", "CameraError", "shade_probabilistic",
    "shade_probability_intensity", "RenderConfig", "render",
    "render_intensity", "render_slice", "encode_png", "save_png",
    "to_uint8", "CLASS_PALETTE", "class_color",
]
