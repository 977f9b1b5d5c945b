"""Image conversion helpers.

Canonical in-memory image format: H x W x 3 float array in [-1, 1].
"""

import numpy as np
from PIL import Image as PILImage

from .errors import DimensionError


def check_image(img, resolution=None):
    img = np.asarray(img)
    if img.ndim != 3 or img.shape[2] != 3:
        raise DimensionError(f"expected HxWx3 image, got shape {img.shape}")
    if resolution is not None and img.shape[:2] != tuple(resolution):
        raise DimensionError(
            f"image resolution {img.shape[:2]} does not match expected {tuple(resolution)}"
        )
    return img


def to_uint8(img):
    """[-1,1] float -> [0,255] uint8."""
    arr = np.clip((np.asarray(img, dtype=np.float64) + 1.0) * 127.5, 0, 255)
    return np.round(arr).astype(np.uint8)


def from_uint8(arr):
    """[0,255] uint8 -> [-1,1] float32."""
    return (np.asarray(arr, dtype=np.float32) / 127.5) - 1.0


def save_png(img, path):
    PILImage.fromarray(to_uint8(img)).save(path)


def load_png(path):
    with PILImage.open(path) as im:
        return from_uint8(np.array(im.convert("RGB")))


def to_nchw(images, dtype, device="cpu"):
    """List/array of HWC images -> torch NCHW tensor."""
    import torch

    arr = np.stack([np.asarray(im) for im in images]).transpose(0, 3, 1, 2)
    return torch.as_tensor(arr, device=device).to(dtype)


def from_nchw(tensor):
    """Torch NCHW tensor -> list of HWC float arrays."""
    arr = tensor.detach().cpu().numpy().transpose(0, 2, 3, 1)
    return [a for a in arr]
