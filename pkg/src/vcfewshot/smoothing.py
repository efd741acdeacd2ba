"""Separable 2D Gaussian smoothing over spatial probability maps.

The kernel is sampled at integer offsets, truncated at radius ceil(3 sigma)
and normalized to sum 1. The default "renormalize" border mode divides the
zero-padded convolution by the convolved all-ones map, i.e. every output
pixel is a weighted average over the part of the kernel window that lies
inside the lattice. "wrap" pads periodically (interior behaviour is
identical; mainly useful for mean-preservation checks).
"""

import math

import numpy as np

from .errors import InputError


def gaussian_kernel1d(sigma: float) -> np.ndarray:
    """Normalized 1D Gaussian taps at offsets -r..r with r = ceil(3 sigma)."""
    if sigma < 0:
        raise InputError(f"sigma must be non-negative, got {sigma}")
    radius = math.ceil(3.0 * sigma)
    if sigma == 0.0 or radius == 0:
        return np.ones(1)
    offsets = np.arange(-radius, radius + 1, dtype=np.float64)
    kernel = np.exp(-0.5 * (offsets / sigma) ** 2)
    return kernel / kernel.sum()


def _conv_axis(arr: np.ndarray, kernel: np.ndarray, axis: int, pad_mode: str) -> np.ndarray:
    radius = len(kernel) // 2
    if radius == 0:
        return arr * kernel[0]
    pad = [(0, 0)] * arr.ndim
    pad[axis] = (radius, radius)
    padded = np.pad(arr, pad, mode=pad_mode)
    out = np.zeros_like(arr, dtype=np.float64)
    for k, weight in enumerate(kernel):
        sl = [slice(None)] * arr.ndim
        sl[axis] = slice(k, k + arr.shape[axis])
        out += weight * padded[tuple(sl)]
    return out


def gaussian_blur(maps: np.ndarray, sigma: float, mode: str = "renormalize") -> np.ndarray:
    """Blur the two leading (spatial) axes of ``maps``; trailing axes are
    independent channels.

    Args:
        maps: (H, W) or (H, W, ...) array.
        sigma: Gaussian width; 0 is the identity.
        mode: "renormalize" (clipped window, weights re-normalized at the
            borders) or "wrap" (periodic padding).
    """
    if mode not in ("renormalize", "wrap"):
        raise InputError(f"unknown blur mode {mode!r}")
    arr = np.asarray(maps, dtype=np.float64)
    if arr.ndim < 2:
        raise InputError("maps must have at least 2 dimensions")
    kernel = gaussian_kernel1d(sigma)
    if len(kernel) == 1:
        return arr.copy()
    pad_mode = "constant" if mode == "renormalize" else "wrap"
    out = _conv_axis(_conv_axis(arr, kernel, 0, pad_mode), kernel, 1, pad_mode)
    if mode == "renormalize":
        ones = np.ones(arr.shape[:2])
        weight = _conv_axis(_conv_axis(ones, kernel, 0, pad_mode), kernel, 1, pad_mode)
        out /= weight.reshape(weight.shape + (1,) * (arr.ndim - 2))
    return out
