"""Unitary 2-D Fourier transforms, radial k-space masks and zero filling.

Conventions
-----------
Images are real ``float64`` arrays of shape ``(height, width)``; k-space
arrays are ``complex128`` of the same shape with DC moved to the centre
bin ``(height // 2, width // 2)``; masks are boolean arrays, ``True``
meaning the bin was acquired. Both transform directions use ``norm="ortho"``
so Parseval holds without extra scale factors.
"""

import math

import numpy as np

from .errors import DimensionError, ParameterError

__all__ = [
    "as_image",
    "as_kspace",
    "as_mask",
    "dft2_forward",
    "dft2_inverse",
    "radial_mask",
    "lines_for_ratio",
    "apply_mask",
    "sampling_ratio",
    "zero_filled_recon",
]


def _check_2d(arr, what):
    if arr.ndim != 2:
        raise DimensionError(f"{what} must be 2-D, got shape {arr.shape}")
    if arr.size == 0:
        raise DimensionError(f"{what} has zero size {arr.shape}")


def as_image(img):
    """Validate and return `img` as a finite real float64 array."""
    arr = np.asarray(img)
    if np.iscomplexobj(arr):
        raise ParameterError("image must be real-valued")
    arr = arr.astype(np.float64, copy=False)
    _check_2d(arr, "image")
    if not np.all(np.isfinite(arr)):
        raise ParameterError("image contains NaN or Inf")
    return arr


def as_kspace(ks):
    """Validate and return `ks` as a finite complex128 array."""
    arr = np.asarray(ks).astype(np.complex128, copy=False)
    _check_2d(arr, "k-space")
    if not (np.all(np.isfinite(arr.real)) and np.all(np.isfinite(arr.imag))):
        raise ParameterError("k-space contains NaN or Inf")
    return arr


def as_mask(m, shape=None):
    """Validate a sampling mask, optionally against an expected shape."""
    arr = np.asarray(m)
    if arr.dtype != np.bool_:
        raise ParameterError(f"mask must be boolean, got {arr.dtype}")
    _check_2d(arr, "mask")
    if shape is not None and arr.shape != tuple(shape):
        raise DimensionError(f"mask shape {arr.shape} does not match {tuple(shape)}")
    if not arr.any():
        raise ParameterError("mask keeps no bins")
    return arr


def dft2_forward(img):
    """Unitary DC-centred 2-D DFT of a real image."""
    img = as_image(img)
    return np.fft.fftshift(np.fft.fft2(img, norm="ortho"))


def dft2_inverse(ks, return_residual=False):
    """Real part of the unitary inverse DFT of DC-centred k-space.

    Parameters
    ----------
    ks : array_like
        Complex k-space, DC at the centre bin.
    return_residual : bool
        If True also return the largest absolute imaginary component that
        was discarded by the real projection.

    Returns
    -------
    image : ndarray
        Real image.
    residual : float
        Only when `return_residual` is True.
    """
    ks = as_kspace(ks)
    full = np.fft.ifft2(np.fft.ifftshift(ks), norm="ortho")
    image = np.ascontiguousarray(full.real)
    if return_residual:
        return image, float(np.max(np.abs(full.imag)))
    return image


def _line_bins(height, width, angle):
    # Bresenham walk along the major axis of the spoke, one bin per step,
    # through the DC bin and out to both grid edges.
    cy, cx = height // 2, width // 2
    c, s = math.cos(angle), math.sin(angle)
    bins = np.zeros((height, width), dtype=bool)
    if abs(c) >= abs(s):
        cols = np.arange(width)
        rows = np.rint(cy + (cols - cx) * (s / c)).astype(np.int64)
    else:
        rows = np.arange(height)
        cols = np.rint(cx + (rows - cy) * (c / s)).astype(np.int64)
    inside = (rows >= 0) & (rows < height) & (cols >= 0) & (cols < width)
    bins[rows[inside], cols[inside]] = True
    return bins


def radial_mask(width, height, num_lines):
    """Radial sampling mask of `num_lines` spokes through the DC bin.

    Spoke ``k`` runs at angle ``k * pi / num_lines`` from the horizontal
    frequency axis and spans the whole grid, rasterized with one bin per
    step along its major axis (Bresenham). No randomness is involved.
    """
    if int(num_lines) != num_lines or num_lines < 1:
        raise ParameterError(f"num_lines must be an integer >= 1, got {num_lines!r}")
    if width < 1 or height < 1:
        raise DimensionError(f"invalid mask size {width}x{height}")
    mask = np.zeros((height, width), dtype=bool)
    for k in range(int(num_lines)):
        mask |= _line_bins(height, width, k * math.pi / num_lines)
    mask[height // 2, width // 2] = True
    return mask


def sampling_ratio(m):
    """Fraction of acquired bins."""
    m = as_mask(m)
    return int(np.count_nonzero(m)) / m.size


def lines_for_ratio(width, height, target_ratio):
    """Smallest spoke count whose radial mask reaches `target_ratio`.

    Spoke sets for consecutive counts are not nested, so the ratio can dip
    slightly near saturation; a linear sweep keeps the "smallest count"
    definition exact. The result is monotone in `target_ratio`.
    """
    if not (0.0 < target_ratio <= 1.0):
        raise ParameterError(f"target_ratio must lie in (0, 1], got {target_ratio!r}")
    # Beyond ~pi * max(w, h) spokes every bin has been visited.
    limit = 8 * max(width, height) + 8
    for n in range(1, limit + 1):
        if sampling_ratio(radial_mask(width, height, n)) >= target_ratio:
            return n
    raise ParameterError(f"ratio {target_ratio} unreachable on {width}x{height}")


def apply_mask(ks, m):
    """Zero every bin not kept by `m`."""
    ks = as_kspace(ks)
    m = as_mask(m, ks.shape)
    return np.where(m, ks, 0j)


def zero_filled_recon(ks_masked):
    """Inverse transform of masked k-space with missing bins left at zero."""
    return dft2_inverse(ks_masked)
