"""sRGB <-> CIELAB conversion and luminance normalization.

Conversions use the D65 white point and the standard sRGB transfer function
throughout, so results are bit-stable across platforms.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameterError

# sRGB (linear) -> XYZ, D65, 2 degree observer.
_RGB_TO_XYZ = np.array([[0.4124564, 0.3575761, 0.1804375],
                        [0.2126729, 0.7151522, 0.0721750],
                        [0.0193339, 0.1191920, 0.9503041]])
_XYZ_TO_RGB = np.array([[3.2404542, -1.5371385, -0.4985314],
                        [-0.9692660, 1.8760108, 0.0415560],
                        [0.0556434, -0.2040259, 1.0572252]])
_WHITE = np.array([0.95047, 1.0, 1.08883])
_DELTA = 6.0 / 29.0


@dataclass(frozen=True)
class LuminanceStats:
    """Reference mean and standard deviation of the CIELAB L channel."""

    ref_mean: float
    ref_std: float

    def __post_init__(self):
        if not 0.0 <= self.ref_mean <= 100.0:
            raise InvalidParameterError(
                f"ref_mean must be in [0, 100], got {self.ref_mean}")
        if self.ref_std < 0.0:
            raise InvalidParameterError(
                f"ref_std must be >= 0, got {self.ref_std}")


def _check_rgb(image: np.ndarray) -> np.ndarray:
    image = np.asarray(image)
    if image.ndim != 3 or image.shape[2] != 3:
        raise InvalidParameterError(
            f"expected an (H, W, 3) RGB image, got shape {image.shape}")
    return image


def srgb_to_lab(image: np.ndarray) -> np.ndarray:
    """8-bit sRGB image to CIELAB (L in [0, 100]), float64."""
    rgb = _check_rgb(image).astype(np.float64) / 255.0
    linear = np.where(rgb > 0.04045, ((rgb + 0.055) / 1.055) ** 2.4, rgb / 12.92)
    xyz = linear @ _RGB_TO_XYZ.T
    t = xyz / _WHITE
    f = np.where(t > _DELTA ** 3, np.cbrt(t), t / (3.0 * _DELTA ** 2) + 4.0 / 29.0)
    lab = np.empty_like(xyz)
    lab[..., 0] = 116.0 * f[..., 1] - 16.0
    lab[..., 1] = 500.0 * (f[..., 0] - f[..., 1])
    lab[..., 2] = 200.0 * (f[..., 1] - f[..., 2])
    return lab


def lab_to_srgb(lab: np.ndarray) -> np.ndarray:
    """CIELAB back to 8-bit sRGB with per-channel clamping."""
    lab = np.asarray(lab, dtype=np.float64)
    fy = (lab[..., 0] + 16.0) / 116.0
    fx = fy + lab[..., 1] / 500.0
    fz = fy - lab[..., 2] / 200.0
    f = np.stack([fx, fy, fz], axis=-1)
    t = np.where(f > _DELTA, f ** 3, 3.0 * _DELTA ** 2 * (f - 4.0 / 29.0))
    xyz = t * _WHITE
    linear = xyz @ _XYZ_TO_RGB.T
    linear = np.clip(linear, 0.0, None)
    rgb = np.where(linear > 0.0031308,
                   1.055 * linear ** (1.0 / 2.4) - 0.055, 12.92 * linear)
    return np.clip(np.rint(rgb * 255.0), 0, 255).astype(np.uint8)


def luminance_stats(image: np.ndarray) -> LuminanceStats:
    """Mean and standard deviation of the image's CIELAB L channel."""
    lum = srgb_to_lab(image)[..., 0]
    return LuminanceStats(ref_mean=float(np.clip(lum.mean(), 0.0, 100.0)),
                          ref_std=float(lum.std()))


def normalize_luminance(image: np.ndarray, ref: LuminanceStats) -> np.ndarray:
    """Shift and scale the L channel to the reference statistics.

    L is affinely mapped so its mean and standard deviation match ``ref``
    (clamped to [0, 100]); the a and b channels pass through unchanged.
    """
    lab = srgb_to_lab(image)
    lum = lab[..., 0]
    std = max(float(lum.std()), 1e-6)
    lab[..., 0] = np.clip(
        (lum - lum.mean()) * (ref.ref_std / std) + ref.ref_mean, 0.0, 100.0)
    return lab_to_srgb(lab)
