"""Image quality metrics against a known ground truth."""

from dataclasses import dataclass
import math

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import DimensionError, ParameterError
from .transform import as_image

CSV_FIELDS = ("psnr", "ssim", "rel_l2", "height", "width")


def _pair(truth, test):
    truth, test = as_image(truth), as_image(test)
    if truth.shape != test.shape:
        raise DimensionError(f"shape mismatch: {truth.shape} vs {test.shape}")
    return truth, test


def psnr(truth, test, peak=1.0):
    """Peak signal-to-noise ratio in dB; ``math.inf`` only when identical."""
    if not peak > 0:
        raise ParameterError(f"peak must be > 0, got {peak}")
    truth, test = _pair(truth, test)
    mse = float(np.mean((test - truth) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(peak * peak / mse)


def ssim(truth, test, window=7, peak=1.0):
    """Mean SSIM over every fully contained ``window x window`` patch.

    Uses a uniform window, population (1/N) moments and the usual constants
    ``C1 = (0.01 peak)^2``, ``C2 = (0.03 peak)^2``. No padding is applied.
    """
    truth, test = _pair(truth, test)
    if window < 3 or window % 2 == 0:
        raise ParameterError(f"window must be odd and >= 3, got {window}")
    if min(truth.shape) < window:
        raise ParameterError(f"window {window} larger than image {truth.shape}")
    c1 = (0.01 * peak) ** 2
    c2 = (0.03 * peak) ** 2

    def local_mean(a):
        return sliding_window_view(a, (window, window)).mean(axis=(-2, -1))

    mu_x, mu_y = local_mean(truth), local_mean(test)
    var_x = local_mean(truth * truth) - mu_x**2
    var_y = local_mean(test * test) - mu_y**2
    cov = local_mean(truth * test) - mu_x * mu_y
    num = (2 * mu_x * mu_y + c1) * (2 * cov + c2)
    den = (mu_x**2 + mu_y**2 + c1) * (var_x + var_y + c2)
    return float(np.mean(num / den))


def rel_l2(truth, test):
    """``||test - truth|| / ||truth||``; asymmetric by definition."""
    truth, test = _pair(truth, test)
    norm = float(np.linalg.norm(truth))
    if norm == 0.0:
        raise ParameterError("relative error undefined for an all-zero truth image")
    return float(np.linalg.norm(test - truth)) / norm


@dataclass(frozen=True)
class QualityReport:
    psnr: float
    ssim: float
    rel_l2: float
    height: int
    width: int

    def csv_row(self):
        return {k: getattr(self, k) for k in CSV_FIELDS}


def evaluate(truth, test, window=7, peak=1.0):
    """All three metrics in one report."""
    truth, test = _pair(truth, test)
    return QualityReport(
        psnr=psnr(truth, test, peak),
        ssim=ssim(truth, test, window, peak),
        rel_l2=rel_l2(truth, test),
        height=truth.shape[0],
        width=truth.shape[1],
    )
