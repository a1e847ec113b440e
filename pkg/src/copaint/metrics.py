"""Image similarity metrics: MSE, PSNR, and SSIM on linear-RGB canvases.

PSNR uses the per-channel-mean MSE variant (so all-black vs all-white is
exactly 0 dB for [0, 1] images). SSIM runs on Rec. 709 luminance with the
standard constants (k1=0.01, k2=0.03, 11-tap Gaussian window, sigma=1.5).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .brush import Canvas

SSIM_K1 = 0.01
SSIM_K2 = 0.03
SSIM_WINDOW = 11
SSIM_SIGMA = 1.5

# Rec. 709 luma weights applied to linear RGB.
LUMA_WEIGHTS = np.array([0.2126, 0.7152, 0.0722])


@dataclass(frozen=True)
class MetricReport:
    mse: float
    psnr: float
    ssim: float

    def to_json(self) -> str:
        def enc(v: float):
            return "Infinity" if math.isinf(v) else f"{v:.6f}"
        return ('{"mse": %s, "psnr": %s, "ssim": %s}'
                % (enc(self.mse), enc(self.psnr), enc(self.ssim)))


def _check_pair(a: Canvas, b: Canvas):
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")


def mse(a: Canvas, b: Canvas) -> float:
    """Mean squared error averaged over pixels and channels."""
    _check_pair(a, b)
    d = np.asarray(a, dtype=np.float64) - np.asarray(b, dtype=np.float64)
    return float(np.mean(d * d))


def psnr(a: Canvas, b: Canvas) -> float:
    """Peak signal-to-noise ratio in dB for [0, 1] images; inf when identical."""
    m = mse(a, b)
    if m == 0.0:
        return math.inf
    return 10.0 * math.log10(1.0 / m)


def luminance(image: Canvas) -> np.ndarray:
    if image.ndim == 2:
        return np.asarray(image, dtype=np.float64)
    return np.asarray(image, dtype=np.float64) @ LUMA_WEIGHTS


def gaussian_window(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> np.ndarray:
    half = (size - 1) / 2.0
    xs = np.arange(size, dtype=np.float64) - half
    k = np.exp(-0.5 * (xs / sigma) ** 2)
    return k / k.sum()


def _filter2_valid(img: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """Separable 'valid'-mode correlation with a 1D kernel applied on both axes."""
    n = kernel.size
    H, W = img.shape
    # rows
    tmp = np.zeros((H, W - n + 1))
    for k in range(n):
        tmp += kernel[k] * img[:, k:W - n + 1 + k]
    out = np.zeros((H - n + 1, W - n + 1))
    for k in range(n):
        out += kernel[k] * tmp[k:H - n + 1 + k, :]
    return out


def ssim(a: Canvas, b: Canvas, window: int = SSIM_WINDOW,
         sigma: float = SSIM_SIGMA) -> float:
    """Mean local structural similarity over luminance; symmetric, ssim(x,x)=1."""
    _check_pair(a, b)
    x = luminance(a)
    y = luminance(b)
    if x.shape[0] < window or x.shape[1] < window:
        raise ValueError(f"images smaller than the {window}x{window} SSIM window")
    kern = gaussian_window(window, sigma)
    c1 = SSIM_K1 ** 2
    c2 = SSIM_K2 ** 2
    mu_x = _filter2_valid(x, kern)
    mu_y = _filter2_valid(y, kern)
    xx = _filter2_valid(x * x, kern) - mu_x * mu_x
    yy = _filter2_valid(y * y, kern) - mu_y * mu_y
    xy = _filter2_valid(x * y, kern) - mu_x * mu_y
    num = (2.0 * mu_x * mu_y + c1) * (2.0 * xy + c2)
    den = (mu_x ** 2 + mu_y ** 2 + c1) * (xx + yy + c2)
    return float(np.mean(num / den))


def report(a: Canvas, b: Canvas) -> MetricReport:
    return MetricReport(mse=mse(a, b), psnr=psnr(a, b), ssim=ssim(a, b))
