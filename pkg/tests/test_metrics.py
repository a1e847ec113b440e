"""Metric correctness: PSNR arithmetic and SSIM against a windowed oracle."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from copaint.metrics import (
    LUMA_WEIGHTS,
    MetricReport,
    gaussian_window,
    luminance,
    mse,
    psnr,
    report,
    ssim,
)


def brute_force_ssim(a, b, window=11, sigma=1.5, k1=0.01, k2=0.03):
    """Direct double-loop SSIM over luminance, one window at a time."""
    x = luminance(a)
    y = luminance(b)
    kern1d = gaussian_window(window, sigma)
    kern = np.outer(kern1d, kern1d)
    H, W = x.shape
    c1, c2 = k1 ** 2, k2 ** 2
    values = []
    for i in range(H - window + 1):
        for j in range(W - window + 1):
            px = x[i:i + window, j:j + window]
            py = y[i:i + window, j:j + window]
            mx = float((kern * px).sum())
            my = float((kern * py).sum())
            vx = float((kern * px * px).sum()) - mx * mx
            vy = float((kern * py * py).sum()) - my * my
            vxy = float((kern * px * py).sum()) - mx * my
            values.append(((2 * mx * my + c1) * (2 * vxy + c2))
                          / ((mx * mx + my * my + c1) * (vx + vy + c2)))
    return float(np.mean(values))


class TestPsnr:
    def test_identical_is_infinite(self):
        a = np.random.default_rng(0).uniform(0, 1, (16, 16, 3))
        assert math.isinf(psnr(a, a))

    def test_black_vs_white_is_zero_db(self):
        assert psnr(np.zeros((8, 8, 3)), np.ones((8, 8, 3))) == pytest.approx(0.0)

    def test_known_mse_gives_20db(self):
        a = np.zeros((10, 10, 3))
        b = np.full((10, 10, 3), 0.1)  # mse = 0.01
        assert psnr(a, b) == pytest.approx(20.0)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            psnr(np.zeros((4, 4, 3)), np.zeros((4, 5, 3)))

    def test_monotone_in_noise_amplitude(self):
        rng = np.random.default_rng(1)
        base = rng.uniform(0.3, 0.7, (24, 24, 3))
        noise = rng.uniform(-1, 1, (24, 24, 3))
        values = [psnr(base, np.clip(base + amp * noise, 0, 1))
                  for amp in (0.05, 0.1, 0.2, 0.4)]
        assert all(a > b for a, b in zip(values, values[1:]))


class TestSsim:
    def test_identical_is_one(self):
        a = np.random.default_rng(2).uniform(0, 1, (24, 24, 3))
        assert ssim(a, a) == pytest.approx(1.0)

    def test_flat_images_match_oracle(self):
        a = np.full((16, 16, 3), 0.2)
        b = np.full((16, 16, 3), 0.8)
        assert ssim(a, b) == pytest.approx(brute_force_ssim(a, b), abs=1e-12)

    def test_random_pair_matches_oracle(self):
        rng = np.random.default_rng(3)
        a = rng.uniform(0, 1, (18, 20, 3))
        b = np.clip(a + rng.normal(0, 0.15, a.shape), 0, 1)
        assert ssim(a, b) == pytest.approx(brute_force_ssim(a, b), abs=1e-10)

    def test_symmetry(self):
        rng = np.random.default_rng(4)
        a = rng.uniform(0, 1, (16, 16, 3))
        b = rng.uniform(0, 1, (16, 16, 3))
        assert ssim(a, b) == pytest.approx(ssim(b, a), abs=1e-12)

    def test_too_small_image_rejected(self):
        with pytest.raises(ValueError):
            ssim(np.zeros((8, 8, 3)), np.zeros((8, 8, 3)))

    def test_luma_weights_are_rec709(self):
        assert tuple(LUMA_WEIGHTS) == (0.2126, 0.7152, 0.0722)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_ssim_bounded_on_random_inputs(seed):
    rng = np.random.default_rng(seed)
    a = rng.uniform(0, 1, (14, 14, 3))
    b = rng.uniform(0, 1, (14, 14, 3))
    value = ssim(a, b)
    assert -1.0 <= value <= 1.0


class TestReport:
    def test_psnr_mse_consistency(self):
        rng = np.random.default_rng(5)
        a = rng.uniform(0, 1, (16, 16, 3))
        b = rng.uniform(0, 1, (16, 16, 3))
        rep = report(a, b)
        assert rep.psnr == pytest.approx(10 * math.log10(1.0 / rep.mse))

    def test_json_one_line(self):
        rep = MetricReport(mse=0.01, psnr=20.0, ssim=0.5)
        text = rep.to_json()
        assert "\n" not in text
        import json
        decoded = json.loads(text.replace("Infinity", "1e999"))
        assert decoded["psnr"] == pytest.approx(20.0)
