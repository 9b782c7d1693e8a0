"""PSNR and SSIM against brute-force loops."""

import math

import numpy as np
import pytest

from spikederain.analysis.metrics import SSIM_K1, SSIM_K2, gaussian_window_1d, psnr, ssim
from spikederain.tensor import ShapeError


def brute_psnr(a, b):
    total = 0.0
    for v, w in zip(a.ravel().tolist(), b.ravel().tolist()):
        total += (v - w) ** 2
    return 10.0 * math.log10(1.0 / (total / a.size))


def brute_ssim(a, b, size=11, sigma=1.5):
    x = a.mean(axis=2) if a.ndim == 3 else a
    y = b.mean(axis=2) if b.ndim == 3 else b
    k = [math.exp(-((i - (size - 1) / 2) ** 2) / (2 * sigma * sigma)) for i in range(size)]
    s = sum(k)
    w = [[k[i] * k[j] / (s * s) for j in range(size)] for i in range(size)]
    c1, c2 = SSIM_K1**2, SSIM_K2**2
    vals = []
    for r in range(x.shape[0] - size + 1):
        for c in range(x.shape[1] - size + 1):
            mx = my = sxx = syy = sxy = 0.0
            for i in range(size):
                for j in range(size):
                    p, q, g = x[r + i, c + j], y[r + i, c + j], w[i][j]
                    mx += g * p
                    my += g * q
            for i in range(size):
                for j in range(size):
                    p, q, g = x[r + i, c + j] - mx, y[r + i, c + j] - my, w[i][j]
                    sxx += g * p * p
                    syy += g * q * q
                    sxy += g * p * q
            vals.append((2 * mx * my + c1) * (2 * sxy + c2) / ((mx * mx + my * my + c1) * (sxx + syy + c2)))
    return sum(vals) / len(vals)


def test_window_normalised():
    assert gaussian_window_1d().sum() == pytest.approx(1.0, abs=1e-15)


@pytest.mark.parametrize("seed", range(3))
def test_psnr_matches_loop(seed):
    rng = np.random.default_rng(seed)
    a, b = rng.uniform(size=(16, 16, 3)), rng.uniform(size=(16, 16, 3))
    assert psnr(a, b) == pytest.approx(brute_psnr(a, b), abs=1e-9)


@pytest.mark.parametrize("seed", range(3))
def test_ssim_matches_loop(seed):
    rng = np.random.default_rng(seed)
    a = rng.uniform(size=(16, 16, 3))
    b = np.clip(a + rng.normal(0, 0.1, a.shape), 0, 1)
    assert ssim(a, b) == pytest.approx(brute_ssim(a, b), abs=1e-9)


def test_uniform_offset_is_twenty_db():
    a = np.full((16, 16), 0.3)
    assert psnr(a, a + 0.1) == pytest.approx(20.0, abs=1e-12)


def test_identical():
    a = np.random.default_rng(0).uniform(size=(16, 16))
    assert psnr(a, a) == math.inf
    assert ssim(a, a) == pytest.approx(1.0, abs=1e-12)


def test_symmetric(rng):
    a, b = rng.uniform(size=(16, 16)), rng.uniform(size=(16, 16))
    assert psnr(a, b) == psnr(b, a)
    assert ssim(a, b) == pytest.approx(ssim(b, a), abs=1e-15)


def test_inverted_structure_is_negative(rng):
    a = rng.uniform(size=(16, 16))
    assert ssim(a, 1.0 - a) < 0


def test_errors(rng):
    with pytest.raises(ShapeError):
        ssim(rng.uniform(size=(8, 8)), rng.uniform(size=(8, 8)))
    with pytest.raises(ShapeError):
        psnr(np.zeros(3), np.zeros(4))
    with pytest.raises(ValueError):
        psnr(np.zeros(3), np.ones(3), peak=0)
