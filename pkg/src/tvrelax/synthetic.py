"""Synthetic test data: binary shapes, piecewise-constant images, 1-d examples, noise.

Images live on the unit square sampled at pixel centres, so an ``n x n``
image has spacing ``1/n``.
"""
from __future__ import annotations

import numpy as np


def _centres(n):
    return (np.arange(n) + 0.5) / n


def disk(n=64, radius=0.3, centre=(0.5, 0.5)):
    """Indicator of a disk on an ``n x n`` image."""
    y, x = np.meshgrid(_centres(n), _centres(n), indexing="ij")
    return (((x - centre[1]) ** 2 + (y - centre[0]) ** 2) <= radius**2).astype(float)


def shapes(n=64):
    """Binary image with a disk, a square and a thin bar."""
    y, x = np.meshgrid(_centres(n), _centres(n), indexing="ij")
    u = ((x - 0.32) ** 2 + (y - 0.35) ** 2 <= 0.18**2)
    u |= (np.abs(x - 0.72) <= 0.14) & (np.abs(y - 0.62) <= 0.14)
    u |= (np.abs(x - 0.5) <= 0.35) & (np.abs(y - 0.88) <= 0.04)
    return u.astype(float)


def two_level(n=32, low=0.2, high=0.8, radius=0.3):
    """Disk of value ``high`` on a background of value ``low``."""
    mask = disk(n, radius)
    return np.where(mask > 0, high, low)


def quadrants(n=64, levels=(0.0, 1 / 3, 2 / 3, 1.0)):
    """Four constant quadrants, row-major: top-left, top-right, bottom-left, bottom-right."""
    f = np.empty((n, n))
    k = n // 2
    f[:k, :k], f[:k, k:], f[k:, :k], f[k:, k:] = levels
    return f


def add_noise(f, level, seed):
    """Add Gaussian noise of standard deviation ``level * (max f - min f)``.

    The result is clipped to [0, 1]. Returns the noisy field and the
    empirical standard deviation of the noise before clipping.
    """
    if seed is None:
        raise ValueError("a seed is required for reproducible noise")
    if level < 0:
        raise ValueError("noise level must be nonnegative")
    f = np.asarray(f, dtype=float)
    sigma = level * float(f.max() - f.min())
    noise = np.random.default_rng(seed).standard_normal(f.shape) * sigma
    emp = float(noise.std())
    return np.clip(f + noise, 0.0, 1.0), emp


def standard_denoise_instance(n=64, level=0.3, seed=0):
    """The 64x64 binary denoising test case: clean shapes and a noisy copy."""
    clean = shapes(n)
    noisy, _ = add_noise(clean, level, seed)
    return clean, noisy


def interval_centres(n, a=-1.0, b=1.0):
    """Cell centres and spacing of a uniform grid on ``(a, b)``."""
    h = (b - a) / n
    return a + (np.arange(n) + 0.5) * h, h


def step_example(n=256):
    """Data ``f = 1`` on ``x <= 0`` and ``0`` elsewhere on ``(-1, 1)``.

    Returns ``(x, f, h)``; the binary denoising problem with ``beta < 1/4``
    has the unique solution ``1{x <= 0}`` with objective ``beta - 1/2``.
    """
    x, h = interval_centres(n)
    return x, (x <= 0).astype(float), h


def plateau_example(n=256, width=0.25):
    """Data ``1`` on ``x <= -width``, ``1/2`` on the plateau, ``0`` beyond ``width``.

    Any jump inside ``[-width, width]`` is optimal for ``beta < (1 - width)/4``,
    with objective ``beta - (1 - width)/2``.
    """
    x, h = interval_centres(n)
    f = np.where(x <= -width, 1.0, np.where(x <= width, 0.5, 0.0))
    return x, f, h


def ramp(n=16, lo=-1.0, hi=1.0):
    """Linear coefficient field from ``lo`` to ``hi``."""
    return np.linspace(lo, hi, n)
