"""Radial interaction kernels of the ball-indicator convolution in 3D and 2D.

In 3D the kernel is

    L(R, r) = alpha * 3 / (16 pi sigma^3) * Lt(R, r) / (R r),
    Lt(R, r) = min((R + r)^2, sigma^2) - min((R - r)^2, sigma^2),

and in 2D

    L(R, r) = alpha / (pi^2 sigma^2) * [pi/2 - arcsin(max(c, -1))] * 1{|R - r| <= sigma},
    c = (R^2 + r^2 - sigma^2) / (2 R r).

``normalized`` gives Lt / (R r) without the prefactor; the kernel bounds
(0 <= L <= 4 and friends) are stated for that normalisation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._accel import asin


class UnsupportedDimensionError(ValueError):
    pass


def _lt(R, r, sigma):
    # min((R+r)^2, s^2) - min((R-r)^2, s^2) == clip(min(4Rr, s^2 - d^2), 0)
    d = np.abs(R - r)
    return np.maximum(np.minimum(4.0 * (R * r), (sigma - d) * (sigma + d)), 0.0)


@dataclass(frozen=True)
class RadialKernel:
    dimension: int
    sigma: float
    alpha: float = 1.0

    def __post_init__(self):
        if self.dimension not in (2, 3):
            raise UnsupportedDimensionError(f"dimension must be 2 or 3, got {self.dimension}")
        if not (self.sigma > 0 and math.isfinite(self.sigma)):
            raise ValueError("sigma must be positive")
        if not (self.alpha > 0 and math.isfinite(self.alpha)):
            raise ValueError("alpha must be positive")

    @property
    def prefactor(self) -> float:
        s = self.sigma
        if self.dimension == 3:
            return self.alpha * 3.0 / (16.0 * math.pi * s**3)
        return self.alpha / (math.pi**2 * s**2)

    @property
    def sup(self) -> float:
        """Upper bound of L over all (R, r)."""
        if self.dimension == 3:
            return 4.0 * self.prefactor
        return math.pi * self.prefactor

    def L(self, R, r):
        """Physical kernel; vectorised over numpy arrays."""
        R = np.asarray(R, dtype=np.float64)
        r = np.asarray(r, dtype=np.float64)
        if np.any(R <= 0) or np.any(r <= 0):
            raise ValueError("kernel arguments must be positive")
        if self.dimension == 3:
            out = self.prefactor * (_lt(R, r, self.sigma) / (R * r))
        else:
            out = self.prefactor * _bracket_2d(R, r, self.sigma)
        return out if out.ndim else float(out)

    def L_tilde(self, R, r):
        if self.dimension != 3:
            raise UnsupportedDimensionError("L_tilde is defined for the 3D kernel only")
        R = np.asarray(R, dtype=np.float64)
        r = np.asarray(r, dtype=np.float64)
        if np.any(R < 0) or np.any(r < 0):
            raise ValueError("kernel arguments must be non-negative")
        out = _lt(R, r, self.sigma)
        return out if out.ndim else float(out)

    def normalized(self, R, r):
        """Lt / (R r), the 3D kernel without prefactor (takes values in [0, 4])."""
        if self.dimension != 3:
            raise UnsupportedDimensionError("normalized kernel is defined for 3D only")
        R = np.asarray(R, dtype=np.float64)
        r = np.asarray(r, dtype=np.float64)
        out = _lt(R, r, self.sigma) / (R * r)
        return out if out.ndim else float(out)

    def band_indices(self, r: float, grid_step: float, n: int) -> range:
        """Indices i in 1..n with |i * grid_step - r| <= sigma.

        Points whose distance exceeds sigma by a few ulps (rounding in
        ``i * grid_step``) are counted as ties and included; the kernel
        vanishes there anyway.
        """
        return band_indices(r, self.sigma, grid_step, n)


def _bracket_2d(R, r, sigma):
    c = (R * R + r * r - sigma * sigma) / (2.0 * R * r)
    c = np.clip(c, -1.0, 1.0)
    inside = np.abs(R - r) <= sigma
    return np.where(inside, 0.5 * np.pi - asin(c), 0.0)


def _within(x: float, r: float, sigma: float) -> bool:
    slack = 4.0 * np.finfo(float).eps * max(abs(x), abs(r), sigma)
    return abs(x - r) <= sigma + slack


def band_indices(r: float, sigma: float, grid_step: float, n: int) -> range:
    if n <= 0:
        return range(1, 1)
    lo = max(1, math.ceil((r - sigma) / grid_step) - 1)
    hi = min(n, math.floor((r + sigma) / grid_step) + 1)
    while lo <= hi and not _within(lo * grid_step, r, sigma):
        lo += 1
    while hi >= lo and not _within(hi * grid_step, r, sigma):
        hi -= 1
    while lo > 1 and _within((lo - 1) * grid_step, r, sigma):
        lo -= 1
    while hi < n and _within((hi + 1) * grid_step, r, sigma):
        hi += 1
    return range(lo, hi + 1)
