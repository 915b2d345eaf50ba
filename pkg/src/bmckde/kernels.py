"""Smoothing kernel and bandwidth containers.

Only the Gaussian kernel is implemented; everything downstream reaches it
through this type so other kernels can slot in later.  Strict positivity of
the Gaussian guarantees the density estimators never vanish, which keeps the
quotient estimator well defined away from underflow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

_SQRT_PI = math.sqrt(math.pi)
_SQRT_2PI = math.sqrt(2.0 * math.pi)


class GaussianKernel:
    """Standard Gaussian density as smoothing kernel.

    Closed-form attributes used by the selection rules and the variance
    formulas: L2 norm squared 1/(2*sqrt(pi)), second moment 1, and the
    self-convolution, which is the N(0, 2) density.
    """

    name = "gaussian"
    l1_norm = 1.0
    l2_norm_sq = 1.0 / (2.0 * _SQRT_PI)
    sup_norm = 1.0 / _SQRT_2PI
    second_moment = 1.0

    def __call__(self, t):
        return np.exp(-0.5 * np.square(t)) / _SQRT_2PI

    def self_convolution(self, t):
        return np.exp(-0.25 * np.square(t)) / (2.0 * _SQRT_PI)


GAUSSIAN = GaussianKernel()

# (integral of K0^2)^3, the constant in all three limit variances
L2_NORM_SQ_CUBED = GAUSSIAN.l2_norm_sq**3


@dataclass(frozen=True)
class BandwidthTriple:
    """Per-coordinate bandwidths (parent, child0, child1) for the numerator estimator."""

    h: float
    h0: float
    h1: float

    def __post_init__(self) -> None:
        for name in ("h", "h0", "h1"):
            v = getattr(self, name)
            if not (v > 0 and math.isfinite(v)):
                raise ValueError(f"bandwidth {name} must be positive and finite")

    @classmethod
    def scalar(cls, h: float) -> "BandwidthTriple":
        return cls(h, h, h)
