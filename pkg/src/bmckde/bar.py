"""Gaussian bifurcating autoregressive (BAR) model: simulation and closed-form densities.

Each node value spawns two children
    X_u0 = a0*X_u + b0 + e_u0,   X_u1 = a1*X_u + b1 + e_u1,
with (e_u0, e_u1) bivariate centered Gaussian, Var = sigma^2 each and
Cov = rho, independent across nodes.  The symmetric sub-case
(a0 = a1 = a, b = 0, rho = 0) has closed-form invariant densities and is the
reference model for bandwidth selection and the distributional checks.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .rng import philox_stream
from .tree import MAX_DEPTH, TreeSample

_SQRT_2PI = math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class BarParams:
    """Autoregression coefficients, intercepts, and noise parameters of the BAR model."""

    a0: float
    a1: float
    b0: float = 0.0
    b1: float = 0.0
    sigma: float = 1.0
    rho: float = 0.0

    def __post_init__(self) -> None:
        if not (self.sigma > 0 and math.isfinite(self.sigma)):
            raise ValueError("sigma must be positive and finite")
        if not abs(self.rho) < self.sigma**2:
            raise ValueError("need |rho| < sigma^2 for a valid noise covariance")
        for name in ("a0", "a1", "b0", "b1"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")

    @property
    def is_symmetric(self) -> bool:
        return self.a0 == self.a1 and self.b0 == 0.0 and self.b1 == 0.0 and self.rho == 0.0


@dataclass(frozen=True)
class SymmetricBarParams:
    """Symmetric stationary sub-case: a0 = a1 = a with |a| < 1, b = 0, rho = 0."""

    a: float
    sigma: float = 1.0

    def __post_init__(self) -> None:
        if not abs(self.a) < 1:
            raise ValueError("need |a| < 1 so the invariant variance is finite")
        if not (self.sigma > 0 and math.isfinite(self.sigma)):
            raise ValueError("sigma must be positive and finite")

    @property
    def sigma_a(self) -> float:
        """Standard deviation of the invariant law, sigma / sqrt(1 - a^2)."""
        return self.sigma / math.sqrt(1.0 - self.a**2)

    def to_bar_params(self) -> BarParams:
        return BarParams(self.a, self.a, 0.0, 0.0, self.sigma, 0.0)


class InitKind(enum.Enum):
    DIRAC = "dirac"
    STATIONARY = "stationary"


@dataclass(frozen=True)
class InitSpec:
    """Root distribution: point mass at x0, or the invariant law (symmetric case only)."""

    kind: InitKind = InitKind.DIRAC
    x0: float = 0.0

    @classmethod
    def dirac(cls, x0: float = 0.0) -> "InitSpec":
        return cls(InitKind.DIRAC, x0)

    @classmethod
    def stationary(cls) -> "InitSpec":
        return cls(InitKind.STATIONARY)


def simulate(params: BarParams, n: int, init: InitSpec, seed: int) -> TreeSample:
    """Simulate a BAR tree of depth n (levels 0..n+1 stored).

    The noise of generation k is drawn from the Philox stream keyed by
    (seed, k), one (e_u0, e_u1) pair per parent in rank order, so output is a
    pure function of (params, n, init, seed): bit-identical across runs and
    worker counts.  Correlated pairs come from the Cholesky split
    e_u0 = sigma*Z0, e_u1 = (rho/sigma)*Z0 + sqrt(sigma^2 - rho^2/sigma^2)*Z1.
    """
    if n < 0:
        raise ValueError("depth must be >= 0")
    if n > MAX_DEPTH:
        raise OverflowError(f"depth {n} exceeds limit ({MAX_DEPTH})")
    if init.kind is InitKind.STATIONARY and not params.is_symmetric:
        raise ValueError("stationary initialization requires the symmetric sub-case")

    if init.kind is InitKind.DIRAC:
        root = np.array([float(init.x0)])
    else:
        sym = SymmetricBarParams(params.a0, params.sigma)
        root = sym.sigma_a * philox_stream(seed, 0).standard_normal(1)

    sigma, rho = params.sigma, params.rho
    c10 = rho / sigma
    c11 = math.sqrt(sigma**2 - rho**2 / sigma**2)

    levels = [root]
    for k in range(n + 1):
        parents = levels[k]
        z = philox_stream(seed, k + 1).standard_normal((1 << k, 2))
        e0 = sigma * z[:, 0]
        e1 = c10 * z[:, 0] + c11 * z[:, 1]
        children = np.empty(1 << (k + 1))
        children[0::2] = params.a0 * parents + params.b0 + e0
        children[1::2] = params.a1 * parents + params.b1 + e1
        levels.append(children)
    return TreeSample(levels)


def transition_density_p(params: BarParams, x, y, z):
    """Joint density P(x, y, z) of the two children given parent value x."""
    s2 = params.sigma**2
    det = s2**2 - params.rho**2
    dy = y - params.a0 * x - params.b0
    dz = z - params.a1 * x - params.b1
    g = dy**2 - 2.0 * (params.rho / s2) * dy * dz + dz**2
    return np.exp(-s2 * g / (2.0 * det)) / (2.0 * math.pi * math.sqrt(det))


def q_density(params: BarParams, x, y):
    """Density Q(x, y) of one uniformly chosen child given parent value x."""
    s = params.sigma
    d0 = (y - params.a0 * x - params.b0) / s
    d1 = (y - params.a1 * x - params.b1) / s
    return (np.exp(-0.5 * d0**2) + np.exp(-0.5 * d1**2)) / (2.0 * s * _SQRT_2PI)


def stationary_mu(params: SymmetricBarParams, x):
    """Invariant density of the lineage chain: centered Gaussian with sd sigma_a."""
    sa = params.sigma_a
    return np.exp(-0.5 * (np.asarray(x, dtype=float) / sa) ** 2) / (sa * _SQRT_2PI)


def mu_triangle(params: SymmetricBarParams, x, y, z):
    """Stationary triangle density mu(x) * Q(x, y) * Q(x, z)."""
    s = params.sigma
    qy = np.exp(-0.5 * ((y - params.a * x) / s) ** 2) / (s * _SQRT_2PI)
    qz = np.exp(-0.5 * ((z - params.a * x) / s) ** 2) / (s * _SQRT_2PI)
    return stationary_mu(params, x) * qy * qz
