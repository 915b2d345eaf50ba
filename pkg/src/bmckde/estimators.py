"""Kernel estimators of the invariant, triangle, and transition densities.

The sample is the set of mother-daughters triangles over a chosen index set
(one generation, or the whole tree).  Everything is direct summation: no
binning or FFT shortcuts, so grid evaluations agree bitwise with the scalar
calls (numpy's pairwise row reduction is the single summation scheme used
throughout).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .kernels import GAUSSIAN, BandwidthTriple
from .tree import Population, TreeSample

# Quotient degeneracy threshold: the Gaussian kernel is strictly positive, so
# a vanishing denominator can only be underflow; compare against this rather
# than exact zero.
DENOMINATOR_FLOOR = 1e-300

_BLOCK_ENTRIES = 1 << 22  # cap scratch matrices at ~32 MB per block


def _parents(sample: TreeSample, population: Population) -> np.ndarray:
    vals = sample.population_parents(population)
    if vals.size == 0:
        raise ValueError("empty index set")
    return vals


def mu_hat(sample: TreeSample, population: Population, h: float, x: float) -> float:
    """Kernel estimate of the invariant density at x: (1/(N h)) sum K0((x - X_u)/h)."""
    if not h > 0:
        raise ValueError("bandwidth must be positive")
    vals = _parents(sample, population)
    return float(np.sum(GAUSSIAN((x - vals) / h)) / (vals.size * h))


def mu_tri_hat(
    sample: TreeSample,
    population: Population,
    bw: BandwidthTriple,
    x: float,
    x0: float,
    x1: float,
) -> float:
    """Kernel estimate of the triangle density at (x, x0, x1).

    Triple-product kernel sum over the triangles of the index set, normalized
    by N * h * h0 * h1 so the estimate integrates to one.
    """
    xp, c0, c1 = sample.triangle_arrays(population)
    if xp.size == 0:
        raise ValueError("empty index set")
    terms = GAUSSIAN((x - xp) / bw.h) * (GAUSSIAN((x0 - c0) / bw.h0) * GAUSSIAN((x1 - c1) / bw.h1))
    return float(np.sum(terms) / (xp.size * bw.h * bw.h0 * bw.h1))


def p_hat(
    sample: TreeSample,
    population: Population,
    bw_num: BandwidthTriple,
    h_den: float,
    x: float,
    x0: float,
    x1: float,
) -> float:
    """Quotient estimate of the transition density, numerator and denominator
    smoothed with their own bandwidths; 0 when the denominator underflows."""
    den = mu_hat(sample, population, h_den, x)
    if den < DENOMINATOR_FLOOR:
        return 0.0
    return mu_tri_hat(sample, population, bw_num, x, x0, x1) / den


@dataclass
class EstimatorSpec:
    """Which estimator to evaluate and with what smoothing."""

    kind: str  # "mu" | "mu_tri" | "p"
    population: Population = Population.GEN_N
    h: float | None = None  # mu bandwidth, and p denominator bandwidth
    bw: BandwidthTriple | None = None  # numerator bandwidths for mu_tri / p

    def __post_init__(self) -> None:
        if self.kind not in ("mu", "mu_tri", "p"):
            raise ValueError(f"unknown estimator kind {self.kind!r}")
        if self.kind == "mu" and self.h is None:
            raise ValueError("mu estimator needs h")
        if self.kind in ("mu_tri", "p") and self.bw is None:
            raise ValueError(f"{self.kind} estimator needs a bandwidth triple")
        if self.kind == "p" and self.h is None:
            raise ValueError("p estimator needs the denominator bandwidth h")


@dataclass
class DensityEstimate:
    """Estimator values over a grid, with enough metadata to reproduce them."""

    points: np.ndarray  # (G,) for mu, (G, 3) otherwise
    values: np.ndarray
    meta: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.points.shape[0] != self.values.shape[0]:
            raise ValueError("points and values lengths differ")

    def to_csv(self, path: str) -> None:
        cols = ["x"] if self.points.ndim == 1 else ["x", "x0", "x1"]
        with open(path, "w", newline="") as fh:
            fh.write(",".join(cols + ["value"]) + "\n")
            pts = self.points if self.points.ndim == 2 else self.points[:, None]
            for row, v in zip(pts, self.values):
                fh.write(",".join(repr(float(c)) for c in row) + f",{float(v)!r}\n")
        with open(path + ".meta.json", "w") as fh:
            json.dump(self.meta, fh, indent=2, sort_keys=True)
            fh.write("\n")


def _row_sums(products: np.ndarray) -> np.ndarray:
    # contiguous row reduction: bitwise-identical to summing each row alone
    return np.sum(np.ascontiguousarray(products), axis=-1)


def _mu_values(vals: np.ndarray, h: float, xs: np.ndarray) -> np.ndarray:
    out = np.empty(xs.size)
    step = max(1, _BLOCK_ENTRIES // max(vals.size, 1))
    for lo in range(0, xs.size, step):
        hi = min(lo + step, xs.size)
        out[lo:hi] = _row_sums(GAUSSIAN((xs[lo:hi, None] - vals[None, :]) / h))
    return out / (vals.size * h)


def _tri_values(
    sample: TreeSample, population: Population, bw: BandwidthTriple, points: np.ndarray
) -> np.ndarray:
    xp, c0, c1 = sample.triangle_arrays(population)
    out = np.empty(points.shape[0])
    step = max(1, _BLOCK_ENTRIES // max(xp.size, 1))
    for lo in range(0, points.shape[0], step):
        hi = min(lo + step, points.shape[0])
        kp = GAUSSIAN((points[lo:hi, 0][:, None] - xp[None, :]) / bw.h)
        k0 = GAUSSIAN((points[lo:hi, 1][:, None] - c0[None, :]) / bw.h0)
        k1 = GAUSSIAN((points[lo:hi, 2][:, None] - c1[None, :]) / bw.h1)
        out[lo:hi] = _row_sums(kp * (k0 * k1))
    return out / (xp.size * bw.h * bw.h0 * bw.h1)


def _tri_values_product(
    sample: TreeSample,
    population: Population,
    bw: BandwidthTriple,
    xs: np.ndarray,
    x0s: np.ndarray,
    x1s: np.ndarray,
) -> np.ndarray:
    """Tensor-grid evaluation reusing per-axis kernels and child products.

    Same elementwise operations and row reduction as the pointwise path, so
    values are bitwise identical to scalar calls; the per-axis kernel
    matrices and the (x0, x1) product pairs are just computed once instead of
    per grid point.
    """
    xp, c0, c1 = sample.triangle_arrays(population)
    if xp.size == 0:
        raise ValueError("empty index set")
    kp = GAUSSIAN((xs[:, None] - xp[None, :]) / bw.h)
    k0 = GAUSSIAN((x0s[:, None] - c0[None, :]) / bw.h0)
    k1 = GAUSSIAN((x1s[:, None] - c1[None, :]) / bw.h1)
    out = np.empty(xs.size * x0s.size * x1s.size)
    pair_step = max(1, _BLOCK_ENTRIES // max(xp.size, 1))
    pairs = x0s.size * x1s.size
    jj, kk = np.divmod(np.arange(pairs), x1s.size)
    for lo in range(0, pairs, pair_step):
        hi = min(lo + pair_step, pairs)
        bc = k0[jj[lo:hi]] * k1[kk[lo:hi]]
        for i in range(xs.size):
            out[i * pairs + lo : i * pairs + hi] = _row_sums(kp[i][None, :] * bc)
    return out / (xp.size * bw.h * bw.h0 * bw.h1)


def product_points(xs: np.ndarray, x0s: np.ndarray, x1s: np.ndarray) -> np.ndarray:
    """Tensor-product grid flattened in C order (x slowest, x1 fastest)."""
    gx, g0, g1 = np.meshgrid(xs, x0s, x1s, indexing="ij")
    return np.column_stack([gx.ravel(), g0.ravel(), g1.ravel()])


def evaluate_on_grid(sample: TreeSample, spec: EstimatorSpec, grid) -> DensityEstimate:
    """Evaluate an estimator over a grid; pointwise-identical to scalar calls.

    ``grid`` is a 1-D array of x's for the mu estimator, and either an
    (G, 3) array of points or a tuple of three axis arrays (tensor-product
    grid) for the three-dimensional estimators.
    """
    meta: dict[str, Any] = {
        "estimator": spec.kind,
        "population": spec.population.value,
        "sample_depth": sample.depth,
    }
    if spec.kind == "mu":
        xs = np.atleast_1d(np.asarray(grid, dtype=float))
        if xs.size == 0:
            raise ValueError("empty grid")
        vals = _parents(sample, spec.population)
        meta.update(h=spec.h, sample_size=int(vals.size))
        return DensityEstimate(xs, _mu_values(vals, spec.h, xs), meta)

    axes = None
    if isinstance(grid, tuple):
        axes = tuple(np.atleast_1d(np.asarray(g, dtype=float)) for g in grid)
        points = product_points(*axes)
    else:
        points = np.asarray(grid, dtype=float)
        if points.ndim != 2 or points.shape[1] != 3:
            raise ValueError("3-d grid must be (G, 3) points or a tuple of three axes")
    if points.shape[0] == 0:
        raise ValueError("empty grid")
    bw = spec.bw
    meta.update(bw=[bw.h, bw.h0, bw.h1], sample_size=int(sample.triangle_arrays(spec.population)[0].size))
    if axes is not None:
        values = _tri_values_product(sample, spec.population, bw, *axes)
    else:
        values = _tri_values(sample, spec.population, bw, points)
    if spec.kind == "p":
        meta.update(h_den=spec.h)
        xs, inverse = np.unique(points[:, 0], return_inverse=True)
        dens = _mu_values(_parents(sample, spec.population), spec.h, xs)
        den = dens[inverse]
        values = np.where(den < DENOMINATOR_FLOOR, 0.0, values / np.where(den == 0, 1.0, den))
    return DensityEstimate(points, values, meta)
