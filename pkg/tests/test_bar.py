import math

import numpy as np
import pytest
from scipy.integrate import quad

from bmckde.bar import (
    BarParams,
    InitSpec,
    SymmetricBarParams,
    mu_triangle,
    q_density,
    simulate,
    stationary_mu,
    transition_density_p,
)

CASE1 = BarParams(0.7, 0.5, 0.0, 0.0, 1.0, 0.0)
CASE2 = BarParams(1.2, 0.7, 0.0, 0.0, 1.0, 0.0)


def normal_pdf(x, mean, var):
    return math.exp(-((x - mean) ** 2) / (2 * var)) / math.sqrt(2 * math.pi * var)


def test_params_validation():
    with pytest.raises(ValueError):
        BarParams(0.5, 0.5, sigma=0.0)
    with pytest.raises(ValueError):
        BarParams(0.5, 0.5, sigma=1.0, rho=1.0)  # |rho| < sigma^2 required
    with pytest.raises(ValueError):
        SymmetricBarParams(a=1.0)
    BarParams(1.2, 0.7)  # coefficients beyond [-1, 1] are allowed


def test_sigma_a():
    sym = SymmetricBarParams(0.5, 1.0)
    assert sym.sigma_a == pytest.approx(1.0 / math.sqrt(0.75), rel=1e-12)


def test_simulate_is_seed_deterministic():
    s1 = simulate(CASE1, 5, InitSpec.dirac(0.0), 123)
    s2 = simulate(CASE1, 5, InitSpec.dirac(0.0), 123)
    assert s1 == s2
    s3 = simulate(CASE1, 5, InitSpec.dirac(0.0), 124)
    assert s1 != s3


def test_simulate_depth_and_levels():
    s = simulate(CASE1, 3, InitSpec.dirac(0.5), 0)
    assert s.depth == 3
    assert s.level(0)[0] == 0.5
    assert len(s.level(4)) == 16


def test_stationary_init_requires_symmetric():
    with pytest.raises(ValueError):
        simulate(CASE1, 2, InitSpec.stationary(), 0)


def test_degenerate_recursion_gives_iid_normals():
    params = BarParams(0.0, 0.0, 0.0, 0.0, 1.0, 0.0)
    s = simulate(params, 12, InitSpec.dirac(0.0), 42)
    vals = np.concatenate([s.level(k) for k in range(1, 14)])
    assert abs(np.mean(vals)) < 4.0 / math.sqrt(vals.size)
    assert np.var(vals) == pytest.approx(1.0, abs=4.0 * math.sqrt(2.0 / vals.size))
    assert abs(np.mean(vals**3)) < 0.1 and np.mean(vals**4) == pytest.approx(3.0, abs=0.3)


def test_tiny_noise_follows_recursion():
    params = BarParams(0.7, 0.7, 0.0, 0.0, 1e-8, 0.0)
    s = simulate(params, 6, InitSpec.dirac(1.0), 3)
    for k in range(7):
        parents = s.level(k)
        children = s.level(k + 1)
        assert np.max(np.abs(children[0::2] - 0.7 * parents)) <= 1e-6
        assert np.max(np.abs(children[1::2] - 0.7 * parents)) <= 1e-6


def test_correlated_noise_covariance():
    params = BarParams(0.0, 0.0, 0.0, 0.0, 1.0, 0.6)
    s = simulate(params, 13, InitSpec.dirac(0.0), 9)
    c0 = s.level(14)[0::2]
    c1 = s.level(14)[1::2]
    assert np.corrcoef(c0, c1)[0, 1] == pytest.approx(0.6, abs=0.02)


def test_transition_density_standard_point():
    params = BarParams(0.0, 0.0, 0.0, 0.0, 1.0, 0.0)
    assert transition_density_p(params, 0, 0, 0) == pytest.approx(1 / (2 * math.pi), rel=1e-14)


def test_transition_density_factorizes_when_uncorrelated():
    rng = np.random.default_rng(0)
    for _ in range(50):
        x, y, z = rng.uniform(-2, 2, 3)
        p = transition_density_p(CASE1, x, y, z)
        expected = normal_pdf(y, 0.7 * x, 1.0) * normal_pdf(z, 0.5 * x, 1.0)
        assert p == pytest.approx(expected, abs=1e-12)


def test_transition_density_symmetric_in_children():
    sym = BarParams(0.5, 0.5, 0.0, 0.0, 1.0, 0.3)
    for x, y, z in [(-1, 0.2, 0.8), (0, 1, -1), (2, 0.3, 0.1)]:
        assert transition_density_p(sym, x, y, z) == pytest.approx(
            transition_density_p(sym, x, z, y), rel=1e-14
        )


def test_q_density_values_and_mass():
    params = BarParams(0.0, 0.0, 0.0, 0.0, 1.0, 0.0)
    assert q_density(params, 0.0, 0.0) == pytest.approx(1 / math.sqrt(2 * math.pi), rel=1e-14)
    for x in (-2.0, 0.0, 2.0):
        mass, _ = quad(lambda y: q_density(CASE2, x, y), -40, 40, epsabs=1e-12)
        assert mass == pytest.approx(1.0, abs=1e-8)


def test_q_density_symmetric_case_single_gaussian():
    sym = SymmetricBarParams(0.5, 1.0)
    params = sym.to_bar_params()
    for x, y in [(-1, 0.3), (0.5, 0.5), (2, -1)]:
        assert q_density(params, x, y) == pytest.approx(normal_pdf(y, 0.5 * x, 1.0), rel=1e-14)


def test_stationary_mu_values():
    assert stationary_mu(SymmetricBarParams(0.0, 1.0), 0.0) == pytest.approx(
        1 / math.sqrt(2 * math.pi), rel=1e-14
    )
    sym = SymmetricBarParams(0.5, 1.0)
    sa = 1.0 / math.sqrt(0.75)
    assert stationary_mu(sym, 0.0) == pytest.approx(normal_pdf(0.0, 0.0, sa * sa), rel=1e-12)
    mass, _ = quad(lambda x: stationary_mu(sym, x), -20, 20, epsabs=1e-12)
    assert mass == pytest.approx(1.0, abs=1e-8)


def test_mu_triangle_is_product_and_symmetric():
    sym = SymmetricBarParams(0.5, 1.0)
    params = sym.to_bar_params()
    rng = np.random.default_rng(1)
    for _ in range(20):
        x, y, z = rng.uniform(-2, 2, 3)
        expected = stationary_mu(sym, x) * q_density(params, x, y) * q_density(params, x, z)
        assert mu_triangle(sym, x, y, z) == pytest.approx(expected, rel=1e-12)
        assert mu_triangle(sym, x, y, z) == pytest.approx(mu_triangle(sym, x, z, y), rel=1e-14)


def test_mu_triangle_total_mass():
    sym = SymmetricBarParams(0.5, 1.0)
    # product-Gaussian structure: integrate with a tensor Simpson rule
    ax = np.linspace(-8, 8, 161)
    gx, gy, gz = np.meshgrid(ax, ax, ax, indexing="ij", sparse=True)
    vals = mu_triangle(sym, gx, gy, gz)
    from scipy.integrate import simpson

    mass = simpson(simpson(simpson(vals, x=ax, axis=2), x=ax, axis=1), x=ax, axis=0)
    assert mass == pytest.approx(1.0, abs=1e-5)


def test_stationarity_of_level_variance():
    # level variances fluctuate a lot through shared ancestry: pool seeds
    sym = SymmetricBarParams(0.5, 1.0)
    samples = [simulate(sym.to_bar_params(), 12, InitSpec.stationary(), 70 + s) for s in range(20)]
    target = sym.sigma_a**2
    for k in (6, 9, 12):
        pooled = np.concatenate([s.level(k) for s in samples])
        assert np.var(pooled) == pytest.approx(target, rel=0.2)


def test_level_mean_concentration():
    sym = SymmetricBarParams(0.5, 1.0)
    means = []
    for seed in range(5):
        s = simulate(sym.to_bar_params(), 10, InitSpec.stationary(), seed)
        means.append(np.mean(s.level(10)))
    bound = 4.0 * sym.sigma_a / math.sqrt(2**10)
    assert all(abs(m) <= bound for m in means)
