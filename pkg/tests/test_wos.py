"""
Exit-law sampler and the walk-on-spheres solver
"""

import numpy as np
import pytest
from scipy.special import betainc

from fraclab.constants import FracParams
from fraclab.errors import DomainError, PreconditionError
from fraclab.fields import affine_data, constant_data, sign_data
from fraclab.geometry import BallDomain, parse_domain
from fraclab.wos import (build_exit_sampler, exit_cdf, sample_exit,
                         sample_exit_batch, sample_stream, shared_exit_sampler,
                         wos_solve)

HALF_LINE = FracParams(1, 0.5)


def test_exit_cdf():
    assert exit_cdf(HALF_LINE, 1.0) == 0.0
    assert exit_cdf(HALF_LINE, 0.5) == 0.0
    values = [exit_cdf(HALF_LINE, rho) for rho in (1.01, 1.5, 3.0, 100.0)]
    assert values == sorted(values)
    assert 1.0 - exit_cdf(HALF_LINE, 1e4) == pytest.approx(2.0 / np.pi * 1e-4, rel=1e-3)


@pytest.mark.parametrize("s", [0.25, 0.5, 0.75])
def test_sampler_inverts_cdf(s):
    """radius_ratio is the inverse of the analytic CDF"""
    p = FracParams(2, s)
    sampler = shared_exit_sampler(p)
    assert sampler.total_mass == pytest.approx(1.0, abs=1e-8)
    assert sampler.quantiles[0] == 0.0 and sampler.radius_ratios[0] == 1.0
    for q in (0.01, 0.1, 0.5, 0.9, 0.99):
        rho = float(sampler.radius_ratio(np.array([q]))[0])
        assert exit_cdf(p, rho) == pytest.approx(q, abs=1e-4), f"s={s}, q={q}, rho={rho}"


def test_sampler_tail_beyond_table():
    sampler = shared_exit_sampler(HALF_LINE)
    q = 1.0 - 1e-8
    assert q > sampler.max_quantile
    rho = float(sampler.radius_ratio(np.array([q]))[0])
    assert 1.0 - exit_cdf(HALF_LINE, rho) == pytest.approx(1e-8, rel=1e-2)


def test_small_table_rejected():
    with pytest.raises(DomainError):
        build_exit_sampler(HALF_LINE, table_size=16)


def test_exit_points_leave_the_ball():
    sampler = shared_exit_sampler(FracParams(3, 0.5))
    rng = sample_stream(1, 0)
    center = np.array([1.0, 2.0, 3.0])
    for _ in range(50):
        y = sample_exit(sampler, center, 0.5, rng)
        assert np.linalg.norm(y - center) >= 0.5
    batch = sample_exit_batch(sampler, np.zeros((100, 3)), 2.0, rng)
    assert batch.shape == (100, 3)
    assert np.all(np.linalg.norm(batch, axis=1) >= 2.0)


def test_sample_stream_is_reproducible():
    assert np.array_equal(sample_stream(5, 3).random(4), sample_stream(5, 3).random(4))
    assert not np.array_equal(sample_stream(5, 3).random(4), sample_stream(5, 4).random(4))


def test_constant_data_is_exact():
    result = wos_solve(HALF_LINE, BallDomain((0.0,), 1.0), constant_data(1), [0.3], 200, seed=1)
    assert result.estimate == 1.0
    assert result.std_error == 0.0
    assert not result.flagged and result.samples == 200


def test_results_do_not_depend_on_threads():
    """Sample i always uses stream (seed, i)"""
    omega = parse_domain("ball(0,1)")
    single = wos_solve(HALF_LINE, omega, sign_data(1), [0.3], 2500, seed=9, threads=1)
    pooled = wos_solve(HALF_LINE, omega, sign_data(1), [0.3], 2500, seed=9, threads=4)
    assert single.to_dict() == pooled.to_dict()


def test_truncated_walks_are_flagged():
    """With one step allowed, walks landing in the second ball are cut short"""
    omega = parse_domain("union(ball(0,1);ball(1.5,1))")
    result = wos_solve(HALF_LINE, omega, sign_data(1), [0.2], 500, max_steps=1, seed=3)
    assert result.max_steps_hit > 0
    assert result.flagged


def test_preconditions():
    omega = BallDomain((0.0,), 1.0)
    with pytest.raises(PreconditionError):
        wos_solve(HALF_LINE, omega, affine_data(1, 1.0, 0.0), [0.0], 10)
    with pytest.raises(DomainError):
        wos_solve(HALF_LINE, omega, sign_data(1), [1.5], 10)
    with pytest.raises(DomainError):
        wos_solve(HALF_LINE, BallDomain((0.0, 0.0), 1.0), sign_data(1), [0.0], 10)
    with pytest.raises(DomainError):
        wos_solve(HALF_LINE, omega, sign_data(1), [0.0], 0)


@pytest.mark.slow
@pytest.mark.parametrize("s", [0.25, 0.5, 0.75])
def test_agrees_with_interval_formula(s):
    """Monte Carlo estimate within four standard errors of the exact extension"""
    print(f"\n🧪 TEST: walk-on-spheres on (-1, 1), s={s}")
    p = FracParams(1, s)
    result = wos_solve(p, BallDomain((0.0,), 1.0), sign_data(1), [0.3], 10_000, seed=2024)
    exact = 2.0 * betainc(s, s, 0.65) - 1.0
    assert abs(result.estimate - exact) < 4.0 * result.std_error, (
        f"{result.estimate:.4f} ± {result.std_error:.4f} vs {exact:.4f}")
    print(f"✅ {result.estimate:.4f} ± {result.std_error:.4f} (exact {exact:.4f})")


def test_exit_radius_matches_law():
    """P(ρ < 2) from 20000 draws within three standard errors of the CDF"""
    p = FracParams(2, 0.5)
    sampler = shared_exit_sampler(p)
    count = 20_000
    points = sample_exit_batch(sampler, np.zeros((count, 2)), 1.0, sample_stream(17, 0))
    fraction = float(np.mean(np.linalg.norm(points, axis=1) < 2.0))
    expected = exit_cdf(p, 2.0)
    sigma = np.sqrt(expected * (1.0 - expected) / count)
    assert abs(fraction - expected) < 3.0 * sigma, f"{fraction:.4f} vs {expected:.4f}"


def test_exit_directions_are_isotropic():
    p = FracParams(3, 0.25)
    count = 20_000
    points = sample_exit_batch(shared_exit_sampler(p), np.zeros((count, 3)), 1.0, sample_stream(23, 0))
    directions = points / np.linalg.norm(points, axis=1, keepdims=True)
    sigma = np.sqrt(1.0 / (3.0 * count))
    assert np.all(np.abs(directions.mean(axis=0)) < 4.0 * sigma), directions.mean(axis=0)
    second = (directions ** 2).mean(axis=0)
    assert np.allclose(second, 1.0 / 3.0, atol=0.02), second


def test_union_estimates_agree_across_seeds():
    omega = parse_domain("union(ball(0,1);ball(1.5,1))")
    a = wos_solve(HALF_LINE, omega, sign_data(1), [0.2], 3000, seed=11)
    b = wos_solve(HALF_LINE, omega, sign_data(1), [0.2], 3000, seed=12)
    assert a.std_error > 0 and b.std_error > 0
    assert abs(a.estimate - b.estimate) < 4.0 * np.hypot(a.std_error, b.std_error)


@pytest.mark.slow
def test_union_agrees_with_interval_formula():
    """The two overlapping unit balls form the interval (-1, 2.5)"""
    print("\n🧪 TEST: walk-on-spheres on a union of two balls")
    s = 0.5
    omega = parse_domain("union(ball(0,1);ball(1.5,1))")
    result = wos_solve(FracParams(1, s), omega, sign_data(1), [0.2], 10_000, seed=2025)
    z = (0.2 - 0.75) / 1.75
    exact = 2.0 * betainc(s, s, 0.5 * (1.0 + z)) - 1.0
    assert abs(result.estimate - exact) < 4.0 * result.std_error, (
        f"{result.estimate:.4f} ± {result.std_error:.4f} vs {exact:.4f}")
    print(f"✅ {result.estimate:.4f} ± {result.std_error:.4f} (exact {exact:.4f})")
