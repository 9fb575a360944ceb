"""
Normalization constants and parameter validation
"""

import math

import pytest

from fraclab.constants import (FracParams, constants_for, gamma, log_gamma,
                               riesz_constant, sphere_area)
from fraclab.errors import DomainError


def test_known_values():
    """c and β at (1, 1/2) are 1/π; α at (3, 1/2) is 2π²"""
    print("\n🧪 TEST: Constants at known parameters")

    half_line = constants_for(FracParams(1, 0.5))
    space = constants_for(FracParams(3, 0.5))

    assert half_line.c_ns == pytest.approx(1.0 / math.pi, rel=1e-12), f"c(1,1/2) = {half_line.c_ns}"
    assert half_line.beta_ns == pytest.approx(1.0 / math.pi, rel=1e-12), f"β(1,1/2) = {half_line.beta_ns}"
    assert space.alpha_ns == pytest.approx(2.0 * math.pi ** 2, rel=1e-12), f"α(3,1/2) = {space.alpha_ns}"
    print("✅ Constants match closed forms")


def test_riesz_constant_plane():
    """α(2, 0.4) = π·2^0.8·Γ(0.4)/Γ(0.6) ≈ 8.147"""
    alpha = riesz_constant(FracParams(2, 0.4))
    expected = math.pi * 2.0 ** 0.8 * math.gamma(0.4) / math.gamma(0.6)
    assert alpha == pytest.approx(expected, rel=1e-12)
    assert alpha == pytest.approx(8.147, rel=1e-3)


def test_riesz_constant_outside_regime():
    """α is undefined when 2s >= n"""
    assert riesz_constant(FracParams(1, 0.5)) is None
    assert riesz_constant(FracParams(1, 0.75)) is None
    assert constants_for(FracParams(1, 0.6)).alpha_ns is None
    with pytest.raises(DomainError):
        FracParams(1, 0.5).require_riesz_regime()


@pytest.mark.parametrize("x", [0.5, 0.75, 1.0, 1.5, 2.25, 3.5, 7.0, 20.5])
def test_log_gamma_matches_math(x):
    """Lanczos log-gamma agrees with the C library"""
    assert log_gamma(x) == pytest.approx(math.lgamma(x), rel=1e-13, abs=1e-14)
    assert gamma(x) == pytest.approx(math.gamma(x), rel=1e-13)


def test_sphere_area():
    """σ_0 = 2, σ_1 = 2π, σ_2 = 4π"""
    assert sphere_area(1) == pytest.approx(2.0, rel=1e-14)
    assert sphere_area(2) == pytest.approx(2.0 * math.pi, rel=1e-14)
    assert sphere_area(3) == pytest.approx(4.0 * math.pi, rel=1e-14)


@pytest.mark.parametrize("n,s", [(0, 0.5), (1, 0.0), (1, 1.0), (2, -0.1), (2.5, 0.5)])
def test_invalid_parameters(n, s):
    """Out-of-range parameters raise DomainError (a ValueError)"""
    with pytest.raises(DomainError):
        FracParams(n, s)
    with pytest.raises(ValueError):
        FracParams(n, s)


def test_constants_positive():
    """All three constants are positive across the grid"""
    for n in (1, 2, 3):
        for s in (0.1, 0.25, 0.5, 0.75, 0.9):
            table = constants_for(FracParams(n, s))
            assert table.c_ns > 0 and table.beta_ns > 0, f"non-positive constant at n={n}, s={s}"
            if 2 * s < n:
                assert table.alpha_ns > 0
    print("✅ Constants positive on the grid")
