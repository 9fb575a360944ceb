"""
Pointwise fractional Laplacian and the s-harmonicity report
"""

import numpy as np
import pytest

from fraclab.constants import FracParams
from fraclab.errors import CertificateError, DomainError
from fraclab.fields import (affine_field, builtin_field, bump2s_field,
                            bump2s_oracle, cosine_field, riesz_kernel_field)
from fraclab.fraclap import frac_laplacian_point, s_harmonicity_report
from fraclab.quadrature import QuadSpec


@pytest.mark.parametrize("n,s", [(1, 0.75), (2, 0.6), (2, 0.9), (3, 0.75)])
def test_affine_is_s_harmonic(n, s):
    """Second differences of an affine field vanish on symmetric sphere rules"""
    p = FracParams(n, s)
    u = affine_field(n)
    for x in ([0.0] * n, [0.7] * n, list(np.linspace(-1.5, 1.5, n))):
        value = frac_laplacian_point(p, u, x).value
        assert abs(value) < 1e-8, f"(-Δ)^s affine at {x} = {value}"


@pytest.mark.parametrize("s", [0.25, 0.5, 0.75])
def test_cosine_symbol(s):
    """(-Δ)^s cos(x₁) = cos(x₁): the symbol |ξ|^{2s} is 1 at |ξ| = 1"""
    p = FracParams(1, s)
    for x in (0.0, 1.0):
        result = frac_laplacian_point(p, cosine_field(1), [x])
        assert result.value == pytest.approx(np.cos(x), abs=1e-4), f"s={s}, x={x}: {result.value}"


def test_cosine_symbol_plane():
    p = FracParams(2, 0.5)
    value = frac_laplacian_point(p, cosine_field(2), [0.0, 0.3]).value
    assert value == pytest.approx(1.0, abs=1e-4)


@pytest.mark.parametrize("n,s", [(1, 0.5), (1, 0.25), (2, 0.5)])
def test_bump2s_oracle(n, s):
    """(-Δ)^s (1-|x|²)₊^s is the constant 4^s Γ(1+s) Γ(n/2+s)/Γ(n/2) in the unit ball"""
    p = FracParams(n, s)
    oracle = bump2s_oracle(p)
    # off-center points in the plane put an angular kink on the sphere rule
    offsets = (0.0, 0.5) if n == 1 else (0.0,)
    for t in offsets:
        x = [t] + [0.0] * (n - 1)
        value = frac_laplacian_point(p, bump2s_field(p), x).value
        assert value == pytest.approx(oracle, abs=1e-3), f"n={n}, s={s}, x={x}: {value} vs {oracle}"


def test_refuses_uncertified_fields():
    with pytest.raises(CertificateError):
        frac_laplacian_point(FracParams(1, 0.25), affine_field(1), [0.0])
    with pytest.raises(CertificateError):
        frac_laplacian_point(FracParams(2, 0.9), builtin_field('quadratic', FracParams(2, 0.9)), [0.0, 0.0])


def test_dimension_mismatch():
    with pytest.raises(DomainError):
        frac_laplacian_point(FracParams(2, 0.5), cosine_field(1), [0.0, 0.0])


def test_harmonicity_report():
    """Affine passes, the clipped quadratic does not"""
    print("\n🧪 TEST: s-harmonicity report")
    p = FracParams(2, 0.75)
    points = [[0.0, 0.0], [0.3, -0.2]]

    affine = s_harmonicity_report(p, affine_field(2), points, tol=1e-6)
    assert affine.passed, f"affine max |(-Δ)^s u| = {affine.max_abs}"
    assert len(affine.values) == 2

    clipped = s_harmonicity_report(p, builtin_field('clipped-quadratic', p), points, tol=1e-6)
    assert not clipped.passed
    assert clipped.max_abs > 1e-2
    assert clipped.to_dict()['passed'] is False
    print("✅ Report separates harmonic and non-harmonic fields")


def test_harmonicity_report_refuses_before_evaluating():
    calls = []
    u = affine_field(1)
    wrapped = type(u)(lambda y: calls.append(1) or u.evaluate(y), 1, l1s_certified=False,
                      growth_hint=u.growth_hint)
    with pytest.raises(CertificateError):
        s_harmonicity_report(FracParams(1, 0.3), wrapped, [[0.0]], tol=1e-6)
    assert not calls, "no evaluation may happen before the refusal"


def test_linearity():
    p = FracParams(1, 0.5)
    x = [0.3]
    cosine, bump = cosine_field(1), bump2s_field(p)
    combined = frac_laplacian_point(p, cosine.scaled(2.0) + bump.scaled(3.0), x).value
    separate = (2.0 * frac_laplacian_point(p, cosine, x).value
                + 3.0 * frac_laplacian_point(p, bump, x).value)
    assert combined == pytest.approx(separate, abs=1e-6)


def test_translation_covariance():
    """(-Δ)^s[u(· + h)](x) = ((-Δ)^s u)(x + h)"""
    p = FracParams(1, 0.5)
    bump = bump2s_field(p)
    moved = frac_laplacian_point(p, bump.translate([0.2]), [0.1]).value
    direct = frac_laplacian_point(p, bump, [0.3]).value
    assert moved == pytest.approx(direct, rel=1e-7)
    assert direct == pytest.approx(bump2s_oracle(p), abs=1e-3)


@pytest.mark.parametrize("factor", [0.5, 2.0])
def test_scaling_covariance(factor):
    """(-Δ)^s[u(λ·)](x) = λ^{2s}((-Δ)^s u)(λx); for cos(y) that is λ^{2s}cos(λx)"""
    p = FracParams(1, 0.5)
    x = 0.4
    value = frac_laplacian_point(p, cosine_field(1).rescale(factor), [x]).value
    expected = factor ** (2.0 * p.s) * np.cos(factor * x)
    assert value == pytest.approx(expected, abs=1e-4 * max(1.0, factor ** (2.0 * p.s)))


def test_riesz_kernel_is_s_harmonic_on_the_line():
    """|y|^{2s-1} solves (-Δ)^s u = 0 away from the origin"""
    p = FracParams(1, 0.25)
    spec = QuadSpec(rel_tol=1e-7, abs_tol=1e-7)
    report = s_harmonicity_report(p, riesz_kernel_field(p), [[1.0], [-2.0], [3.0]], tol=1e-3, spec=spec)
    assert report.passed, f"max |(-Δ)^s u| = {report.max_abs}, converged={report.converged}"


@pytest.mark.slow
def test_riesz_kernel_is_s_harmonic_in_space():
    """|y|^{-2} in R³ with the polar axis of the sphere rule on the singularity"""
    print("\n🧪 TEST: s-harmonicity of the Riesz kernel, n=3")
    p = FracParams(3, 0.5)
    spec = QuadSpec(rel_tol=1e-7, abs_tol=1e-7, polar_points=512, azimuth_points=4)
    report = s_harmonicity_report(p, riesz_kernel_field(p), [[2.0, 0.0, 0.0], [0.0, 0.0, -2.0]],
                                  tol=1e-2, spec=spec)
    assert report.passed, f"max |(-Δ)^s u| = {report.max_abs}, converged={report.converged}"
    print(f"✅ max |(-Δ)^s u| = {report.max_abs:.2e}")
