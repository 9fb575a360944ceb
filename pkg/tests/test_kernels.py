"""
Poisson kernel, mollifier, regularized kernel Ψ and its derivatives
"""

import math

import numpy as np
import pytest
from scipy.integrate import quad

from fraclab.constants import FracParams
from fraclab.errors import (BoundarySingularityError, DomainError,
                            PreconditionError, SingularityError)
from fraclab.kernels import (SERIES_SWITCH, Ball, MultiIndex, mollifier_moment,
                             mollifier_phi, poisson_kernel, psi, psi_derivative,
                             psi_scaled, regularized_kernel, riesz_kernel)

HALF_LINE = FracParams(1, 0.5)
PLANE = FracParams(2, 0.25)


def test_ball_and_multi_index():
    ball = Ball.unit(2)
    assert ball.n == 2 and ball.radius == 1.0
    assert bool(ball.contains([0.5, 0.5]))
    assert not bool(ball.contains([1.0, 0.0]))
    with pytest.raises(DomainError):
        Ball((0.0,), 0.0)

    gamma = MultiIndex.parse("1, 2")
    assert gamma.entries == (1, 2) and gamma.order == 3 and gamma.n == 2
    assert str(gamma) == "1,2"
    assert MultiIndex.unit(3, 1, 2).entries == (0, 2, 0)
    assert MultiIndex.zero(2).order == 0
    with pytest.raises(DomainError):
        MultiIndex.parse("1,x")


def test_poisson_kernel_value():
    """P_1(0, 2) = β (3)^{-1/2} / 2 for n = 1, s = 1/2"""
    expected = (1.0 / math.pi) / (2.0 * math.sqrt(3.0))
    assert poisson_kernel(HALF_LINE, 1.0, [0.0], [2.0]) == pytest.approx(expected, rel=1e-13)


def test_poisson_kernel_vanishes_off_support():
    """Zero for |y| < r and for x outside the ball"""
    assert poisson_kernel(HALF_LINE, 1.0, [0.0], [0.5]) == 0.0
    assert poisson_kernel(HALF_LINE, 1.0, [1.5], [3.0]) == 0.0
    assert poisson_kernel(PLANE, 2.0, [0.0, 0.0], [1.0, 1.0]) == 0.0


def test_poisson_kernel_boundary_singularity():
    with pytest.raises(BoundarySingularityError):
        poisson_kernel(HALF_LINE, 1.0, [0.0], [1.0])
    with pytest.raises(BoundarySingularityError):
        poisson_kernel(PLANE, 5.0, [0.0, 0.0], [3.0, 4.0])


def test_mollifier():
    """φ is supported in (1, 4) with unit mass"""
    assert mollifier_phi(0.5) == 0.0
    assert mollifier_phi(1.0) == 0.0
    assert mollifier_phi(4.5) == 0.0
    assert mollifier_phi(2.5) > 0.0
    assert mollifier_moment(0.0) == pytest.approx(1.0, rel=1e-12)
    first = mollifier_moment(1.0)
    assert 1.0 < first < 4.0, f"mean radius {first} must lie in the support"
    assert mollifier_moment(2.0) > first ** 2, "variance must be positive"


def test_psi_vanishes_inside_unit_ball():
    for p in (HALF_LINE, PLANE):
        e1 = np.eye(p.n)[0]
        assert psi(p, 0.5 * e1) == 0.0
        assert psi(p, e1) == 0.0
        assert psi(p, 1.5 * e1) > 0.0
    assert psi_scaled(HALF_LINE, 2.0, [1.9]) == 0.0


@pytest.mark.parametrize("t", [2.0, 3.0, 5.0, 8.0])
def test_table_matches_exact(t):
    """The tabulated profile agrees with per-point quadrature"""
    kernel = regularized_kernel(PLANE)
    exact = kernel.exact(t)
    fast = float(kernel.profile(np.array([t]))[0])
    assert fast == pytest.approx(exact, rel=1e-6), f"table {fast} vs exact {exact} at t={t}"


def test_series_matches_table_on_overlap():
    """Both representations agree where the table and series overlap"""
    kernel = regularized_kernel(HALF_LINE)
    t = np.array([8.6, 8.75, 8.9])
    table = kernel.profile(t, use_series=False)
    series = kernel.profile(t, use_series=True)
    assert np.allclose(series, table, rtol=1e-7, atol=0.0)


def test_psi_far_field_asymptotics():
    """|y|^{n+2s} Ψ(y) tends to β m_{2s}"""
    for p in (HALF_LINE, PLANE):
        kernel = regularized_kernel(p)
        t = 1e3
        scaled = t ** (p.n + 2.0 * p.s) * float(kernel.profile(np.array([t]))[0])
        assert scaled == pytest.approx(kernel.asymptotic_constant, rel=1e-4)


def test_derivative_order_zero_is_value():
    kernel = regularized_kernel(PLANE)
    y = np.array([[2.0, 1.0], [0.3, 0.1], [12.0, -3.0]])
    assert np.allclose(psi_derivative(PLANE, MultiIndex.zero(2), 1.0, y), kernel.values(y, 1.0))


def test_first_derivative_against_difference_quotient():
    """∂₁Ψ at (5, 0) matches a plain central difference of the profile"""
    kernel = regularized_kernel(PLANE)
    h = 1e-4
    plus = kernel.values(np.array([[5.0 + h, 0.0]]))[0]
    minus = kernel.values(np.array([[5.0 - h, 0.0]]))[0]
    reference = (plus - minus) / (2.0 * h)
    value = psi_derivative(PLANE, MultiIndex.unit(2, 0), 1.0, [5.0, 0.0])
    assert value == pytest.approx(reference, rel=1e-5)
    assert value < 0.0, "Ψ decreases outward at |y| = 5"


def test_derivative_is_odd():
    """Odd multi-indices give odd derivatives of a radial kernel"""
    gamma = MultiIndex.unit(2, 0)
    right = psi_derivative(PLANE, gamma, 1.0, [5.0, 0.7])
    left = psi_derivative(PLANE, gamma, 1.0, [-5.0, 0.7])
    assert left == pytest.approx(-right, rel=1e-12)


def test_derivative_inside_and_flags():
    gamma = MultiIndex.unit(1, 0)
    assert psi_derivative(HALF_LINE, gamma, 1.0, [0.5]) == 0.0

    value, flagged = psi_derivative(HALF_LINE, gamma, 1.0, [1.01], return_flags=True)
    assert flagged, "stencil reaching into |y| < r0 must be flagged"
    _, clean = psi_derivative(HALF_LINE, gamma, 1.0, [3.0], return_flags=True)
    assert not clean


def test_derivative_order_limit():
    with pytest.raises(PreconditionError):
        psi_derivative(HALF_LINE, MultiIndex((5,)), 1.0, [3.0])
    with pytest.raises(DomainError):
        psi_derivative(HALF_LINE, MultiIndex((1, 0)), 1.0, [3.0])


def test_derivative_scaling():
    """D^γΨ_{r0}(y) = r0^{-n-|γ|} (D^γΨ)(y/r0)"""
    gamma = MultiIndex((2,))
    unit = psi_derivative(HALF_LINE, gamma, 1.0, [3.0])
    scaled = psi_derivative(HALF_LINE, gamma, 2.0, [6.0])
    assert scaled == pytest.approx(unit * 2.0 ** -3, rel=1e-9)


def test_series_switch_constant():
    assert 4.0 < SERIES_SWITCH < 9.0


def test_riesz_kernel():
    p = FracParams(3, 0.5)
    assert riesz_kernel(p, [0.0, 0.0, 0.0], [0.0, 2.0, 0.0]) == pytest.approx(0.25)
    with pytest.raises(SingularityError):
        riesz_kernel(p, [1.0, 0.0, 0.0], [1.0, 0.0, 0.0])
    with pytest.raises(DomainError):
        riesz_kernel(FracParams(1, 0.5), [0.0], [1.0])


def test_psi_is_radial():
    assert psi(PLANE, [3.0, 4.0]) == psi(PLANE, [5.0, 0.0]) == psi(PLANE, [0.0, -5.0])
    angles = np.linspace(0.0, 2.0 * np.pi, 13)
    ring = 6.5 * np.column_stack([np.cos(angles), np.sin(angles)])
    values = regularized_kernel(PLANE).values(ring)
    assert np.allclose(values, values[0], rtol=1e-10, atol=0.0)


def test_psi_against_direct_mollification():
    """Ψ(y) = ∫ P_r(0, y) φ(r) dr evaluated with scipy at |y| = 5"""
    def raw_bump(r):
        return math.exp(-1.0 / ((r - 1.0) * (4.0 - r))) if 1.0 < r < 4.0 else 0.0

    mass, _ = quad(raw_bump, 1.0, 4.0, epsabs=0.0, epsrel=1e-13, limit=200)
    y = [3.0, 4.0]
    expected, _ = quad(lambda r: poisson_kernel(PLANE, r, [0.0, 0.0], y) * raw_bump(r) / mass,
                       1.0, 4.0, epsabs=0.0, epsrel=1e-12, limit=200)
    assert psi(PLANE, y) == pytest.approx(expected, rel=1e-8)


def test_psi_scaled_at_unit_scale_is_psi():
    for p, y in ((HALF_LINE, [2.5]), (PLANE, [1.2, -3.0])):
        assert psi_scaled(p, 1.0, y) == psi(p, y)
        assert psi_scaled(p, 2.0, 2.0 * np.asarray(y)) == pytest.approx(2.0 ** -p.n * psi(p, y), rel=1e-12)


@pytest.mark.parametrize("order", [1, 2])
def test_derivative_decay_bound(order):
    """|D^γΨ(y)|·|y|^{n+2s+|γ|} stays bounded and tends to the far-field constant"""
    p = HALF_LINE
    kernel = regularized_kernel(p)
    power = p.n + 2.0 * p.s
    limit = kernel.asymptotic_constant * (-power if order == 1 else power * (power + 1.0))

    t = np.geomspace(1.5, 200.0, 40)
    products = psi_derivative(p, MultiIndex((order,)), 1.0, t[:, None]) * t ** (power + order)
    assert np.all(np.isfinite(products))
    assert np.max(np.abs(products)) < 1e3 * abs(limit), "weighted derivative must stay bounded"
    assert products[-1] == pytest.approx(limit, rel=1e-2)
    far = products[t >= 50.0]
    assert np.all(np.abs(far / limit - 1.0) < 5e-2), far / limit
