"""
Derivative estimates via the mean-value kernel and the decay experiment
"""

import numpy as np
import pytest

from fraclab.constants import FracParams
from fraclab.errors import DomainError, PreconditionError
from fraclab.fields import affine_data, affine_field, builtin_data, builtin_field, sign_data
from fraclab.geometry import BallDomain
from fraclab.kernels import Ball, MultiIndex
from fraclab.liouville import (EstimateRecord, cauchy_estimate_record,
                               derivative_via_kernel, difference_field,
                               fit_loglog_slope, liouville_decay_experiment,
                               localized_estimate_record)
from fraclab.poisson import extension_field


def test_fit_loglog_slope():
    assert fit_loglog_slope([1.0, 2.0, 4.0], [1.0, 0.25, 0.0625]) == pytest.approx(-2.0)
    assert fit_loglog_slope([1.0, 2.0], [0.0, 1.0]) is None, "one usable pair is not a fit"


def test_record_csv_row():
    record = EstimateRecord('1', 2.0, 0.5, 0.1, 0.4, None)
    assert record.csv_row() == [2.0, 0.5, 0.1, 0.4, '']
    assert EstimateRecord.CSV_COLUMNS == ('R', 'lhs', 'tail', 'rhs_factor', 'ratio')
    assert record.to_dict()['ratio'] is None


def test_derivative_of_affine_field():
    """u⋆∂Ψ_{r0} recovers the slope of a globally s-harmonic affine field"""
    p = FracParams(1, 0.75)
    u = affine_data(1, 2.0, 1.0)
    value = derivative_via_kernel(p, u, MultiIndex((1,)), [0.0], 0.5).value
    assert value == pytest.approx(2.0, abs=1e-4)

    second = derivative_via_kernel(p, u, MultiIndex((2,)), [0.0], 0.5).value
    assert abs(second) < 1e-4, f"second derivative of an affine field is {second}"


def test_localized_record():
    """The estimate at an interior point uses R = δ_Ω(x) and the translated field"""
    p = FracParams(1, 0.75)
    record = localized_estimate_record(p, affine_field(1), BallDomain((0.0,), 4.0), MultiIndex((1,)), [0.5])
    assert record.radius == pytest.approx(3.5)
    assert record.center == [0.5]
    assert record.lhs == pytest.approx(1.0, abs=1e-4), "affine_field(1) has slope 1"
    assert record.tail > 0 and record.ratio > 0

    with pytest.raises(PreconditionError):
        localized_estimate_record(p, affine_field(1), BallDomain((0.0,), 4.0), MultiIndex((1,)), [5.0])


def test_decay_experiment_preconditions():
    p = FracParams(1, 0.5)
    gamma = MultiIndex((2,))
    with pytest.raises(DomainError):
        liouville_decay_experiment(p, sign_data(1), gamma, [2.0, 1.0])
    with pytest.raises(DomainError):
        liouville_decay_experiment(p, sign_data(1), gamma, [])
    with pytest.raises(PreconditionError):
        liouville_decay_experiment(p, affine_data(1, 1.0, 0.0), gamma, [1.0, 2.0])
    with pytest.raises(PreconditionError):
        liouville_decay_experiment(p, sign_data(1), MultiIndex((1,)), [1.0, 2.0])


def test_cauchy_record_rejects_bad_input():
    p = FracParams(1, 0.5)
    with pytest.raises(DomainError):
        cauchy_estimate_record(p, sign_data(1), MultiIndex((1,)), 0.0)
    with pytest.raises(DomainError):
        cauchy_estimate_record(p, sign_data(1), MultiIndex((1, 0)), 1.0)


def test_difference_field():
    """Differences of an affine field are constant and lose the polynomial growth"""
    u = affine_data(1, 2.0, 1.0)
    diff = difference_field(u, [0.25])
    assert diff([3.0]) == pytest.approx(0.5)
    assert diff([-7.0]) == pytest.approx(0.5)
    assert diff.growth_hint.m == 0.0
    assert diff.certified_for(0.1), "constant growth qualifies for every s"
    assert not u.certified_for(0.1)


def test_second_difference_of_quadratic_is_constant():
    """|y|² differenced along h1 then h2 is 2 h1·h2 everywhere"""
    u = builtin_field('quadratic', FracParams(1, 0.5))
    once = difference_field(u, [1.0])
    for y in (-3.0, 0.0, 0.4, 12.5):
        assert once([y]) == pytest.approx(2.0 * y + 1.0), f"(y+1)² - y² at y={y}"
    assert once.growth_hint.m == 1.0

    twice = difference_field(difference_field(u, [0.5]), [-1.5])
    values = twice(np.linspace(-20.0, 20.0, 41)[:, None])
    assert np.allclose(values, 2.0 * 0.5 * -1.5)
    assert twice.growth_hint.m == 0.0
    assert twice.certified_for(0.25) and not u.certified_for(0.25)


def test_zero_step_difference_vanishes():
    u = builtin_field('cosine', FracParams(2, 0.5))
    points = np.random.default_rng(4).uniform(-5.0, 5.0, (20, 2))
    assert np.all(difference_field(u, [0.0, 0.0])(points) == 0.0)


@pytest.mark.slow
def test_cauchy_ratio_is_scale_invariant():
    """Sign data is homogeneous of degree 0, so the ratio does not depend on R"""
    print("\n🧪 TEST: Cauchy ratio for sign data")
    p = FracParams(1, 0.5)
    gamma = MultiIndex((1,))
    ratios = []
    for R in (1.0, 4.0):
        u = extension_field(p, Ball((0.0,), R), sign_data(1))
        record = cauchy_estimate_record(p, u, gamma, R)
        ratios.append(record.ratio)
        print(f"   R={R}: lhs={record.lhs:.6g} ratio={record.ratio:.6g}")
    assert ratios[1] == pytest.approx(ratios[0], rel=1e-3)
    print("✅ ratio constant across radii")


@pytest.mark.slow
def test_second_derivative_decay():
    """|D²u_R(0)| decays at least like R^{2s-2} for power-decay data"""
    p = FracParams(1, 0.5)
    report = liouville_decay_experiment(p, builtin_data('power-decay:0.5', 1), MultiIndex((2,)),
                                        [1.0, 4.0, 16.0])
    assert report.decay_factor >= 2.0
    assert report.slope <= 2.0 * p.s - 2.0 + 0.3
    assert report.nonincreasing
    assert len(report.records) == 3 and report.bound_slope == -2.0
