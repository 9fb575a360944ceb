"""
Domains: membership, distance to the complement, exit points and parsing
"""

import numpy as np
import pytest

from fraclab.errors import DomainError
from fraclab.geometry import (BallDomain, BoxDomain, UnionDomain,
                              dist_to_complement, parse_domain)


def test_ball_domain():
    ball = BallDomain((1.0, 0.0), 2.0)
    assert ball.contains([1.5, 0.5])
    assert not ball.contains([3.0, 0.0]), "the domain is open"
    assert dist_to_complement(ball, [1.5, 0.0]) == pytest.approx(1.5)
    assert dist_to_complement(ball, [5.0, 0.0]) == 0.0

    exit_point = ball.nearest_exterior_point([2.0, 0.0])
    assert not ball.contains(exit_point)
    assert np.linalg.norm(exit_point - np.array([2.0, 0.0])) == pytest.approx(1.0, rel=1e-9)
    assert ball.ball.radius == 2.0


def test_box_domain():
    box = BoxDomain((-1.0, -2.0), (1.0, 2.0))
    assert box.contains([0.0, 0.0])
    assert dist_to_complement(box, [0.5, 0.0]) == pytest.approx(0.5)
    exit_point = box.nearest_exterior_point([0.5, 0.0])
    assert not box.contains(exit_point)
    assert exit_point[1] == 0.0 and exit_point[0] > 1.0
    with pytest.raises(DomainError):
        BoxDomain((1.0,), (0.0,))


def test_union_domain():
    """Distance is the largest inscribed-ball radius over the containing components"""
    union = UnionDomain((BallDomain((0.0,), 1.0), BallDomain((1.5,), 1.0)))
    assert union.contains([0.2]) and union.contains([2.0])
    assert not union.contains([3.0])
    assert dist_to_complement(union, [0.2]) == pytest.approx(0.8)
    assert dist_to_complement(union, [0.75]) == pytest.approx(0.25)

    exit_point = union.nearest_exterior_point([0.75])
    assert not union.contains(exit_point)


def test_parse_domain():
    ball = parse_domain("ball(0,0,1)")
    assert isinstance(ball, BallDomain) and ball.n == 2 and ball.radius == 1.0

    box = parse_domain("box(-1,-1,1,1)", n=2)
    assert isinstance(box, BoxDomain) and box.upper == (1.0, 1.0)

    union = parse_domain("union(ball(0,1); ball(1.5,1))")
    assert isinstance(union, UnionDomain) and len(union.components) == 2
    assert parse_domain(union.to_spec()).to_spec() == union.to_spec()


@pytest.mark.parametrize("text", ["ball(1)", "box(0,1,2)", "sphere(0,1)", "ball(a,1)", "ball 0,1",
                                  "union(ball(0,1);ball(0,0,1))"])
def test_parse_errors(text):
    with pytest.raises(DomainError):
        parse_domain(text)


def test_parse_dimension_check():
    with pytest.raises(DomainError):
        parse_domain("ball(0,1)", n=2)
