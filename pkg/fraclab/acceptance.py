"""
Acceptance suite: property checks that exercise every module end to end.

Each criterion returns its measured values and a pass flag. The fast tier
uses fewer parameters, radii and samples; the full tier runs everything.
"""

import json
import logging
import math
import time
from dataclasses import dataclass, field
from typing import Any, Dict, List

import numpy as np

from fraclab.cache import ResultCache
from fraclab.constants import FracParams, constants_for
from fraclab.errors import DomainError
from fraclab.fields import (affine_field, bump2s_field, bump2s_oracle,
                            constant_data, cosine_field, sign_data, builtin_data)
from fraclab.fraclap import frac_laplacian_point
from fraclab.geometry import BallDomain, parse_domain
from fraclab.kernels import Ball, MultiIndex, mollifier_moment, psi, regularized_kernel
from fraclab.liouville import cauchy_estimate_record, liouville_decay_experiment
from fraclab.poisson import convolve_psi, extension_field, mean_value_residual, poisson_extend
from fraclab.quadrature import QuadSpec
from fraclab.riesz import adjudicate_alpha
from fraclab.wos import wos_solve

logger = logging.getLogger(__name__)

TIERS = ('fast', 'full')


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    measured: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return {'number': self.number, 'name': self.name, 'passed': self.passed,
                'measured': self.measured}


@dataclass
class AcceptanceReport:
    tier: str
    criteria: List[CriterionResult]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.criteria)

    def to_dict(self) -> Dict[str, Any]:
        return {'tier': self.tier, 'passed': self.passed,
                'criteria': [c.to_dict() for c in self.criteria]}


def _rel(a: float, b: float) -> float:
    return abs(a - b) / abs(b)


# ==========================================
# CRITERIA
# ==========================================


def check_constants(tier: str) -> CriterionResult:
    c1 = constants_for(FracParams(1, 0.5))
    c3 = constants_for(FracParams(3, 0.5))
    errors = {
        'c_ns(1,0.5)': _rel(c1.c_ns, 1.0 / math.pi),
        'beta_ns(1,0.5)': _rel(c1.beta_ns, 1.0 / math.pi),
        'alpha_ns(3,0.5)': _rel(c3.alpha_ns, 2.0 * math.pi ** 2),
    }
    return CriterionResult(1, 'constants', all(e < 1e-10 for e in errors.values()),
                           {'relative_errors': errors})


def check_kernel_normalization(tier: str, spec: QuadSpec = QuadSpec(), beta_scale: float = 1.0) -> CriterionResult:
    """∫ P_r(x, ·) = 1; beta_scale lets a mutated constant be checked"""
    orders = (0.25, 0.5, 0.75) if tier == 'full' else (0.25, 0.75)
    ratios = (0.0, 0.5, 0.9) if tier == 'full' else (0.0, 0.9)
    worst = 0.0
    cases = []
    for n in (1, 2, 3):
        for s in orders:
            for ratio in ratios:
                p = FracParams(n, s)
                x = ratio * np.eye(n)[0]
                mass = beta_scale * poisson_extend(p, Ball.unit(n), constant_data(n), x, spec).value
                worst = max(worst, abs(mass - 1.0))
                cases.append({'n': n, 's': s, 'ratio': ratio, 'mass': mass})
    return CriterionResult(2, 'kernel normalization', worst < 1e-6,
                           {'max_error': worst, 'cases': cases})


def check_psi(tier: str, spec: QuadSpec = QuadSpec()) -> CriterionResult:
    params = [FracParams(1, 0.5)] if tier == 'fast' else [
        FracParams(1, 0.5), FracParams(2, 0.25), FracParams(3, 0.75)]
    cases = []
    passed = True
    for p in params:
        e1 = np.eye(p.n)[0]
        vanishes = psi(p, 0.5 * e1) == 0.0 and psi(p, e1) == 0.0
        mass = convolve_psi(p, constant_data(p.n), 1.0, np.zeros(p.n), spec).value
        kernel = regularized_kernel(p)
        far = 1e3 ** (p.n + 2.0 * p.s) * psi(p, 1e3 * e1, spec)
        limit = kernel.beta * mollifier_moment(2.0 * p.s)
        ok = vanishes and abs(mass - 1.0) < 1e-6 and _rel(far, limit) < 1e-2
        passed = passed and ok
        cases.append({'params': p.to_dict(), 'vanishes': vanishes, 'mass': mass,
                      'decay_ratio': far / limit})
    return CriterionResult(3, 'regularized kernel', passed, {'cases': cases})


def check_mean_value(tier: str, spec: QuadSpec = QuadSpec()) -> CriterionResult:
    orders = (0.25, 0.5, 0.75) if tier == 'full' else (0.5,)
    points = (0.0, 0.5, 1.0) if tier == 'full' else (0.5,)
    omega = BallDomain((0.0,), 10.0)
    residuals = []
    for s in orders:
        p = FracParams(1, s)
        u = extension_field(p, Ball((0.0,), 10.0), sign_data(1), spec)
        for x in points:
            residuals.append({'s': s, 'x': x,
                              'residual': mean_value_residual(p, u, omega, 0.5, [x], spec)})
    worst = max(r['residual'] for r in residuals)
    return CriterionResult(4, 'mean-value identity', worst < 1e-4,
                           {'max_residual': worst, 'cases': residuals})


def check_fraclap(tier: str, spec: QuadSpec = QuadSpec()) -> CriterionResult:
    count = 10 if tier == 'full' else 3
    rng = np.random.default_rng(2024)
    affine_worst = 0.0
    for s in (0.6, 0.75, 0.9):
        p = FracParams(2, s)
        u = affine_field(2)
        for point in rng.uniform(-2.0, 2.0, (count, 2)):
            affine_worst = max(affine_worst, abs(frac_laplacian_point(p, u, point, spec).value))

    half = FracParams(1, 0.5)
    symbol = frac_laplacian_point(half, cosine_field(1), [0.0], spec).value
    bump_points = (0.0, 0.5, -0.5) if tier == 'full' else (0.0,)
    oracle = bump2s_oracle(half)
    bump_worst = max(abs(frac_laplacian_point(half, bump2s_field(half), [x], spec).value - oracle)
                     for x in bump_points)

    passed = affine_worst < 1e-6 and abs(symbol - 1.0) < 1e-4 and bump_worst < 1e-3
    return CriterionResult(5, 'fractional Laplacian', passed, {
        'affine_max_abs': affine_worst, 'cosine_symbol': symbol, 'bump_max_error': bump_worst})


def check_cauchy(tier: str, spec: QuadSpec = QuadSpec()) -> CriterionResult:
    p = FracParams(1, 0.5)
    radii = (1.0, 2.0, 4.0, 8.0, 16.0) if tier == 'full' else (1.0, 4.0, 16.0)
    gamma = MultiIndex.unit(1, 0)
    cache = ResultCache(url='')
    ratios = []
    for R in radii:
        u = extension_field(p, Ball((0.0,), R), sign_data(1), spec, cache)
        ratios.append(cauchy_estimate_record(p, u, gamma, R, spec).ratio)
    finite = all(r is not None and math.isfinite(r) and r > 0 for r in ratios)
    spread = max(ratios) / min(ratios) if finite else float('inf')
    return CriterionResult(6, 'Cauchy estimate', finite and spread <= 10.0,
                           {'radii': list(radii), 'ratios': ratios, 'spread': spread})


def check_liouville(tier: str, spec: QuadSpec = QuadSpec()) -> CriterionResult:
    radii = (1.0, 2.0, 4.0, 8.0, 16.0) if tier == 'full' else (1.0, 4.0, 16.0)

    second = FracParams(1, 0.5)
    even = liouville_decay_experiment(second, builtin_data('power-decay:0.5', 1),
                                      MultiIndex((2,)), radii, spec)
    first = FracParams(1, 0.25)
    odd = liouville_decay_experiment(first, sign_data(1), MultiIndex((1,)), radii, spec)

    def ok(report, order, s):
        return (report.decay_factor is not None and report.decay_factor >= 2.0
                and report.slope is not None and report.slope <= 2.0 * s - order + 0.3)

    passed = ok(even, 2, second.s) and ok(odd, 1, first.s)
    return CriterionResult(7, 'Liouville decay', passed, {
        'second_derivative': {'slope': even.slope, 'decay_factor': even.decay_factor,
                              'derivatives': even.derivatives},
        'first_derivative': {'slope': odd.slope, 'decay_factor': odd.decay_factor,
                             'derivatives': odd.derivatives},
    })


def check_riesz(tier: str, spec: QuadSpec = QuadSpec()) -> CriterionResult:
    verdicts = {}
    residuals = {}
    for p in (FracParams(3, 0.5), FracParams(2, 0.4)):
        points = [[0.0] * p.n] if tier == 'fast' else None
        report = adjudicate_alpha(p, spec, test_points=points)
        key = f"n={p.n},s={p.s}"
        verdicts[key] = report.verdict
        residuals[key] = {'alpha': report.alpha_report.relative_residual,
                          'reciprocal': report.reciprocal_report.relative_residual}
    values = set(verdicts.values())
    passed = len(values) == 1 and 'inconclusive' not in values
    return CriterionResult(8, 'Riesz adjudication', passed,
                           {'verdicts': verdicts, 'residuals': residuals})


def check_wos(tier: str, spec: QuadSpec = QuadSpec()) -> CriterionResult:
    samples = 10_000 if tier == 'full' else 2_000
    p = FracParams(1, 0.5)
    g = sign_data(1)
    ball = BallDomain((0.0,), 1.0)
    walk = wos_solve(p, ball, g, [0.3], samples, seed=7)
    exact = poisson_extend(p, ball.ball, g, [0.3], spec).value
    ball_ok = abs(walk.estimate - exact) < 3.0 * walk.std_error

    union = parse_domain('union(ball(0,1);ball(1.5,1))')
    a = wos_solve(p, union, g, [0.2], samples, seed=11)
    b = wos_solve(p, union, g, [0.2], samples, seed=12)
    union_ok = abs(a.estimate - b.estimate) < 3.0 * math.hypot(a.std_error, b.std_error)

    return CriterionResult(9, 'walk-on-spheres', ball_ok and union_ok, {
        'ball': {'estimate': walk.estimate, 'std_error': walk.std_error, 'poisson': exact},
        'union': {'seed_11': a.estimate, 'seed_12': b.estimate,
                  'std_errors': [a.std_error, b.std_error]},
    })


def check_determinism(tier: str, spec: QuadSpec = QuadSpec()) -> CriterionResult:
    """Re-run every other criterion at the same tier and compare serialized output byte for byte"""
    identical = {}
    for check in CRITERIA:
        if check is check_determinism:
            continue
        first = json.dumps(check(tier).to_dict(), sort_keys=True)
        second = json.dumps(check(tier).to_dict(), sort_keys=True)
        identical[check.__name__] = first == second
    return CriterionResult(10, 'determinism', all(identical.values()), {'identical': identical})


CRITERIA = [
    check_constants,
    check_kernel_normalization,
    check_psi,
    check_mean_value,
    check_fraclap,
    check_cauchy,
    check_liouville,
    check_riesz,
    check_wos,
    check_determinism,
]


def run_acceptance_suite(tier: str = 'fast') -> AcceptanceReport:
    """
    Run every criterion at the given tier

    Criteria never abort the suite: an exception is recorded as a failure
    with its message.
    """
    if tier not in TIERS:
        raise DomainError(f"tier must be one of {TIERS}, got {tier!r}")

    results = []
    for check in CRITERIA:
        started = time.perf_counter()
        try:
            result = check(tier)
        except Exception as e:
            logger.exception("criterion %s raised", check.__name__)
            result = CriterionResult(CRITERIA.index(check) + 1, check.__name__, False,
                                     {'error': str(e), 'type': type(e).__name__})
        logger.info("%s criterion %d (%s) in %.1fs", '✅' if result.passed else '❌',
                    result.number, result.name, time.perf_counter() - started)
        results.append(result)
    return AcceptanceReport(tier, results)
