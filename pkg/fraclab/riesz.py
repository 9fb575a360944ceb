"""
Riesz potentials u = c·∫ f(y)|x-y|^{2s-n} dy of compactly supported densities,
the inversion check (-Δ)^s u = f and the empirical choice between the printed
constant α_{N,s} and its reciprocal.
"""

import logging
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
from scipy.interpolate import make_interp_spline

from fraclab.config import parallel_map
from fraclab.constants import FracParams, riesz_constant
from fraclab.errors import DomainError, NonConvergenceError
from fraclab.fields import CompactDensity, GrowthHint, ScalarField, builtin_density
from fraclab.fraclap import frac_laplacian_point
from fraclab.quadrature import (DEFAULT_SPEC, QuadResult, QuadSpec, TailModel,
                                integrate_1d, integrate_endpoint_singular,
                                shell_integrand, sphere_rule)

logger = logging.getLogger(__name__)

RESIDUAL_THRESHOLD = 5e-2

# Ray grid for tabulated radial potentials, in units of the support radius
TABLE_INNER_EXTENT = 2.0
TABLE_INNER_STEPS = 64
TABLE_OUTER_EXTENT = 64.0
TABLE_OUTER_STEPS = 32

# ==========================================
# POTENTIAL
# ==========================================


def riesz_potential(
    p: FracParams,
    f: CompactDensity,
    x: Sequence[float],
    normalization: float = 1.0,
    spec: QuadSpec = DEFAULT_SPEC,
) -> QuadResult:
    """
    normalization·∫ f(y)|x-y|^{2s-n} dy

    Polar coordinates around x turn the kernel into the integrable weight
    ρ^{2s-1}; for 2s < 1 it is removed by the endpoint-singular rule.

    Args:
        p: Parameters with 2s < n
        f: Compact density
        x: Evaluation point
        normalization: Constant in front of the integral
        spec: Quadrature settings

    Returns:
        QuadResult
    """
    p.require_riesz_regime()
    if f.n != p.n:
        raise DomainError(f"density dimension {f.n} does not match n={p.n}")

    n, s = p.n, p.s
    x = np.asarray(x, dtype=float).reshape(n)
    rule = sphere_rule(n, spec)
    x_norm = float(np.linalg.norm(x))
    support = f.support_radius
    reach = support + x_norm
    breaks = [b for b in (abs(support - x_norm),) if 0.0 < b < reach]

    def angular(rho):
        rho = np.asarray(rho, dtype=float)
        flat = rho.reshape(-1)
        points = x + flat[:, None, None] * rule.directions[None, :, :]
        values = f.evaluate(points.reshape(-1, n)).reshape(flat.size, rule.size)
        return (values @ rule.weights).reshape(rho.shape)

    if 2.0 * s < 1.0:
        result = integrate_endpoint_singular(angular, 0.0, reach, 1.0 - 2.0 * s, at_b=False,
                                             spec=spec, breakpoints=breaks)
    else:
        result = integrate_1d(lambda rho: rho ** (2.0 * s - 1.0) * angular(rho), 0.0, reach,
                              spec, breakpoints=breaks)
    return result.scaled(normalization)


def density_mass(f: CompactDensity, spec: QuadSpec = DEFAULT_SPEC) -> float:
    """∫ f"""
    radial = shell_integrand(f.evaluate, np.zeros(f.n), spec)
    breaks = [] if f.smooth else [f.support_radius]
    return integrate_1d(radial, 0.0, f.support_radius * (1.0 + 1e-12), spec, breaks).value


def tabulate_potential(
    p: FracParams,
    f: CompactDensity,
    normalization: float = 1.0,
    spec: QuadSpec = DEFAULT_SPEC,
    threads: int = 1,
) -> ScalarField:
    """
    Potential of a radial density as a radial field

    Values along a ray up to 64 support radii are fitted by an even quintic
    spline; beyond the last node the potential continues as
    U(t_max)(t_max/|y|)^{n-2s}.
    """
    p.require_riesz_regime()
    if not f.radial:
        raise DomainError(f"tabulated potentials need a radial density, got {f.name!r}")

    n, s = p.n, p.s
    support = f.support_radius
    inner = np.linspace(0.0, TABLE_INNER_EXTENT * support, TABLE_INNER_STEPS + 1)
    outer = np.geomspace(TABLE_INNER_EXTENT * support, TABLE_OUTER_EXTENT * support,
                         TABLE_OUTER_STEPS + 1)[1:]
    radii = np.concatenate([inner, outer])
    axis = np.eye(n)[0]

    nodes = parallel_map(lambda t: riesz_potential(p, f, t * axis, 1.0, spec), list(radii), threads)
    failed = [float(t) for t, node in zip(radii, nodes) if not node.converged]
    if failed:
        raise NonConvergenceError(
            f"Riesz potential of {f.name!r} did not converge at {len(failed)} of {radii.size} "
            f"table radii (first at t={failed[0]:g})")
    values = normalization * np.array([node.value for node in nodes])

    # Mirror so the spline is even and flat at the origin
    knots = np.concatenate([-radii[:0:-1], radii])
    spline = make_interp_spline(knots, np.concatenate([values[:0:-1], values]), k=5)
    t_max = float(radii[-1])
    u_max = float(values[-1])
    decay = n - 2.0 * s

    def evaluate(y):
        t = np.linalg.norm(np.asarray(y, dtype=float).reshape(-1, n), axis=1)
        out = np.empty_like(t)
        near = t <= t_max
        out[near] = spline(t[near])
        out[~near] = u_max * (t_max / t[~near]) ** decay
        return out

    logger.debug("tabulated Riesz potential of %s on %d radii", f.name, radii.size)
    return ScalarField(
        evaluate, n,
        growth_hint=GrowthHint(abs(u_max) * t_max ** decay, -decay),
        name=f"riesz[{f.name}]",
        kinks=(((0.0,) * n, t_max),),
        tail_model=TailModel.POWER_LAW,
        bound=float(np.max(np.abs(values))),
        noise=spec.rel_tol,
    )


def potential_field(
    p: FracParams,
    f: CompactDensity,
    normalization: float = 1.0,
    spec: QuadSpec = DEFAULT_SPEC,
    threads: int = 1,
) -> ScalarField:
    """Tabulated field for radial densities, direct pointwise quadrature otherwise"""
    if f.radial:
        return tabulate_potential(p, f, normalization, spec, threads)

    def evaluate(y):
        return np.array([riesz_potential(p, f, row, normalization, spec).value
                         for row in np.asarray(y, dtype=float).reshape(-1, p.n)])

    return ScalarField(evaluate, p.n, growth_hint=GrowthHint(1.0, 2.0 * p.s - p.n),
                       name=f"riesz[{f.name}]", tail_model=TailModel.POWER_LAW,
                       noise=spec.rel_tol)


# ==========================================
# INVERSION AND ADJUDICATION
# ==========================================


@dataclass
class InversionReport:
    """(-Δ)^s u against f at the test points"""

    normalization: float
    points: List[List[float]]
    laplacian: List[float]
    density: List[float]
    max_abs_residual: float
    relative_residual: float
    converged: bool

    def to_dict(self) -> Dict[str, Any]:
        return dict(self.__dict__)


def default_test_points(f: CompactDensity) -> List[List[float]]:
    """The center and two interior points of the support"""
    axis = np.eye(f.n)[0]
    return [list(t * f.support_radius * axis) for t in (0.0, 0.25, 0.5)]


def _unit_laplacians(p, f, test_points, spec, threads):
    u = potential_field(p, f, 1.0, spec, threads)
    return parallel_map(lambda pt: frac_laplacian_point(p, u, pt, spec), test_points, threads)


def _report(normalization, points, unit_results, density_values) -> InversionReport:
    laplacian = [normalization * r.value for r in unit_results]
    residuals = [abs(lap - fv) for lap, fv in zip(laplacian, density_values)]
    max_abs = max(residuals, default=0.0)
    scale = max((abs(v) for v in density_values), default=0.0)
    return InversionReport(
        normalization=normalization,
        points=points,
        laplacian=laplacian,
        density=density_values,
        max_abs_residual=max_abs,
        relative_residual=max_abs / scale if scale > 0 else max_abs,
        converged=all(r.converged for r in unit_results),
    )


def inversion_residual(
    p: FracParams,
    f: CompactDensity,
    normalization: float,
    test_points: Optional[Sequence[Sequence[float]]] = None,
    spec: QuadSpec = DEFAULT_SPEC,
    threads: int = 1,
) -> InversionReport:
    """
    max |(-Δ)^s u - f| over test points for u = riesz_potential(f, normalization)

    The relative residual divides by max |f| over the same points.
    """
    p.require_riesz_regime()
    points = [list(map(float, pt)) for pt in (test_points or default_test_points(f))]
    unit = _unit_laplacians(p, f, points, spec, threads)
    density_values = [float(f(np.asarray(pt))) for pt in points]
    return _report(normalization, points, unit, density_values)


@dataclass
class AdjudicationReport:
    """Which of α_{N,s} and 1/α_{N,s} inverts (-Δ)^s"""

    params: Dict[str, Any]
    alpha: float
    alpha_report: InversionReport
    reciprocal_report: InversionReport
    threshold: float
    verdict: str

    @property
    def chosen_constant(self) -> Optional[float]:
        return {'alpha': self.alpha, 'reciprocal': 1.0 / self.alpha}.get(self.verdict)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'params': self.params,
            'alpha': self.alpha,
            'reciprocal': 1.0 / self.alpha,
            'alpha_residual': self.alpha_report.relative_residual,
            'reciprocal_residual': self.reciprocal_report.relative_residual,
            'threshold': self.threshold,
            'verdict': self.verdict,
            'chosen_constant': self.chosen_constant,
            'alpha_report': self.alpha_report.to_dict(),
            'reciprocal_report': self.reciprocal_report.to_dict(),
        }


def adjudicate_alpha(
    p: FracParams,
    spec: QuadSpec = DEFAULT_SPEC,
    density: Optional[CompactDensity] = None,
    test_points: Optional[Sequence[Sequence[float]]] = None,
    threshold: float = RESIDUAL_THRESHOLD,
    threads: int = 1,
) -> AdjudicationReport:
    """
    Run the inversion with normalization α and 1/α and report which passes

    The potential is linear in the normalization, so (-Δ)^s of the unit
    potential is computed once and scaled for both candidates. Verdict is
    'alpha' or 'reciprocal' when exactly one passes, 'inconclusive' otherwise.
    """
    p.require_riesz_regime()
    f = density or builtin_density('bump', p.n)
    alpha = riesz_constant(p)
    points = [list(map(float, pt)) for pt in (test_points or default_test_points(f))]

    unit = _unit_laplacians(p, f, points, spec, threads)
    density_values = [float(f(np.asarray(pt))) for pt in points]
    direct = _report(alpha, points, unit, density_values)
    reciprocal = _report(1.0 / alpha, points, unit, density_values)

    passes = {
        'alpha': direct.converged and direct.relative_residual < threshold,
        'reciprocal': reciprocal.converged and reciprocal.relative_residual < threshold,
    }
    winners = [name for name, ok in passes.items() if ok]
    verdict = winners[0] if len(winners) == 1 else 'inconclusive'

    if verdict == 'inconclusive':
        logger.warning("⚠️ α adjudication inconclusive for n=%d, s=%g: residuals %.3g / %.3g",
                       p.n, p.s, direct.relative_residual, reciprocal.relative_residual)
    else:
        logger.info("✅ α adjudication for n=%d, s=%g: %s (residuals %.3g / %.3g)",
                    p.n, p.s, verdict, direct.relative_residual, reciprocal.relative_residual)

    return AdjudicationReport(p.to_dict(), alpha, direct, reciprocal, threshold, verdict)
