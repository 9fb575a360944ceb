"""
Derivative estimates for s-harmonic functions.

Derivatives are extracted with the mean-value kernel, D^γu(x) = u⋆D^γΨ_{r0}(x),
and compared against the tail integral ∫_{|y|>=R/4}|u||y|^{-n-2s}. The decay
experiment extends bounded data into growing balls and measures how fast
D^γu_R(0) falls with R.
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from fraclab.cache import ResultCache
from fraclab.config import parallel_map
from fraclab.constants import FracParams, sphere_area
from fraclab.errors import DomainError, InconsistencyError, PreconditionError
from fraclab.fields import GrowthHint, ScalarField
from fraclab.geometry import Domain
from fraclab.kernels import (SERIES_SWITCH, TABLE_MAX, Ball, MultiIndex,
                             psi_derivative)
from fraclab.poisson import extension_field
from fraclab.quadrature import (DEFAULT_SPEC, QuadResult, QuadSpec,
                                integrate_exterior_ball, radial_breaks)

logger = logging.getLogger(__name__)

# r0 just under R/4 keeps the strict 4·r0 margin inside B(0, R)
KERNEL_SCALE = 0.245

# Tails below this are treated as zero when checking consistency
ZERO_TAIL = 1e-300
MONOTONE_SLACK = 0.05


def derivative_via_kernel(
    p: FracParams,
    u: ScalarField,
    gamma: MultiIndex,
    x: Sequence[float],
    r0: float,
    spec: QuadSpec = DEFAULT_SPEC,
) -> QuadResult:
    """
    D^γu(x) = ∫_{|x-y|>=r0} u(y) (D^γΨ_{r0})(x-y) dy

    Valid when u is s-harmonic on a ball of radius > 4·r0 around x (the
    caller's responsibility).
    """
    u.require_certificate(p.s)
    x = np.asarray(x, dtype=float).reshape(p.n)
    scale = max(abs(u(x)), u.bound or 0.0, 1e-300)
    local = spec.loosened(u.noise, scale)
    flagged = [0]

    def integrand(y):
        values, flags = psi_derivative(p, gamma, r0, x - y, return_flags=True)
        flagged[0] += int(np.count_nonzero(flags))
        return u.evaluate(y) * values

    profile_breaks = [4.0 * r0, SERIES_SWITCH * r0, TABLE_MAX * r0]
    breaks = sorted(set(profile_breaks + radial_breaks(x, u.kinks)))
    result = integrate_exterior_ball(
        integrand, x, r0, u.decay_exponent(p.s) + gamma.order, local, tail=u.tail_model,
        breakpoints=[b for b in breaks if b > r0])

    if flagged[0]:
        logger.debug("%d stencils near |z| = r0 ran at reduced accuracy", flagged[0])
    return result


# ==========================================
# CAUCHY-TYPE ESTIMATE
# ==========================================


@dataclass
class EstimateRecord:
    """Both sides of |D^γu(0)| <= C R^{2s-|γ|} ∫_{|y|>=R/4}|u||y|^{-n-2s}"""

    gamma: str
    radius: float
    lhs: float
    tail: float
    rhs_factor: float
    ratio: Optional[float]
    converged: bool = True
    center: List[float] = field(default_factory=list)

    CSV_COLUMNS = ('R', 'lhs', 'tail', 'rhs_factor', 'ratio')

    def csv_row(self) -> List[Any]:
        return [self.radius, self.lhs, self.tail, self.rhs_factor,
                '' if self.ratio is None else self.ratio]

    def to_dict(self) -> Dict[str, Any]:
        return {k: v for k, v in self.__dict__.items()}


def tail_integral(p: FracParams, u: ScalarField, radius: float,
                  spec: QuadSpec = DEFAULT_SPEC) -> QuadResult:
    """∫_{|y|>=radius} |u(y)| |y|^{-n-2s} dy"""
    n, s = p.n, p.s
    scale = max(u.bound or 0.0, 1e-300)
    local = spec.loosened(u.noise, scale * radius ** (-2.0 * s))

    def integrand(y):
        return np.abs(u.evaluate(y)) * np.linalg.norm(y, axis=1) ** (-n - 2.0 * s)

    breaks = [b for b in radial_breaks(np.zeros(n), u.kinks) if b > radius]
    return integrate_exterior_ball(integrand, np.zeros(n), radius, u.decay_exponent(s), local,
                                   tail=u.tail_model, breakpoints=breaks)


def cauchy_estimate_record(
    p: FracParams,
    u: ScalarField,
    gamma: MultiIndex,
    R: float,
    spec: QuadSpec = DEFAULT_SPEC,
) -> EstimateRecord:
    """
    lhs = |D^γu(0)| with r0 = 0.245·R, tail over |y| >= R/4, rhs = R^{2s-|γ|}·tail

    Raises InconsistencyError when the tail vanishes but the derivative does not.
    """
    if not R > 0:
        raise DomainError(f"radius must be positive, got {R}")
    if gamma.n != p.n:
        raise DomainError(f"multi-index {gamma} does not match n={p.n}")

    derivative = derivative_via_kernel(p, u, gamma, np.zeros(p.n), KERNEL_SCALE * R, spec)
    tail = tail_integral(p, u, R / 4.0, spec)
    lhs = abs(derivative.value)
    rhs = R ** (2.0 * p.s - gamma.order) * tail.value

    if rhs <= ZERO_TAIL:
        if lhs > max(derivative.error_estimate, spec.abs_tol) * 10.0:
            raise InconsistencyError(
                f"tail integral vanishes at R={R:g} but |D^{gamma}u(0)| = {lhs:.3g}; "
                "u is not s-harmonic in B(0, R)")
        ratio = None
    else:
        ratio = lhs / rhs

    record = EstimateRecord(str(gamma), float(R), lhs, tail.value, rhs, ratio,
                            derivative.converged and tail.converged, [0.0] * p.n)
    logger.info("R=%g: |D^%s u(0)|=%.6g tail=%.6g ratio=%s", R, gamma, lhs, tail.value,
                'n/a' if ratio is None else f"{ratio:.4g}")
    return record


def localized_estimate_record(
    p: FracParams,
    u: ScalarField,
    omega: Domain,
    gamma: MultiIndex,
    x: Sequence[float],
    spec: QuadSpec = DEFAULT_SPEC,
) -> EstimateRecord:
    """
    The estimate at an interior point x of Ω with R = δ_Ω(x)

    Applied to the translated field u(·+x), so D^γu(x) is measured at 0.
    """
    x = np.asarray(x, dtype=float).reshape(p.n)
    R = omega.dist_to_complement(x)
    if not R > 0:
        raise PreconditionError(f"x = {x.tolist()} is not inside the domain {omega}")
    record = cauchy_estimate_record(p, u.translate(x), gamma, R, spec)
    record.center = x.tolist()
    return record


# ==========================================
# DECAY EXPERIMENT
# ==========================================


def fit_loglog_slope(xs: Sequence[float], ys: Sequence[float]) -> Optional[float]:
    """Least-squares slope of log y against log x over the positive pairs"""
    pairs = [(x, y) for x, y in zip(xs, ys) if x > 0 and y > 0]
    if len(pairs) < 2:
        return None
    log_x, log_y = np.log(np.array(pairs).T)
    return float(np.polyfit(log_x, log_y, 1)[0])


@dataclass
class DecayReport:
    """|D^γu_R(0)| over growing radii with the fitted slope and bound curve"""

    params: Dict[str, Any]
    data: str
    gamma: str
    radii: List[float]
    derivatives: List[float]
    bound_curve: List[float]
    slope: Optional[float]
    bound_slope: float
    nonincreasing: bool
    decay_factor: Optional[float]
    converged: bool
    records: List[EstimateRecord] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        out = {k: v for k, v in self.__dict__.items() if k != 'records'}
        out['records'] = [r.to_dict() for r in self.records]
        return out


def liouville_decay_experiment(
    p: FracParams,
    g: ScalarField,
    gamma: MultiIndex,
    radii: Sequence[float],
    spec: QuadSpec = DEFAULT_SPEC,
    threads: int = 1,
    cache: Optional[ResultCache] = None,
) -> DecayReport:
    """
    Extend bounded g into B(0, R) for each R and record |D^γu_R(0)|

    The bound curve is ‖g‖∞ σ_{n-1} 4^{2s}/(2s) · R^{-|γ|}: the Cauchy-type
    estimate with the bounded-data tail, up to its unknown constant. The
    report carries the measured slope; no theoretical slope is asserted.

    Args:
        p: Parameters
        g: Bounded exterior data (bound set)
        gamma: Multi-index with |γ| > 2s
        radii: Strictly increasing radii
        spec: Quadrature settings
        threads: Worker cap over radii
        cache: Shared cache for extension values
    """
    radii = [float(R) for R in radii]
    if not radii or any(R <= 0 for R in radii):
        raise DomainError("radii must be positive")
    if any(b <= a for a, b in zip(radii, radii[1:])):
        raise DomainError(f"radii must be strictly increasing, got {radii}")
    if g.bound is None:
        raise PreconditionError(f"decay experiment needs bounded data; {g.name!r} has no bound")
    if not gamma.order > 2.0 * p.s:
        raise PreconditionError(f"need |γ| > 2s, got |γ|={gamma.order}, s={p.s}")

    cache = cache if cache is not None else ResultCache(url='')

    def run(R):
        u = extension_field(p, Ball((0.0,) * p.n, R), g, spec, cache)
        record = cauchy_estimate_record(p, u, gamma, R, spec)
        logger.info("decay run R=%g done", R)
        return record

    records = parallel_map(run, radii, threads)
    derivatives = [r.lhs for r in records]
    constant = g.bound * sphere_area(p.n) * 4.0 ** (2.0 * p.s) / (2.0 * p.s)
    bound_curve = [constant * R ** (-gamma.order) for R in radii]

    nonincreasing = all(b <= a * (1.0 + MONOTONE_SLACK) + spec.abs_tol
                        for a, b in zip(derivatives, derivatives[1:]))
    decay_factor = derivatives[0] / derivatives[-1] if derivatives[-1] > 0 else None

    return DecayReport(
        params=p.to_dict(),
        data=g.name,
        gamma=str(gamma),
        radii=radii,
        derivatives=derivatives,
        bound_curve=bound_curve,
        slope=fit_loglog_slope(radii, derivatives),
        bound_slope=-float(gamma.order),
        nonincreasing=nonincreasing,
        decay_factor=decay_factor,
        converged=all(r.converged for r in records),
        records=records,
    )


# ==========================================
# DIFFERENCE FIELD
# ==========================================


def difference_field(u: ScalarField, h: Sequence[float]) -> ScalarField:
    """
    u_h(y) = u(y+h) - u(y)

    For polynomial growth hints the degree drops by one, which can turn an
    uncertified field into a certified one.
    """
    shift = np.asarray(h, dtype=float).reshape(u.n)
    inner = u.evaluate

    def evaluate(y):
        return inner(y + shift) - inner(y)

    growth = u.growth_hint
    if growth is not None and growth.polynomial:
        size = float(np.linalg.norm(shift))
        growth = GrowthHint(growth.K * max(growth.m, 1.0) * (1.0 + size) ** max(growth.m, 1.0),
                            max(growth.m - 1.0, 0.0), True)
    kinks = tuple(dict.fromkeys(u.kinks + tuple((tuple(np.asarray(c) - shift), r)
                                                for c, r in u.kinks)))
    return ScalarField(
        evaluate, u.n,
        l1s_certified=u.l1s_certified,
        growth_hint=growth,
        name=f"diff[{u.name}]",
        kinks=kinks,
        tail_model=u.tail_model,
        bound=2.0 * u.bound if u.bound is not None else None,
        noise=u.noise,
    )
