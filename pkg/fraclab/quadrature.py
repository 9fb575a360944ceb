"""
Adaptive quadrature used by every integral in fraclab.

Integrands are vectorized: a callable receives a numpy array of abscissae (or
an (m, n) array of points) and returns an array of the same leading shape.
"""

import heapq
import logging
import math
from dataclasses import asdict, dataclass, replace
from enum import Enum
from functools import lru_cache
from typing import Any, Callable, Dict, Iterable, Optional, Sequence

import numpy as np

from fraclab.constants import sphere_area
from fraclab.errors import DomainError, UnsupportedDimensionError

logger = logging.getLogger(__name__)

ScalarFunction = Callable[[np.ndarray], np.ndarray]
PointFunction = Callable[[np.ndarray], np.ndarray]

EPS = np.finfo(float).eps

# ==========================================
# SETTINGS AND RESULTS
# ==========================================


@dataclass(frozen=True)
class QuadSpec:
    """
    Tolerances and limits shared by all integrals

    tail_radius_factor is the multiple of the inner radius at which exterior
    integrals stop doing quadrature and switch to an analytic tail.
    """

    rel_tol: float = 1e-10
    abs_tol: float = 1e-12
    max_subdivisions: int = 2000
    tail_radius_factor: float = 64.0
    circle_points: int = 64
    polar_points: int = 32
    azimuth_points: int = 64

    def __post_init__(self):
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise DomainError("rel_tol and abs_tol must be positive")
        if self.max_subdivisions < 1:
            raise DomainError("max_subdivisions must be at least 1")
        if self.tail_radius_factor < 2:
            raise DomainError("tail_radius_factor must be at least 2")
        if self.circle_points < 4 or self.circle_points % 2:
            raise DomainError("circle_points must be an even number >= 4")
        if self.polar_points < 2 or self.azimuth_points < 4 or self.azimuth_points % 2:
            raise DomainError("sphere grid too coarse")

    def with_overrides(self, **overrides: Any) -> 'QuadSpec':
        """Copy with the non-None overrides applied"""
        changes = {k: v for k, v in overrides.items() if v is not None}
        return replace(self, **changes) if changes else self

    def loosened(self, noise: float, scale: float = 1.0) -> 'QuadSpec':
        """
        Tolerances suited to an integrand whose values carry relative noise

        Outer integrals over fields that are themselves quadrature results
        cannot resolve below the inner accuracy; asking them to would only
        burn the subdivision budget.
        """
        if noise <= 0:
            return self
        return replace(
            self,
            rel_tol=max(self.rel_tol, 100.0 * noise),
            abs_tol=max(self.abs_tol, 100.0 * noise * max(scale, 1e-300)),
        )

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


DEFAULT_SPEC = QuadSpec()


@dataclass(frozen=True)
class QuadResult:
    """Value of an integral with its error estimate and cost"""

    value: float
    error_estimate: float = 0.0
    evaluations: int = 1
    converged: bool = True
    subdivisions: int = 0

    def __add__(self, other: 'QuadResult') -> 'QuadResult':
        return QuadResult(
            value=self.value + other.value,
            error_estimate=self.error_estimate + other.error_estimate,
            evaluations=self.evaluations + other.evaluations,
            converged=self.converged and other.converged,
            subdivisions=self.subdivisions + other.subdivisions,
        )

    def scaled(self, factor: float) -> 'QuadResult':
        return replace(self, value=self.value * factor,
                       error_estimate=self.error_estimate * abs(factor))

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


class TailModel(str, Enum):
    """How exterior integrals treat the region beyond tail_radius_factor·r"""

    BOUND = 'bound'
    POWER_LAW = 'power_law'


# ==========================================
# GAUSS-KRONROD 7/15 RULE
# ==========================================

# Kronrod abscissae on [0, 1) in decreasing order; the odd-indexed ones and 0
# are the 7-point Gauss nodes.
_XGK = (
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
)
_WGK = (
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
)
_WG = (
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
)


def _build_rule():
    nodes = np.concatenate([-np.array(_XGK[:7]), [0.0], np.array(_XGK[:7])[::-1]])
    kronrod = np.concatenate([_WGK[:7], [_WGK[7]], _WGK[:7][::-1]])
    gauss = np.zeros(15)
    for i in (1, 3, 5):
        gauss[i] = gauss[14 - i] = _WG[(i - 1) // 2]
    gauss[7] = _WG[3]
    return nodes, kronrod, gauss


_NODES, _KRONROD, _GAUSS = _build_rule()


def _as_values(values: Any, shape) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.shape != shape:
        arr = np.broadcast_to(arr, shape)
    return arr


def _gk15(f: ScalarFunction, a: float, b: float):
    """One panel: (value, error) in the QUADPACK manner"""
    center = 0.5 * (a + b)
    half = 0.5 * (b - a)
    fx = _as_values(f(center + half * _NODES), _NODES.shape)

    resk = float(np.dot(_KRONROD, fx))
    resg = float(np.dot(_GAUSS, fx))
    resabs = float(np.dot(_KRONROD, np.abs(fx))) * abs(half)
    resasc = float(np.dot(_KRONROD, np.abs(fx - 0.5 * resk))) * abs(half)

    value = resk * half
    error = abs((resk - resg) * half)
    if resasc != 0.0 and error != 0.0:
        error = resasc * min(1.0, (200.0 * error / resasc) ** 1.5)
    if resabs > np.finfo(float).tiny / (50.0 * EPS):
        error = max(50.0 * EPS * resabs, error)
    if not math.isfinite(value):
        raise DomainError(f"integrand is not finite on [{a}, {b}]")
    return value, error


# ==========================================
# ONE-DIMENSIONAL INTEGRALS
# ==========================================


def integrate_1d(
    f: ScalarFunction,
    a: float,
    b: float,
    spec: QuadSpec = DEFAULT_SPEC,
    breakpoints: Iterable[float] = (),
) -> QuadResult:
    """
    Adaptive Gauss-Kronrod integration of f over [a, b]

    The panel with the largest error estimate is bisected until the summed
    error meets max(abs_tol, rel_tol·|value|) or the subdivision budget runs
    out, in which case the result is returned with converged=False.

    Args:
        f: Vectorized integrand
        a: Lower limit
        b: Upper limit, b > a
        spec: Tolerances and budget
        breakpoints: Interior points where f is not smooth

    Returns:
        QuadResult
    """
    a, b = float(a), float(b)
    if not a < b:
        raise DomainError(f"integration interval must satisfy a < b, got [{a}, {b}]")

    edges = sorted({a, b, *(float(x) for x in breakpoints if a < x < b)})
    heap = []
    finished = []
    counter = 0
    total_error = 0.0
    total_value = 0.0

    for left, right in zip(edges[:-1], edges[1:]):
        value, error = _gk15(f, left, right)
        heapq.heappush(heap, (-error, counter, left, right, value))
        counter += 1
        total_error += error
        total_value += value

    evaluations = 15 * counter
    subdivisions = 0
    converged = True

    while heap:
        if total_error <= max(spec.abs_tol, spec.rel_tol * abs(total_value)):
            break
        if subdivisions >= spec.max_subdivisions:
            converged = False
            break

        neg_error, _, left, right, value = heapq.heappop(heap)
        mid = 0.5 * (left + right)
        if not left < mid < right or (right - left) <= 8 * EPS * max(abs(left), abs(right), 1.0):
            # Cannot split further; keep the panel as is.
            finished.append((-neg_error, left, right, value))
            if not heap:
                converged = total_error <= max(spec.abs_tol, spec.rel_tol * abs(total_value))
            continue

        v1, e1 = _gk15(f, left, mid)
        v2, e2 = _gk15(f, mid, right)
        evaluations += 30
        subdivisions += 1
        total_error += e1 + e2 + neg_error
        total_value += v1 + v2 - value
        heapq.heappush(heap, (-e1, counter, left, mid, v1))
        heapq.heappush(heap, (-e2, counter + 1, mid, right, v2))
        counter += 2

    panels = sorted(
        [(left, value, -neg_error) for neg_error, _, left, _, value in heap]
        + [(left, value, error) for error, left, _, value in finished]
    )
    value = math.fsum(p[1] for p in panels)
    error = math.fsum(p[2] for p in panels)

    if not converged:
        logger.warning("⚠️ integral on [%g, %g] not converged: error %.3g after %d subdivisions",
                       a, b, error, subdivisions)
    else:
        logger.debug("integral on [%g, %g]: %d panels", a, b, len(panels))

    return QuadResult(value, error, evaluations, converged, subdivisions)


def integrate_endpoint_singular(
    f_regular: ScalarFunction,
    a: float,
    b: float,
    p: float,
    at_b: bool = True,
    spec: QuadSpec = DEFAULT_SPEC,
    breakpoints: Iterable[float] = (),
) -> QuadResult:
    """
    Integrate f_regular(t)·(b-t)^{-p} (or ·(t-a)^{-p}) over [a, b]

    The substitution u = (b-t)^{1-p} turns the weight into the constant
    1/(1-p), leaving f_regular composed with a smooth map.

    Args:
        f_regular: Bounded, smooth factor (vectorized)
        a: Lower limit
        b: Upper limit
        p: Singularity exponent, 0 < p < 1
        at_b: Singularity at b (True) or at a (False)
        spec: Tolerances and budget
        breakpoints: Kinks of f_regular in the original variable

    Returns:
        QuadResult of the weighted integral
    """
    if not 0.0 < p < 1.0:
        raise DomainError(f"singularity exponent must satisfy 0 < p < 1, got {p}")
    if not a < b:
        raise DomainError(f"integration interval must satisfy a < b, got [{a}, {b}]")

    q = 1.0 - p
    power = 1.0 / q
    length = (b - a) ** q

    if at_b:
        def substituted(u):
            return f_regular(b - np.asarray(u) ** power) / q
        mapped = [(b - x) ** q for x in breakpoints if a < x < b]
    else:
        def substituted(u):
            return f_regular(a + np.asarray(u) ** power) / q
        mapped = [(x - a) ** q for x in breakpoints if a < x < b]

    return integrate_1d(substituted, 0.0, length, spec, mapped)


# ==========================================
# SPHERICAL RULES
# ==========================================


@dataclass(frozen=True, eq=False)
class SphereRule:
    """Nodes on the unit sphere S^{n-1} and their weights"""

    directions: np.ndarray
    weights: np.ndarray

    @property
    def size(self) -> int:
        return int(self.weights.size)


@lru_cache(maxsize=128)
def _base_rule(n: int, circle_points: int, polar_points: int, azimuth_points: int) -> SphereRule:
    if n == 1:
        directions = np.array([[1.0], [-1.0]])
        weights = np.ones(2)
    elif n == 2:
        # Half-step offset keeps nodes off the coordinate axes.
        angles = 2.0 * np.pi * (np.arange(circle_points) + 0.5) / circle_points
        directions = np.column_stack([np.cos(angles), np.sin(angles)])
        weights = np.full(circle_points, 2.0 * np.pi / circle_points)
    elif n == 3:
        cosines, polar_weights = np.polynomial.legendre.leggauss(polar_points)
        azimuths = 2.0 * np.pi * (np.arange(azimuth_points) + 0.5) / azimuth_points
        sines = np.sqrt(1.0 - cosines ** 2)
        directions = np.column_stack([
            np.outer(sines, np.cos(azimuths)).ravel(),
            np.outer(sines, np.sin(azimuths)).ravel(),
            np.repeat(cosines, azimuth_points),
        ])
        weights = np.repeat(polar_weights, azimuth_points) * (2.0 * np.pi / azimuth_points)
    else:
        raise UnsupportedDimensionError(f"sphere rules exist for n in {{1, 2, 3}}, got n={n}")

    directions.setflags(write=False)
    weights.setflags(write=False)
    return SphereRule(directions, weights)


def _householder_to(pole: np.ndarray) -> Optional[np.ndarray]:
    """Reflection mapping e_n onto the unit vector along pole (None if already aligned)"""
    norm = float(np.linalg.norm(pole))
    if norm == 0.0:
        return None
    target = pole / norm
    axis = np.zeros_like(target)
    axis[-1] = 1.0
    v = axis - target
    vv = float(np.dot(v, v))
    if vv < 1e-28:
        return None
    return np.eye(target.size) - 2.0 * np.outer(v, v) / vv


def sphere_rule(
    n: int,
    spec: QuadSpec = DEFAULT_SPEC,
    pole: Optional[Sequence[float]] = None,
    resolution: Optional[int] = None,
) -> SphereRule:
    """
    Quadrature rule on the unit sphere

    n=1: the two points ±1. n=2: uniform circle rule. n=3: Gauss-Legendre in
    the polar cosine times a uniform azimuth grid, optionally reflected so the
    polar axis points along `pole` (useful when the integrand peaks there).

    Args:
        n: Dimension (1, 2 or 3)
        spec: Supplies the default grid sizes
        pole: Optional direction for the polar axis (n=3 only)
        resolution: Overrides the circle size (n=2) or polar count (n=3)
    """
    circle = spec.circle_points
    polar = spec.polar_points
    if resolution is not None:
        if n == 2:
            circle = max(circle, int(resolution) + int(resolution) % 2)
        elif n == 3:
            polar = max(polar, int(resolution))

    rule = _base_rule(int(n), circle, polar, spec.azimuth_points)
    if n == 3 and pole is not None:
        reflection = _householder_to(np.asarray(pole, dtype=float))
        if reflection is not None:
            return SphereRule(rule.directions @ reflection.T, rule.weights)
    return rule


def integrate_sphere(
    g: PointFunction,
    n: int,
    spec: QuadSpec = DEFAULT_SPEC,
    pole: Optional[Sequence[float]] = None,
    resolution: Optional[int] = None,
) -> float:
    """
    Integral of g over the unit sphere S^{n-1}

    Args:
        g: Vectorized function of an (m, n) array of unit vectors
        n: Dimension (1, 2 or 3)

    Returns:
        Approximation of ∫ g dσ
    """
    rule = sphere_rule(n, spec, pole, resolution)
    values = _as_values(g(rule.directions), (rule.size,))
    return float(np.dot(rule.weights, values))


def evaluate_points(F: PointFunction, points: np.ndarray) -> np.ndarray:
    """Evaluate a point function and coerce the result to a flat float array"""
    return _as_values(F(points), (points.shape[0],))


def shell_integrand(
    F: PointFunction,
    center: Sequence[float],
    spec: QuadSpec = DEFAULT_SPEC,
    pole: Optional[Sequence[float]] = None,
    resolution: Optional[int] = None,
) -> ScalarFunction:
    """
    Radial integrand ρ ↦ ρ^{n-1} ∫_{S^{n-1}} F(center + ρθ) dθ

    Integrating it over ρ gives the integral of F over the corresponding
    spherical shell around center.
    """
    center = np.atleast_1d(np.asarray(center, dtype=float))
    n = center.size
    rule = sphere_rule(n, spec, pole, resolution)

    def integrand(rho):
        rho = np.asarray(rho, dtype=float)
        flat = rho.reshape(-1)
        points = center + flat[:, None, None] * rule.directions[None, :, :]
        values = evaluate_points(F, points.reshape(-1, n)).reshape(flat.size, rule.size)
        return ((values @ rule.weights) * flat ** (n - 1)).reshape(rho.shape)

    return integrand


# ==========================================
# EXTERIOR-OF-BALL INTEGRALS
# ==========================================


def _power_law_tail(radial: ScalarFunction, start: float, decay_q: float) -> QuadResult:
    """
    Closed-form tail ∫_start^∞ A(ρ) dρ for A(ρ) ≈ ρ^{-1-q}(c0 + c1/ρ + c2/ρ²)

    The coefficients are fitted at start, 2·start and 4·start; the error is
    the change from dropping the last term.
    """
    radii = start * np.array([1.0, 2.0, 4.0])
    samples = radial(radii) * radii ** (1.0 + decay_q)
    x = start / radii

    three = np.linalg.solve(np.vander(x, 3, increasing=True), samples)
    two = np.linalg.solve(np.vander(x[1:], 2, increasing=True), samples[1:])

    scale = start ** (-decay_q)
    tail3 = scale * sum(c / (decay_q + k) for k, c in enumerate(three))
    tail2 = scale * sum(c / (decay_q + k) for k, c in enumerate(two))
    return QuadResult(float(tail3), float(abs(tail3 - tail2)), evaluations=3)


def _tail_bound(F: PointFunction, center: np.ndarray, start: float, decay_q: float,
                spec: QuadSpec, pole, resolution) -> QuadResult:
    """Analytic bound K·σ·start^{-q}/q with K sampled on three spheres"""
    n = center.size
    rule = sphere_rule(n, spec, pole, resolution)
    k_max = 0.0
    for radius in start * np.array([1.0, 2.0, 4.0]):
        values = np.abs(evaluate_points(F, center + radius * rule.directions))
        k_max = max(k_max, float(values.max()) * radius ** (n + decay_q))
    bound = k_max * sphere_area(n) * start ** (-decay_q) / decay_q
    return QuadResult(0.0, bound, evaluations=3 * rule.size)


def integrate_exterior_ball(
    F: PointFunction,
    center: Sequence[float],
    r: float,
    decay_q: float,
    spec: QuadSpec = DEFAULT_SPEC,
    *,
    tail: TailModel = TailModel.BOUND,
    breakpoints: Iterable[float] = (),
    pole: Optional[Sequence[float]] = None,
    resolution: Optional[int] = None,
) -> QuadResult:
    """
    Integral of F over {|y - center| > r}

    Quadrature runs in log-radius up to tail_radius_factor·r. Beyond that F is
    assumed to satisfy |F(y)| <= K|y - center|^{-n-q}: with TailModel.BOUND
    the analytic bound is added to error_estimate only, with
    TailModel.POWER_LAW a fitted closed-form tail is added to the value.

    Args:
        F: Vectorized point function
        center: Ball center
        r: Ball radius
        decay_q: Excess decay exponent q > 0
        spec: Tolerances, budget and tail_radius_factor
        tail: Tail treatment
        breakpoints: Radii (distance from center) where F is not smooth
        pole: Polar axis for the n=3 sphere rule
        resolution: Sphere-rule refinement

    Returns:
        QuadResult
    """
    if decay_q <= 0:
        raise DomainError(f"exterior integral needs decay_q > 0, got {decay_q}")
    if r <= 0:
        raise DomainError(f"ball radius must be positive, got {r}")

    center = np.atleast_1d(np.asarray(center, dtype=float))
    radial = shell_integrand(F, center, spec, pole, resolution)
    factor = spec.tail_radius_factor
    start = factor * r

    def log_integrand(t):
        rho = r * np.exp(np.asarray(t, dtype=float))
        return rho * radial(rho)

    log_breaks = [math.log(b / r) for b in breakpoints if r < b < start]
    body = integrate_1d(log_integrand, 0.0, math.log(factor), spec, log_breaks)

    if TailModel(tail) is TailModel.POWER_LAW:
        return body + _power_law_tail(radial, start, decay_q)
    return body + _tail_bound(F, center, start, decay_q, spec, pole, resolution)


def radial_breaks(x: np.ndarray, spheres: Iterable[tuple]) -> list:
    """
    Distances from x at which a radial integral crosses the given spheres

    Args:
        x: Integration center
        spheres: (center, radius) pairs; radius 0 marks a point singularity

    Returns:
        Sorted list of positive radii
    """
    breaks = set()
    for center, radius in spheres:
        d = float(np.linalg.norm(np.asarray(x, dtype=float) - np.asarray(center, dtype=float)))
        for value in (abs(radius - d), radius + d):
            if value > 0:
                breaks.add(value)
    return sorted(breaks)
