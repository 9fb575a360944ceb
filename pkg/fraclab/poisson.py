"""
s-harmonic extension of exterior data into a ball through the Poisson kernel,
and the mean-value identity u = u⋆Ψ_{r0}.
"""

import logging
import math
from typing import Optional, Sequence

import numpy as np

from fraclab.cache import ResultCache, cache_key, values_fingerprint
from fraclab.config import parallel_map
from fraclab.constants import FracParams, poisson_constant
from fraclab.errors import DomainError, PreconditionError
from fraclab.fields import ScalarField
from fraclab.geometry import Domain
from fraclab.kernels import SERIES_SWITCH, TABLE_MAX, Ball, regularized_kernel
from fraclab.quadrature import (DEFAULT_SPEC, QuadResult, QuadSpec,
                                integrate_endpoint_singular,
                                integrate_exterior_ball, radial_breaks,
                                shell_integrand)

logger = logging.getLogger(__name__)

# Boundary layer [r, BOUNDARY_LAYER·r] uses the endpoint-singular rule
BOUNDARY_LAYER = 2.0

# Angular refinement kicks in beyond this |x-a|/r
REFINE_RATIO = 0.5
MAX_CIRCLE_POINTS = 8192
MAX_POLAR_POINTS = 1024

# Exterior samples behind the cache-key digest of the data
FINGERPRINT_POINTS = 8
FINGERPRINT_SEED = 20240

# ==========================================
# POISSON EXTENSION
# ==========================================


def angular_resolution(n: int, ratio: float, spec: QuadSpec = DEFAULT_SPEC) -> Optional[int]:
    """
    Sphere-rule size keeping the kernel's angular peak resolved

    The angular factor |y-x|^{-n} on the sphere |y-a| = r is analytic with a
    singularity at distance controlled by ratio = |x-a|/r: the periodic
    trapezoid rule (n=2) converges like ratio^M, Gauss-Legendre in the polar
    cosine (n=3, pole along x-a) like ρ_B^{-2N} with ρ_B the Bernstein
    ellipse parameter of the singular point.
    """
    if n == 1 or ratio <= REFINE_RATIO:
        return None
    target = max(min(spec.rel_tol, 1e-6) * 1e-3, 1e-15)
    if n == 2:
        points = math.ceil(math.log(target) / math.log(ratio))
        return min(max(points + points % 2, spec.circle_points), MAX_CIRCLE_POINTS)
    c0 = (1.0 + ratio * ratio) / (2.0 * ratio)
    rho_b = c0 + math.sqrt(c0 * c0 - 1.0)
    points = math.ceil(-math.log(target) / (2.0 * math.log(rho_b)))
    return min(max(points, spec.polar_points), MAX_POLAR_POINTS)


def poisson_extend(
    p: FracParams,
    ball: Ball,
    g: ScalarField,
    x: Sequence[float],
    spec: QuadSpec = DEFAULT_SPEC,
) -> QuadResult:
    """
    u(x) = ∫_{|y-a|>r} P_r(x-a, y-a) g(y) dy for x inside B(a, r)

    The (|y-a|-r)^{-s} boundary layer on [r, 2r] goes through the
    endpoint-singular rule, the rest through integrate_exterior_ball.

    Args:
        p: Parameters
        ball: B(a, r)
        g: Exterior data with an L1_s certificate
        x: Point strictly inside the ball
        spec: Quadrature settings

    Returns:
        QuadResult
    """
    if ball.n != p.n or g.n != p.n:
        raise DomainError("ball, data and parameters must share one dimension")
    g.require_certificate(p.s)

    n, s, r = p.n, p.s, ball.radius
    a = ball.point
    x = np.asarray(x, dtype=float).reshape(n)
    offset = x - a
    d = float(np.linalg.norm(offset))
    if not d < r:
        raise DomainError(f"x must lie strictly inside the ball (|x-a| = {d:g}, r = {r:g})")

    pole = offset if d > 0 else None
    resolution = angular_resolution(n, d / r, spec)

    def weighted(y):
        return g.evaluate(y) * np.linalg.norm(y - x, axis=1) ** (-n)

    radial = shell_integrand(weighted, a, spec, pole, resolution)
    breaks = radial_breaks(a, g.kinks)
    layer_end = BOUNDARY_LAYER * r

    layer = integrate_endpoint_singular(
        lambda rho: (rho + r) ** (-s) * radial(rho), r, layer_end, s, at_b=False, spec=spec,
        breakpoints=[b for b in breaks if r < b < layer_end])

    def exterior(y):
        rho_sq = np.einsum('ij,ij->i', y - a, y - a)
        return weighted(y) * (rho_sq - r * r) ** (-s)

    outer = integrate_exterior_ball(
        exterior, a, layer_end, g.decay_exponent(s), spec, tail=g.tail_model,
        breakpoints=[b for b in breaks if b > layer_end], pole=pole, resolution=resolution)

    result = (layer + outer).scaled(poisson_constant(p) * (r * r - d * d) ** s)
    logger.debug("Poisson extension of %s at %s: %.12g", g.name, x.tolist(), result.value)
    return result


def data_fingerprint(g: ScalarField, ball: Ball, count: int = FINGERPRINT_POINTS) -> dict:
    """
    Content digest of exterior data for cache keys

    Two fields that share a name but differ in values, kinks, bound or tail
    model get different digests. Values are sampled at fixed points outside
    the ball, at radii from 1.5r to 64r.
    """
    rng = np.random.default_rng(FINGERPRINT_SEED)
    directions = rng.standard_normal((count, g.n))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    radii = ball.radius * np.geomspace(1.5, 64.0, count)
    points = ball.point + directions * radii[:, None]
    return {
        'values': values_fingerprint(g.evaluate(points)),
        'kinks': [[[float(v) for v in c], float(r)] for c, r in g.kinks],
        'bound': g.bound,
        'tail_model': g.tail_model.value,
    }


def extension_field(
    p: FracParams,
    ball: Ball,
    g: ScalarField,
    spec: QuadSpec = DEFAULT_SPEC,
    cache: Optional[ResultCache] = None,
    threads: int = 1,
) -> ScalarField:
    """
    The s-harmonic extension as a field on all of R^n

    Equals g outside the open ball and the Poisson integral inside. Interior
    values are cached by point so repeated stencil and quadrature evaluations
    are computed once.
    """
    g.require_certificate(p.s)
    cache = cache if cache is not None else ResultCache(url='')
    center = ball.point
    prefix = (p.to_dict(), ball.to_dict(), g.name, data_fingerprint(g, ball), spec.to_dict())

    def interior_value(point):
        key = cache_key('poisson', prefix, point.tolist())
        cached = cache.get(key)
        if cached is not None:
            return cached
        value = poisson_extend(p, ball, g, point, spec).value
        cache.set(key, value)
        return value

    def evaluate(y):
        y = np.asarray(y, dtype=float).reshape(-1, p.n)
        out = np.empty(y.shape[0])
        inside = np.linalg.norm(y - center, axis=1) < ball.radius
        if np.any(~inside):
            out[~inside] = g.evaluate(y[~inside])
        if np.any(inside):
            out[inside] = parallel_map(interior_value, list(y[inside]), threads)
        return out

    return ScalarField(
        evaluate, p.n,
        l1s_certified=g.l1s_certified,
        growth_hint=g.growth_hint,
        name=f"ext[{g.name}]",
        kinks=((ball.center, ball.radius),) + tuple(g.kinks),
        tail_model=g.tail_model,
        bound=g.bound,
        noise=spec.rel_tol,
    )


# ==========================================
# MEAN-VALUE IDENTITY
# ==========================================


def convolve_psi(
    p: FracParams,
    u: ScalarField,
    r0: float,
    x: Sequence[float],
    spec: QuadSpec = DEFAULT_SPEC,
) -> QuadResult:
    """
    (u⋆Ψ_{r0})(x) = ∫_{|x-y| >= r0} u(y) Ψ_{r0}(x-y) dy

    Ψ_{r0} vanishes on B(0, r0), so only the exterior is integrated.
    """
    if not r0 > 0:
        raise DomainError(f"r0 must be positive, got {r0}")
    u.require_certificate(p.s)

    x = np.asarray(x, dtype=float).reshape(p.n)
    kernel = regularized_kernel(p)
    scale = max(abs(u(x)), u.bound or 0.0, 1e-300)
    local = spec.loosened(u.noise, scale)

    def integrand(y):
        return u.evaluate(y) * kernel.values(x - y, r0)

    # Ψ's profile is non-analytic at 4·r0 and switches representation at 8.5·r0
    profile_breaks = [4.0 * r0, SERIES_SWITCH * r0, TABLE_MAX * r0]
    breaks = sorted(set(profile_breaks + radial_breaks(x, u.kinks)))
    return integrate_exterior_ball(
        integrand, x, r0, u.decay_exponent(p.s), local, tail=u.tail_model,
        breakpoints=[b for b in breaks if b > r0])


def mean_value_residual(
    p: FracParams,
    u: ScalarField,
    omega: Domain,
    r0: float,
    x: Sequence[float],
    spec: QuadSpec = DEFAULT_SPEC,
) -> float:
    """
    |u(x) - (u⋆Ψ_{r0})(x)| for x in Ω_{4r0}

    Raises PreconditionError unless dist(x, R^n \\ Ω) > 4·r0.
    """
    margin = omega.dist_to_complement(x)
    if not margin > 4.0 * r0:
        raise PreconditionError(
            f"mean-value identity needs dist(x, complement) > 4·r0 = {4.0 * r0:g}, got {margin:g}")
    convolution = convolve_psi(p, u, r0, x, spec)
    residual = abs(u(np.asarray(x, dtype=float).reshape(p.n)) - convolution.value)
    logger.info("mean-value residual of %s at %s (r0=%g): %.3g", u.name, list(np.atleast_1d(x)), r0, residual)
    return residual
