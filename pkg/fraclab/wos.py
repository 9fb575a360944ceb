"""
Walk-on-spheres solver for (-Δ)^s u = 0 in Ω with u = g outside Ω.

Each step jumps from the center of the largest ball inside Ω according to the
Poisson kernel of that ball at its center. In the radius ratio ρ = |y-x|/r
that law has density (2 sin(πs)/π)(ρ²-1)^{-s}/ρ on (1, ∞), whose CDF is the
regularized incomplete beta function I_{1-1/ρ²}(1-s, s).
"""

import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Any, Dict, Optional, Sequence

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.special import betainc

from fraclab.config import parallel_map
from fraclab.constants import FracParams, poisson_constant, sphere_area
from fraclab.errors import ConstructionError, DomainError, PreconditionError
from fraclab.fields import ScalarField
from fraclab.geometry import Domain
from fraclab.quadrature import (DEFAULT_SPEC, QuadSpec, integrate_1d,
                                integrate_endpoint_singular)

logger = logging.getLogger(__name__)

DEFAULT_TABLE_SIZE = 1024
MIN_TABLE_SIZE = 256
TABLE_START = 1e-10    # smallest ρ - 1 in the table
TABLE_END = 1e6        # largest ρ - 1 in the table
MASS_TOLERANCE = 1e-8

DEFAULT_MAX_STEPS = 10_000
TRUNCATION_LIMIT = 0.01
CHUNK_SIZE = 1024

# ==========================================
# EXIT LAW
# ==========================================


def exit_density(p: FracParams, rho: np.ndarray) -> np.ndarray:
    """Density of ρ = |y|/r under P_r(0, ·)"""
    rho = np.asarray(rho, dtype=float)
    return sphere_area(p.n) * poisson_constant(p) * (rho * rho - 1.0) ** (-p.s) / rho


def exit_cdf(p: FracParams, rho: float) -> float:
    """P(ρ <= rho) = I_{1-1/ρ²}(1-s, s); 0 for rho <= 1"""
    if rho <= 1.0:
        return 0.0
    return float(betainc(1.0 - p.s, p.s, 1.0 - 1.0 / (rho * rho)))


@dataclass(frozen=True, eq=False)
class ExitSampler:
    """
    Inverse-CDF table of the centered exit law

    quantiles and radius_ratios are strictly increasing, starting at (0, 1).
    Beyond the last quantile the tail 1 - F(ρ) ≈ c·ρ^{-2s} is inverted
    analytically.
    """

    params: FracParams
    quantiles: np.ndarray
    radius_ratios: np.ndarray
    table_size: int
    tail_constant: float
    total_mass: float

    def __post_init__(self):
        object.__setattr__(self, '_inverse',
                           PchipInterpolator(self.quantiles, np.log(self.radius_ratios)))

    @property
    def max_quantile(self) -> float:
        return float(self.quantiles[-1])

    def radius_ratio(self, q: np.ndarray) -> np.ndarray:
        """ρ for uniform draws q in [0, 1)"""
        q = np.asarray(q, dtype=float)
        out = np.empty_like(q)
        body = q <= self.max_quantile
        out[body] = np.exp(self._inverse(q[body]))
        tail = ~body
        if np.any(tail):
            out[tail] = (self.tail_constant / (1.0 - q[tail])) ** (1.0 / (2.0 * self.params.s))
        return out


def build_exit_sampler(
    p: FracParams,
    table_size: int = DEFAULT_TABLE_SIZE,
    spec: QuadSpec = DEFAULT_SPEC,
) -> ExitSampler:
    """
    Tabulate the CDF of ρ by cumulative quadrature

    The first cell carries the (ρ-1)^{-s} singularity and uses the
    endpoint-singular rule; the mass beyond the table is integrated in
    v = 1/ρ², where it becomes ∫ v^{s-1}(1-v)^{-s} dv.

    Raises ConstructionError if the total mass misses 1 by more than 1e-8.
    """
    if table_size < MIN_TABLE_SIZE:
        raise DomainError(f"table_size must be at least {MIN_TABLE_SIZE}, got {table_size}")

    s = p.s
    scale = sphere_area(p.n) * poisson_constant(p)
    rho = 1.0 + np.geomspace(TABLE_START, TABLE_END, table_size)

    first = integrate_endpoint_singular(
        lambda t: scale * (t + 1.0) ** (-s) / t, 1.0, rho[0], s, at_b=False, spec=spec)
    cells = [first]
    for lo, hi in zip(rho[:-1], rho[1:]):
        cells.append(integrate_1d(lambda t: exit_density(p, t), lo, hi, spec))

    v_max = 1.0 / (rho[-1] * rho[-1])
    tail = integrate_endpoint_singular(
        lambda v: 0.5 * scale * (1.0 - v) ** (-s), 0.0, v_max, 1.0 - s, at_b=False, spec=spec)

    if not all(c.converged for c in cells) or not tail.converged:
        raise ConstructionError("exit-law quadrature did not converge")

    masses = np.array([c.value for c in cells])
    cumulative = np.cumsum(masses)
    total = math.fsum(masses) + tail.value
    if abs(total - 1.0) > MASS_TOLERANCE:
        raise ConstructionError(f"exit-law mass is {total!r}, expected 1 ± {MASS_TOLERANCE}")

    quantiles = np.concatenate([[0.0], cumulative / total])
    ratios = np.concatenate([[1.0], rho])
    if np.any(np.diff(quantiles) <= 0):
        raise ConstructionError("exit-law table is not strictly increasing")

    tail_constant = (1.0 - quantiles[-1]) * ratios[-1] ** (2.0 * s)
    logger.debug("exit sampler for n=%d, s=%g: %d rows, mass %.15g", p.n, s, table_size, total)
    return ExitSampler(p, quantiles, ratios, table_size, float(tail_constant), float(total))


@lru_cache(maxsize=16)
def shared_exit_sampler(p: FracParams, table_size: int = DEFAULT_TABLE_SIZE) -> ExitSampler:
    return build_exit_sampler(p, table_size)


def _directions(rng: np.random.Generator, count: int, n: int) -> np.ndarray:
    if n == 1:
        return np.where(rng.random((count, 1)) < 0.5, -1.0, 1.0)
    normal = rng.standard_normal((count, n))
    return normal / np.linalg.norm(normal, axis=1, keepdims=True)


def sample_exit(sampler: ExitSampler, center: Sequence[float], r: float,
                rng: np.random.Generator) -> np.ndarray:
    """One exit point of B(center, r) under the centered Poisson kernel"""
    if not r > 0:
        raise DomainError(f"ball radius must be positive, got {r}")
    center = np.asarray(center, dtype=float).reshape(-1)
    ratio = sampler.radius_ratio(np.array([rng.random()]))[0]
    return center + r * ratio * _directions(rng, 1, center.size)[0]


def sample_exit_batch(sampler: ExitSampler, centers: np.ndarray, radii: np.ndarray,
                      rng: np.random.Generator) -> np.ndarray:
    """Exit points for many balls at once (rows of centers)"""
    centers = np.atleast_2d(np.asarray(centers, dtype=float))
    radii = np.broadcast_to(np.asarray(radii, dtype=float), (centers.shape[0],))
    ratios = sampler.radius_ratio(rng.random(centers.shape[0]))
    return centers + (radii * ratios)[:, None] * _directions(rng, centers.shape[0], centers.shape[1])


def sample_stream(seed: int, index: int) -> np.random.Generator:
    """Counter-based stream for sample `index` of a run seeded with `seed`"""
    key = np.array([int(seed) & 0xFFFFFFFFFFFFFFFF, int(index)], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


# ==========================================
# SOLVER
# ==========================================


@dataclass
class WalkResult:
    estimate: float
    std_error: float
    samples: int
    mean_steps: float
    max_steps_hit: int
    flagged: bool = False
    seed: Optional[int] = None

    def to_dict(self) -> Dict[str, Any]:
        return dict(self.__dict__)


def _walk(sampler, omega, g, x0, max_steps, rng):
    x = x0.copy()
    for step in range(1, max_steps + 1):
        y = sample_exit(sampler, x, omega.dist_to_complement(x), rng)
        if not omega.contains(y):
            return float(g(y)), step, False
        x = y
    return float(g(omega.nearest_exterior_point(x))), max_steps, True


def wos_solve(
    p: FracParams,
    omega: Domain,
    g: ScalarField,
    x0: Sequence[float],
    n_samples: int,
    max_steps: int = DEFAULT_MAX_STEPS,
    seed: int = 0,
    spec: QuadSpec = DEFAULT_SPEC,
    threads: int = 1,
    sampler: Optional[ExitSampler] = None,
) -> WalkResult:
    """
    Monte Carlo estimate of the s-harmonic function with exterior data g at x0

    Args:
        p: Parameters
        omega: Domain containing x0
        g: Bounded exterior data
        x0: Starting point
        n_samples: Number of walks
        max_steps: Steps before a walk is stopped and scored at the nearest
            exterior point
        seed: Run seed; sample i uses the stream (seed, i)
        spec: Quadrature settings for the exit table
        threads: Worker cap; results do not depend on it
        sampler: Prebuilt exit sampler

    Returns:
        WalkResult, flagged when more than 1% of walks hit max_steps
    """
    x0 = np.asarray(x0, dtype=float).reshape(p.n)
    if omega.n != p.n:
        raise DomainError(f"domain dimension {omega.n} does not match n={p.n}")
    if not omega.contains(x0):
        raise DomainError(f"x0 = {x0.tolist()} is not inside {omega}")
    if g.bound is None:
        raise PreconditionError(f"walk-on-spheres needs bounded data; {g.name!r} has no bound")
    if n_samples < 1 or max_steps < 1:
        raise DomainError("n_samples and max_steps must be positive")

    if sampler is None:
        sampler = build_exit_sampler(p, spec=spec) if spec is not DEFAULT_SPEC else shared_exit_sampler(p)

    def run_chunk(start):
        stop = min(start + CHUNK_SIZE, n_samples)
        scores = np.empty(stop - start)
        steps = np.empty(stop - start, dtype=np.int64)
        hits = 0
        for k, i in enumerate(range(start, stop)):
            scores[k], steps[k], truncated = _walk(sampler, omega, g, x0, max_steps,
                                                   sample_stream(seed, i))
            hits += truncated
        return scores, steps, hits

    chunks = parallel_map(run_chunk, range(0, n_samples, CHUNK_SIZE), threads)
    scores = np.concatenate([c[0] for c in chunks])
    steps = np.concatenate([c[1] for c in chunks])
    hits = sum(c[2] for c in chunks)

    std_error = float(scores.std(ddof=1) / math.sqrt(n_samples)) if n_samples > 1 else 0.0
    result = WalkResult(
        estimate=float(scores.mean()),
        std_error=std_error,
        samples=n_samples,
        mean_steps=float(steps.mean()),
        max_steps_hit=int(hits),
        flagged=hits > TRUNCATION_LIMIT * n_samples,
        seed=seed,
    )
    if result.flagged:
        logger.warning("⚠️ %d of %d walks hit max_steps=%d", hits, n_samples, max_steps)
    logger.info("walk-on-spheres at %s: %.6g ± %.2g (%d samples, %.2f steps)",
                x0.tolist(), result.estimate, std_error, n_samples, result.mean_steps)
    return result
