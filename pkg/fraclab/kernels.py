"""
Explicit kernels: the ball Poisson kernel P_r, the regularized kernel Ψ with
its rescaling Ψ_{r0} and derivatives, and the Riesz kernel.
"""

import itertools
import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Dict, Sequence, Tuple, Union

import numpy as np
from scipy.interpolate import make_interp_spline
from scipy.special import roots_jacobi

from fraclab.constants import FracParams, poisson_constant
from fraclab.errors import (BoundarySingularityError, DomainError,
                            PreconditionError, SingularityError)
from fraclab.quadrature import (DEFAULT_SPEC, QuadSpec, integrate_1d,
                                integrate_endpoint_singular)

logger = logging.getLogger(__name__)

ArrayLike = Union[float, Sequence[float], np.ndarray]

# Ψ profile representations: lookup table below SERIES_SWITCH, series above.
# The table covers (1, TABLE_MAX] so stencils around the switch stay inside it.
TABLE_MAX = 9.0
SERIES_SWITCH = 8.5
SERIES_TERMS = 48
DEFAULT_TABLE_POINTS = 4000

# Finite-difference step relative to r0, widened linearly far out
FD_STEP = 0.05
MAX_DERIVATIVE_ORDER = 4

# ==========================================
# GEOMETRY TYPES
# ==========================================


@dataclass(frozen=True)
class Ball:
    """Open ball B(center, radius)"""

    center: Tuple[float, ...]
    radius: float

    def __post_init__(self):
        object.__setattr__(self, 'center', tuple(float(c) for c in np.atleast_1d(self.center)))
        if not self.radius > 0:
            raise DomainError(f"ball radius must be positive, got {self.radius}")

    @classmethod
    def unit(cls, n: int) -> 'Ball':
        return cls((0.0,) * n, 1.0)

    @property
    def n(self) -> int:
        return len(self.center)

    @property
    def point(self) -> np.ndarray:
        return np.array(self.center)

    def offset(self, x: ArrayLike) -> np.ndarray:
        """x - center (vectorized over rows)"""
        return np.asarray(x, dtype=float) - self.point

    def contains(self, x: ArrayLike) -> np.ndarray:
        return np.linalg.norm(np.atleast_2d(self.offset(x)), axis=-1) < self.radius

    def dist_to_complement(self, x: ArrayLike) -> np.ndarray:
        return self.radius - np.linalg.norm(np.atleast_2d(self.offset(x)), axis=-1)

    def to_dict(self) -> Dict:
        return {'center': list(self.center), 'radius': self.radius}


@dataclass(frozen=True)
class MultiIndex:
    """Derivative multi-index γ"""

    entries: Tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, 'entries', tuple(int(e) for e in self.entries))
        if any(e < 0 for e in self.entries):
            raise DomainError(f"multi-index entries must be nonnegative, got {self.entries}")

    @property
    def order(self) -> int:
        return sum(self.entries)

    @property
    def n(self) -> int:
        return len(self.entries)

    @classmethod
    def parse(cls, text: str) -> 'MultiIndex':
        """'1,0' -> MultiIndex((1, 0))"""
        try:
            return cls(tuple(int(part) for part in text.replace(' ', '').split(',') if part))
        except ValueError:
            raise DomainError(f"cannot parse multi-index {text!r}")

    @classmethod
    def zero(cls, n: int) -> 'MultiIndex':
        return cls((0,) * n)

    @classmethod
    def unit(cls, n: int, i: int, k: int = 1) -> 'MultiIndex':
        entries = [0] * n
        entries[i] = k
        return cls(tuple(entries))

    def __str__(self) -> str:
        return ','.join(str(e) for e in self.entries)


# ==========================================
# POISSON KERNEL
# ==========================================


def poisson_kernel_values(p: FracParams, r: float, x: ArrayLike, y: np.ndarray) -> np.ndarray:
    """
    P_r(x, y) for one x and many y (rows of y), ball centered at the origin

    Raises BoundarySingularityError if any |y| equals r exactly.
    """
    x = np.asarray(x, dtype=float).reshape(p.n)
    y = np.asarray(y, dtype=float).reshape(-1, p.n)
    x_sq = float(np.dot(x, x))
    y_sq = np.einsum('ij,ij->i', y, y)

    if np.any(y_sq == r * r):
        raise BoundarySingularityError(f"Poisson kernel is singular on |y| = r = {r}")

    out = np.zeros(y.shape[0])
    if x_sq >= r * r:
        return out
    outside = y_sq > r * r
    if np.any(outside):
        distance = np.linalg.norm(y[outside] - x, axis=1)
        out[outside] = (poisson_constant(p) * (r * r - x_sq) ** p.s
                        * (y_sq[outside] - r * r) ** (-p.s) * distance ** (-p.n))
    return out


def poisson_kernel(p: FracParams, r: float, x: ArrayLike, y: ArrayLike) -> float:
    """
    Poisson kernel of B(0, r) for (-Δ)^s

    β_{N,s}(r²-|x|²)^s (|y|²-r²)^{-s} |y-x|^{-N} when |x| < r < |y|, zero
    otherwise. |y| = r exactly raises BoundarySingularityError.
    """
    if not r > 0:
        raise DomainError(f"ball radius must be positive, got {r}")
    return float(poisson_kernel_values(p, r, x, np.asarray(y, dtype=float).reshape(1, p.n))[0])


# ==========================================
# MOLLIFIER
# ==========================================


def _raw_bump(r: np.ndarray) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    inside = (r > 1.0) & (r < 4.0)
    product = np.where(inside, (r - 1.0) * (4.0 - r), 1.0)
    return np.where(inside, np.exp(-1.0 / product), 0.0)


@lru_cache(maxsize=1)
def _bump_mass() -> float:
    tight = QuadSpec(rel_tol=1e-13, abs_tol=1e-300)
    return integrate_1d(_raw_bump, 1.0, 4.0, tight).value


def mollifier_phi(r: ArrayLike) -> Union[float, np.ndarray]:
    """
    Normalized bump φ(r) = Z⁻¹ exp(-1/((r-1)(4-r))) on (1, 4), zero elsewhere

    ∫₁⁴ φ = 1; vectorized.
    """
    values = _raw_bump(r) / _bump_mass()
    return float(values) if np.ndim(values) == 0 else values


@lru_cache(maxsize=256)
def mollifier_moment(j: float) -> float:
    """m_j = ∫₁⁴ r^j φ(r) dr"""
    tight = QuadSpec(rel_tol=1e-13, abs_tol=1e-300)
    return integrate_1d(lambda r: r ** j * mollifier_phi(r), 1.0, 4.0, tight).value


# ==========================================
# REGULARIZED KERNEL Ψ
# ==========================================


def _radial_weight(s: float, t: np.ndarray, r: np.ndarray) -> np.ndarray:
    """r^{2s}(t²-r²)^{-s}φ(r) for r < t"""
    return r ** (2.0 * s) * (t * t - r * r) ** (-s) * mollifier_phi(r)


def radial_integral_exact(s: float, t: float, spec: QuadSpec = DEFAULT_SPEC) -> float:
    """
    I_s(t) = ∫_1^{min(4,t)} r^{2s}(t²-r²)^{-s} φ(r) dr by adaptive quadrature

    For 1 < t <= 4 the (t-r)^{-s} endpoint singularity is removed by
    substitution; beyond 4 the integrand is regular.
    """
    if t <= 1.0:
        return 0.0
    if t <= 4.0:
        def regular(r):
            return r ** (2.0 * s) * (t + r) ** (-s) * mollifier_phi(r)
        return integrate_endpoint_singular(regular, 1.0, t, s, at_b=True, spec=spec).value
    return integrate_1d(lambda r: _radial_weight(s, t, r), 1.0, 4.0, spec).value


def _radial_integral_batch(s: float, t: np.ndarray, panels: int = 24, levels: int = 12,
                           order: int = 16) -> np.ndarray:
    """
    I_s(t) for many t > 1 with fixed composite rules

    Uniform Gauss-Legendre panels on [1, b-w], panels graded geometrically
    toward b = min(t, 4), and a Gauss-Jacobi panel carrying (t-r)^{-s} at the
    end when t <= 4.
    """
    t = np.asarray(t, dtype=float)
    b = np.minimum(t, 4.0)
    w = np.minimum(0.5 * (b - 1.0), 0.5)
    nodes, weights = np.polynomial.legendre.leggauss(order)

    def gauss_panel(lo, hi):
        half = 0.5 * (hi - lo)
        r = (0.5 * (lo + hi))[:, None] + half[:, None] * nodes[None, :]
        return half * (_radial_weight(s, t[:, None], r) @ weights)

    total = np.zeros_like(t)
    edges = np.linspace(0.0, 1.0, panels + 1)
    span = b - w - 1.0
    for k in range(panels):
        total += gauss_panel(1.0 + span * edges[k], 1.0 + span * edges[k + 1])
    for level in range(levels):
        total += gauss_panel(b - w / 2.0 ** level, b - w / 2.0 ** (level + 1))

    lo = b - w / 2.0 ** levels
    singular = t <= 4.0
    if np.any(~singular):
        regular = ~singular
        half = 0.5 * (b[regular] - lo[regular])
        r = (0.5 * (lo[regular] + b[regular]))[:, None] + half[:, None] * nodes[None, :]
        total[regular] += half * (_radial_weight(s, t[regular][:, None], r) @ weights)
    if np.any(singular):
        jx, jw = roots_jacobi(2 * order, -s, 0.0)
        ts, los = t[singular], lo[singular]
        half = 0.5 * (ts - los)
        r = los[:, None] + half[:, None] * (jx[None, :] + 1.0)
        regular_part = r ** (2.0 * s) * (ts[:, None] + r) ** (-s) * mollifier_phi(r)
        total[singular] += half ** (1.0 - s) * (regular_part @ jw)
    return total


@lru_cache(maxsize=32)
def _profile_table(s: float, points: int):
    """Quintic spline of I_s on [1, TABLE_MAX]; I_s and its derivatives vanish at 1"""
    grid = 1.0 + (TABLE_MAX - 1.0) * np.arange(1, points + 1) / points
    values = _radial_integral_batch(s, grid)
    knots = np.concatenate([[1.0], grid])
    logger.debug("built Ψ profile table for s=%g with %d points", s, points)
    return make_interp_spline(knots, np.concatenate([[0.0], values]), k=5)


@lru_cache(maxsize=32)
def _series_coefficients(s: float, terms: int) -> np.ndarray:
    """(s)_k/k! · m_{2s+2k} for k < terms"""
    coefficients = np.empty(terms)
    pochhammer = 1.0
    for k in range(terms):
        coefficients[k] = pochhammer * mollifier_moment(2.0 * s + 2.0 * k)
        pochhammer *= (s + k) / (k + 1.0)
    return coefficients


class RegularizedKernel:
    """
    Radial profile of Ψ for one (n, s)

    Ψ(y) = β_{N,s}|y|^{-n} I_s(|y|). The exact path runs adaptive quadrature
    per point; the fast path uses a lookup table on (1, 9] and the series
    β Σ_k (s)_k/k! m_{2s+2k} |y|^{-n-2s-2k} from 8.5 on.
    """

    def __init__(self, p: FracParams, table_points: int = DEFAULT_TABLE_POINTS):
        self.p = p
        self.beta = poisson_constant(p)
        self.table_points = table_points

    @property
    def asymptotic_constant(self) -> float:
        """lim |y|^{n+2s}Ψ(y) = β m_{2s}"""
        return self.beta * mollifier_moment(2.0 * self.p.s)

    def exact(self, t: float, spec: QuadSpec = DEFAULT_SPEC) -> float:
        if t <= 1.0:
            return 0.0
        return self.beta * t ** (-self.p.n) * radial_integral_exact(self.p.s, t, spec)

    def _series(self, t: np.ndarray) -> np.ndarray:
        coefficients = _series_coefficients(self.p.s, SERIES_TERMS)
        inverse_sq = 1.0 / (t * t)
        # Horner in 1/t²
        acc = np.zeros_like(t)
        for c in coefficients[::-1]:
            acc = acc * inverse_sq + c
        return self.beta * t ** (-self.p.n - 2.0 * self.p.s) * acc

    def _table(self, t: np.ndarray) -> np.ndarray:
        spline = _profile_table(self.p.s, self.table_points)
        return self.beta * t ** (-self.p.n) * spline(t)

    def profile(self, t: ArrayLike, use_series=None) -> np.ndarray:
        """
        Ψ as a function of the radius t = |y| (vectorized)

        Args:
            t: Radii
            use_series: Boolean mask (or scalar) forcing the series (True) or
                table (False); by default the series is used for t >= 8.5
        """
        t = np.asarray(t, dtype=float)
        out = np.zeros_like(t)
        if use_series is None:
            series = t >= SERIES_SWITCH
        else:
            series = np.broadcast_to(np.asarray(use_series, dtype=bool), t.shape)
        series = series | (t > TABLE_MAX)
        active = t > 1.0

        table_mask = active & ~series
        if np.any(table_mask):
            out[table_mask] = self._table(t[table_mask])
        series_mask = active & series
        if np.any(series_mask):
            out[series_mask] = self._series(t[series_mask])
        return out

    def values(self, y: np.ndarray, r0: float = 1.0, use_series=None) -> np.ndarray:
        """Ψ_{r0}(y) = r0^{-n}Ψ(y/r0) for the rows of y"""
        y = np.asarray(y, dtype=float).reshape(-1, self.p.n)
        t = np.linalg.norm(y, axis=1) / r0
        return r0 ** (-self.p.n) * self.profile(t, use_series)


@lru_cache(maxsize=32)
def regularized_kernel(p: FracParams) -> RegularizedKernel:
    return RegularizedKernel(p)


def psi(p: FracParams, y: ArrayLike, spec: QuadSpec = DEFAULT_SPEC) -> float:
    """
    Ψ(y) = |y|^{-n} ∫_{min(1,|y|)}^{min(4,|y|)} β r^{2s}(|y|²-r²)^{-s} φ(r) dr

    Exactly zero for |y| <= 1.
    """
    t = float(np.linalg.norm(np.asarray(y, dtype=float).reshape(p.n)))
    return regularized_kernel(p).exact(t, spec)


def psi_scaled(p: FracParams, r0: float, y: ArrayLike, spec: QuadSpec = DEFAULT_SPEC) -> float:
    """Ψ_{r0}(y) = r0^{-n} Ψ(y/r0); zero for |y| <= r0"""
    if not r0 > 0:
        raise DomainError(f"r0 must be positive, got {r0}")
    return r0 ** (-p.n) * psi(p, np.asarray(y, dtype=float) / r0, spec)


# ==========================================
# DERIVATIVES OF Ψ_{r0}
# ==========================================

# Central differences for k-th derivatives, O(h²): (offsets, coefficients)
_STENCILS = {
    0: ((0,), (1.0,)),
    1: ((-1, 1), (-0.5, 0.5)),
    2: ((-1, 0, 1), (1.0, -2.0, 1.0)),
    3: ((-2, -1, 1, 2), (-0.5, 1.0, -1.0, 0.5)),
    4: ((-2, -1, 0, 1, 2), (1.0, -4.0, 6.0, -4.0, 1.0)),
}


@lru_cache(maxsize=64)
def _tensor_stencil(entries: Tuple[int, ...]):
    """Offsets (K, n) and coefficients (K,) of the product stencil for γ"""
    per_axis = [_STENCILS[k] for k in entries]
    offsets, coefficients = [], []
    for combo in itertools.product(*[range(len(axis[0])) for axis in per_axis]):
        offsets.append([per_axis[i][0][j] for i, j in enumerate(combo)])
        coefficients.append(math.prod(per_axis[i][1][j] for i, j in enumerate(combo)))
    return np.array(offsets, dtype=float), np.array(coefficients)


def psi_derivative(
    p: FracParams,
    gamma: MultiIndex,
    r0: float,
    y: ArrayLike,
    return_flags: bool = False,
):
    """
    D^γ Ψ_{r0}(y) by central differences with two Richardson steps

    Differences at h, h/2, h/4 (h = 0.05·r0·max(1, |y|/(4r0))) are combined
    to O(h⁶). Points with |y| < r0 get exactly 0. Stencils reaching inside
    |y| < r0 from outside are marked reduced-accuracy.

    Args:
        p: Parameters
        gamma: Multi-index with |γ| <= 4
        r0: Scale
        y: One point (n,) or rows (m, n)
        return_flags: Also return the reduced-accuracy mask

    Returns:
        float for one point, array for many; with return_flags a pair
        (values, flags)
    """
    if gamma.n != p.n:
        raise DomainError(f"multi-index {gamma} does not match dimension n={p.n}")
    if gamma.order > MAX_DERIVATIVE_ORDER:
        raise PreconditionError(f"derivative order {gamma.order} exceeds {MAX_DERIVATIVE_ORDER}")
    if not r0 > 0:
        raise DomainError(f"r0 must be positive, got {r0}")

    single = np.ndim(y) == 0 or (np.ndim(y) == 1 and np.size(y) == p.n)
    points = np.asarray(y, dtype=float).reshape(-1, p.n)
    kernel = regularized_kernel(p)
    norms = np.linalg.norm(points, axis=1)
    values = np.zeros(points.shape[0])
    flags = np.zeros(points.shape[0], dtype=bool)

    active = norms >= r0
    if np.any(active):
        base = points[active]
        base_t = norms[active] / r0
        steps = FD_STEP * r0 * np.maximum(1.0, base_t / 4.0)
        use_series = base_t >= SERIES_SWITCH

        if gamma.order == 0:
            values[active] = kernel.values(base, r0, use_series)
        else:
            offsets, coefficients = _tensor_stencil(gamma.entries)
            reach = float(np.max(np.linalg.norm(offsets, axis=1)))

            def difference(h):
                shifted = base[:, None, :] + h[:, None, None] * offsets[None, :, :]
                samples = kernel.values(shifted.reshape(-1, p.n), r0,
                                        np.repeat(use_series, offsets.shape[0]))
                samples = samples.reshape(base.shape[0], offsets.shape[0])
                return (samples @ coefficients) / h ** gamma.order

            d1, d2, d3 = difference(steps), difference(steps / 2.0), difference(steps / 4.0)
            r12 = (4.0 * d2 - d1) / 3.0
            r23 = (4.0 * d3 - d2) / 3.0
            values[active] = (16.0 * r23 - r12) / 15.0
            flags[active] = norms[active] - reach * steps < r0

    if np.any(flags) and not return_flags:
        logger.warning("⚠️ %d derivative stencil(s) straddle |y| = r0; reduced accuracy",
                       int(flags.sum()))

    if single:
        return (float(values[0]), bool(flags[0])) if return_flags else float(values[0])
    return (values, flags) if return_flags else values


# ==========================================
# RIESZ KERNEL
# ==========================================


def riesz_kernel(p: FracParams, x: ArrayLike, y: ArrayLike) -> float:
    """|x-y|^{2s-n}, unnormalized; needs 2s < n and x != y"""
    p.require_riesz_regime()
    distance = float(np.linalg.norm(np.asarray(x, dtype=float) - np.asarray(y, dtype=float)))
    if distance == 0.0:
        raise SingularityError("Riesz kernel is singular at x = y")
    return distance ** (2.0 * p.s - p.n)
