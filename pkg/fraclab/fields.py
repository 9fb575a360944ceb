"""
Scalar fields on R^n: evaluation callbacks with the growth and smoothness
information the integrators need, plus the builtin fields, exterior data and
densities used by the command line.
"""

import logging
import math
from dataclasses import dataclass, replace
from typing import Callable, Dict, Iterable, Optional, Sequence, Tuple

import numpy as np

from fraclab.constants import FracParams, log_gamma
from fraclab.errors import CertificateError, DomainError
from fraclab.quadrature import TailModel

logger = logging.getLogger(__name__)

PointFunction = Callable[[np.ndarray], np.ndarray]

# (center, radius) of a sphere where the field is not smooth; radius 0 marks
# an isolated singular point.
Kink = Tuple[Tuple[float, ...], float]

# ==========================================
# TYPES
# ==========================================


@dataclass(frozen=True)
class GrowthHint:
    """|u(y)| <= K(1+|y|)^m for |y| >= 1; polynomial marks exact polynomials"""

    K: float
    m: float
    polynomial: bool = False


@dataclass(frozen=True, eq=False)
class ScalarField:
    """
    Real function on R^n given by a vectorized callback

    evaluate maps an (m, n) array of points to m values. l1s_certified asserts
    ∫|u|/(1+|y|^{n+2s}) < ∞ for every s; fields that only qualify for some s
    carry a growth_hint instead.
    """

    evaluate: PointFunction
    n: int
    l1s_certified: bool = True
    growth_hint: Optional[GrowthHint] = None
    name: str = 'field'
    kinks: Tuple[Kink, ...] = ()
    tail_model: TailModel = TailModel.BOUND
    bound: Optional[float] = None
    noise: float = 0.0

    def __call__(self, points) -> np.ndarray:
        """Values at one point (returns float) or at the rows of an array"""
        arr = np.asarray(points, dtype=float)
        single = arr.ndim == 0 or (arr.ndim == 1 and arr.size == self.n)
        values = np.asarray(self.evaluate(arr.reshape(-1, self.n)), dtype=float).reshape(-1)
        return float(values[0]) if single else values

    def certified_for(self, s: float) -> bool:
        if self.l1s_certified:
            return True
        return self.growth_hint is not None and self.growth_hint.m < 2.0 * s

    def require_certificate(self, s: float) -> None:
        if not self.certified_for(s):
            raise CertificateError(
                f"field {self.name!r} has no L1_s certificate for s={s}; refused")

    def decay_exponent(self, s: float) -> float:
        """q with |u(y)||y|^{-n-2s} <= K|y|^{-n-q} far out"""
        m = self.growth_hint.m if self.growth_hint is not None else 0.0
        return 2.0 * s - m

    def translate(self, h: Sequence[float]) -> 'ScalarField':
        """y ↦ u(y + h)"""
        shift = np.asarray(h, dtype=float).reshape(self.n)
        inner = self.evaluate
        kinks = tuple((tuple(np.asarray(c) - shift), r) for c, r in self.kinks)
        return replace(self, evaluate=lambda y: inner(y + shift),
                       name=f"{self.name}(.+h)", kinks=kinks)

    def rescale(self, factor: float) -> 'ScalarField':
        """y ↦ u(λy)"""
        if not factor > 0:
            raise DomainError(f"scale factor must be positive, got {factor}")
        inner = self.evaluate
        kinks = tuple((tuple(np.asarray(c) / factor), r / factor) for c, r in self.kinks)
        growth = self.growth_hint
        if growth is not None:
            growth = replace(growth, K=growth.K * max(1.0, factor) ** max(growth.m, 0.0))
        return replace(self, evaluate=lambda y: inner(factor * y),
                       name=f"{self.name}({factor:g}.)", kinks=kinks, growth_hint=growth)

    def scaled(self, a: float) -> 'ScalarField':
        return linear_combination([(a, self)])

    def __add__(self, other: 'ScalarField') -> 'ScalarField':
        return linear_combination([(1.0, self), (1.0, other)])

    def __sub__(self, other: 'ScalarField') -> 'ScalarField':
        return linear_combination([(1.0, self), (-1.0, other)])


class ExteriorData(ScalarField):
    """Datum g queried only outside a closed ball (same fields as ScalarField)"""


@dataclass(frozen=True, eq=False)
class CompactDensity:
    """Density f with f(y) = 0 for |y| > support_radius"""

    evaluate: PointFunction
    n: int
    support_radius: float
    name: str = 'density'
    radial: bool = False
    smooth: bool = True
    profile: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def __post_init__(self):
        if not self.support_radius > 0:
            raise DomainError("support_radius must be positive")
        if self.radial and self.profile is None:
            raise DomainError("radial densities need a radial profile")

    def __call__(self, points) -> np.ndarray:
        arr = np.asarray(points, dtype=float)
        single = arr.ndim == 0 or (arr.ndim == 1 and arr.size == self.n)
        values = np.asarray(self.evaluate(arr.reshape(-1, self.n)), dtype=float).reshape(-1)
        return float(values[0]) if single else values

    def as_field(self) -> ScalarField:
        return ScalarField(self.evaluate, self.n, name=self.name,
                           kinks=() if self.smooth else (((0.0,) * self.n, self.support_radius),))

    def translate(self, h: Sequence[float]) -> 'CompactDensity':
        """y ↦ f(y - h); the support ball stays centered by widening it"""
        shift = np.asarray(h, dtype=float).reshape(self.n)
        inner = self.evaluate
        return CompactDensity(lambda y: inner(y - shift), self.n,
                              self.support_radius + float(np.linalg.norm(shift)),
                              name=f"{self.name}(.-h)", smooth=self.smooth)

    def dilate(self, factor: float) -> 'CompactDensity':
        """y ↦ f(y/λ)"""
        inner, profile = self.evaluate, self.profile
        return CompactDensity(
            lambda y: inner(y / factor), self.n, self.support_radius * factor,
            name=f"{self.name}(./{factor:g})", radial=self.radial, smooth=self.smooth,
            profile=(lambda t: profile(np.asarray(t) / factor)) if profile is not None else None)

    def scaled(self, a: float) -> 'CompactDensity':
        inner, profile = self.evaluate, self.profile
        return replace(self, evaluate=lambda y: a * inner(y), name=f"{a:g}*{self.name}",
                       profile=(lambda t: a * profile(t)) if profile is not None else None)


# ==========================================
# FIELD ALGEBRA
# ==========================================


def linear_combination(terms: Iterable[Tuple[float, ScalarField]]) -> ScalarField:
    """Σ a_i u_i with merged kinks, growth and bounds"""
    terms = [(float(a), u) for a, u in terms]
    if not terms:
        raise DomainError("linear combination needs at least one term")
    n = terms[0][1].n
    if any(u.n != n for _, u in terms):
        raise DomainError("cannot combine fields of different dimensions")

    def evaluate(y):
        total = np.zeros(y.shape[0])
        for a, u in terms:
            total = total + a * np.asarray(u.evaluate(y), dtype=float).reshape(-1)
        return total

    hints = [u.growth_hint for _, u in terms]
    growth = None
    if any(h is not None for h in hints):
        m = max(h.m if h is not None else 0.0 for h in hints)
        K = sum(abs(a) * (h.K if h is not None else (u.bound or 1.0))
                for (a, u), h in zip(terms, hints))
        growth = GrowthHint(K, m, all(h is not None and h.polynomial for h in hints))

    bounds = [u.bound for _, u in terms]
    bound = sum(abs(a) * b for (a, _), b in zip(terms, bounds)) if None not in bounds else None
    kinks = tuple(dict.fromkeys(k for _, u in terms for k in u.kinks))
    tails = {u.tail_model for _, u in terms}
    tail = TailModel.POWER_LAW if tails == {TailModel.POWER_LAW} else TailModel.BOUND

    return ScalarField(
        evaluate, n,
        l1s_certified=all(u.l1s_certified for _, u in terms),
        growth_hint=growth,
        name=' + '.join(f"{a:g}*{u.name}" for a, u in terms),
        kinks=kinks,
        tail_model=tail,
        bound=bound,
        noise=max(u.noise for _, u in terms),
    )


def _norm(y: np.ndarray) -> np.ndarray:
    return np.sqrt(np.einsum('ij,ij->i', y, y))


# ==========================================
# BUILTIN FIELDS
# ==========================================

AFFINE_SLOPE = (1.0, -0.5, 0.25)
AFFINE_OFFSET = 0.5


def affine_field(n: int, slope: Optional[Sequence[float]] = None, offset: float = AFFINE_OFFSET) -> ScalarField:
    a = np.asarray(slope if slope is not None else AFFINE_SLOPE[:n], dtype=float).reshape(n)
    return ScalarField(lambda y: y @ a + offset, n, l1s_certified=False,
                       growth_hint=GrowthHint(float(np.abs(a).sum() + abs(offset)), 1.0, True),
                       name='affine', tail_model=TailModel.POWER_LAW)


def cosine_field(n: int) -> ScalarField:
    """cos(y_1); (-Δ)^s of it is cos(x_1) for every s"""
    return ScalarField(lambda y: np.cos(y[:, 0]), n, name='cosine', bound=1.0)


def bump2s_field(p: FracParams) -> ScalarField:
    """(1-|y|²)₊^s"""
    s = p.s

    def evaluate(y):
        return np.maximum(1.0 - np.einsum('ij,ij->i', y, y), 0.0) ** s

    return ScalarField(evaluate, p.n, name='bump2s', kinks=(((0.0,) * p.n, 1.0),), bound=1.0,
                       tail_model=TailModel.POWER_LAW)


def bump2s_oracle(p: FracParams) -> float:
    """(-Δ)^s(1-|y|²)₊^s inside the unit ball: 4^s Γ(1+s) Γ(n/2+s) / Γ(n/2)"""
    n, s = p.n, p.s
    return 4.0 ** s * math.exp(log_gamma(1.0 + s) + log_gamma(n / 2.0 + s) - log_gamma(n / 2.0))


def riesz_kernel_field(p: FracParams) -> ScalarField:
    """|y|^{2s-n}, singular at the origin"""
    p.require_riesz_regime()
    exponent = 2.0 * p.s - p.n
    return ScalarField(lambda y: _norm(y) ** exponent, p.n, l1s_certified=True,
                       growth_hint=GrowthHint(2.0 ** abs(exponent), exponent),
                       name='riesz-kernel', kinks=(((0.0,) * p.n, 0.0),),
                       tail_model=TailModel.POWER_LAW)


def quadratic_field(n: int) -> ScalarField:
    """|y|², never in L1_s for s < 1"""
    return ScalarField(lambda y: np.einsum('ij,ij->i', y, y), n, l1s_certified=False,
                       growth_hint=GrowthHint(1.0, 2.0, True), name='quadratic',
                       tail_model=TailModel.POWER_LAW)


def clipped_quadratic_field(n: int) -> ScalarField:
    """min(|y|², 1): bounded and not s-harmonic"""
    return ScalarField(lambda y: np.minimum(np.einsum('ij,ij->i', y, y), 1.0), n,
                       name='clipped-quadratic', kinks=(((0.0,) * n, 1.0),), bound=1.0,
                       tail_model=TailModel.POWER_LAW)


FIELD_BUILDERS: Dict[str, Callable[[FracParams], ScalarField]] = {
    'affine': lambda p: affine_field(p.n),
    'cosine': lambda p: cosine_field(p.n),
    'bump2s': bump2s_field,
    'riesz-kernel': riesz_kernel_field,
    'quadratic': lambda p: quadratic_field(p.n),
    'clipped-quadratic': lambda p: clipped_quadratic_field(p.n),
}


def builtin_field(name: str, p: FracParams) -> ScalarField:
    try:
        builder = FIELD_BUILDERS[name]
    except KeyError:
        raise DomainError(f"unknown field {name!r}; choose from {sorted(FIELD_BUILDERS)}")
    return builder(p)


# ==========================================
# BUILTIN EXTERIOR DATA
# ==========================================

NOISE_MODES = 6


def _split_argument(spec: str) -> Tuple[str, Optional[str]]:
    name, _, argument = spec.partition(':')
    return name.strip(), (argument.strip() or None)


def constant_data(n: int, value: float = 1.0) -> ExteriorData:
    return ExteriorData(lambda y: np.full(y.shape[0], value), n, name='one' if value == 1.0 else f'const:{value:g}',
                        bound=abs(value), tail_model=TailModel.POWER_LAW)


def affine_data(n: int, a: float, b: float) -> ExteriorData:
    """a·y_1 + b"""
    return ExteriorData(lambda y: a * y[:, 0] + b, n, l1s_certified=False,
                        growth_hint=GrowthHint(abs(a) + abs(b), 1.0, True),
                        name=f'affine:{a:g},{b:g}', tail_model=TailModel.POWER_LAW)


def halfspace_data(n: int) -> ExteriorData:
    """Indicator of {y_1 > 0}"""
    return ExteriorData(lambda y: (y[:, 0] > 0.0).astype(float), n, name='halfspace', bound=1.0,
                        tail_model=TailModel.POWER_LAW)


def sign_data(n: int) -> ExteriorData:
    """sign(y_1)"""
    return ExteriorData(lambda y: np.sign(y[:, 0]), n, name='sign', bound=1.0,
                        tail_model=TailModel.POWER_LAW)


def bounded_noise_data(n: int, seed: int) -> ExteriorData:
    """
    Deterministic smooth bounded datum: Σ a_k cos(ω_k·y + φ_k) with Σ|a_k| = 1
    """
    rng = np.random.default_rng(seed)
    amplitudes = rng.uniform(-1.0, 1.0, NOISE_MODES)
    amplitudes /= np.abs(amplitudes).sum()
    frequencies = rng.normal(0.0, 1.0, (NOISE_MODES, n))
    phases = rng.uniform(0.0, 2.0 * np.pi, NOISE_MODES)

    def evaluate(y):
        return np.cos(y @ frequencies.T + phases) @ amplitudes

    return ExteriorData(evaluate, n, name=f'bounded-noise:{seed}', bound=1.0)


def power_decay_data(n: int, a: float) -> ExteriorData:
    """min(1, |y|^{-a}): even, bounded, homogeneous beyond the unit sphere"""
    if a < 0:
        raise DomainError(f"power-decay exponent must be nonnegative, got {a}")
    return ExteriorData(lambda y: np.minimum(1.0, np.maximum(_norm(y), 1e-300) ** (-a)), n,
                        name=f'power-decay:{a:g}', kinks=(((0.0,) * n, 1.0),), bound=1.0,
                        growth_hint=GrowthHint(2.0 ** a, -a), tail_model=TailModel.POWER_LAW)


def builtin_data(spec: str, n: int) -> ExteriorData:
    """
    Parse an exterior-data name

    one | affine:<a,b> | halfspace | sign | bounded-noise:<seed> | power-decay:<a>
    """
    name, argument = _split_argument(spec)
    try:
        if name == 'one':
            return constant_data(n)
        if name == 'affine':
            a, b = (float(v) for v in (argument or '1,0').split(','))
            return affine_data(n, a, b)
        if name == 'halfspace':
            return halfspace_data(n)
        if name == 'sign':
            return sign_data(n)
        if name == 'bounded-noise':
            return bounded_noise_data(n, int(argument or 0))
        if name == 'power-decay':
            return power_decay_data(n, float(argument or 0.5))
    except ValueError:
        raise DomainError(f"cannot parse exterior data {spec!r}")
    raise DomainError(f"unknown exterior data {spec!r}")


# ==========================================
# BUILTIN DENSITIES
# ==========================================


def bump_density(n: int, radius: float = 1.0) -> CompactDensity:
    """exp(1 - 1/(1-|y/R|²)) inside B(0, R): C^∞, radial, peak 1"""

    def profile(t):
        t = np.asarray(t, dtype=float) / radius
        inside = t < 1.0
        gap = np.where(inside, 1.0 - t * t, 1.0)
        return np.where(inside, np.exp(1.0 - 1.0 / gap), 0.0)

    return CompactDensity(lambda y: profile(_norm(y)), n, radius, name='bump',
                          radial=True, smooth=True, profile=profile)


def indicator_density(n: int, radius: float = 1.0) -> CompactDensity:
    def profile(t):
        return (np.asarray(t, dtype=float) < radius).astype(float)

    return CompactDensity(lambda y: profile(_norm(y)), n, radius, name='indicator',
                          radial=True, smooth=False, profile=profile)


DENSITY_BUILDERS: Dict[str, Callable[[int], CompactDensity]] = {
    'bump': bump_density,
    'indicator': indicator_density,
}


def builtin_density(name: str, n: int) -> CompactDensity:
    try:
        return DENSITY_BUILDERS[name](n)
    except KeyError:
        raise DomainError(f"unknown density {name!r}; choose from {sorted(DENSITY_BUILDERS)}")
