"""
Bounded domains Ω ⊂ R^n (balls, axis-aligned boxes and finite unions of
them) with the distance to the complement δ_Ω(x) = dist(x, R^n \\ Ω).

Domains are written as spec strings: ``ball(cx,...,r)``,
``box(lo1,...,lon,hi1,...,hin)`` and ``union(A;B;...)``, nestable.
"""

import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from fraclab.errors import DomainError
from fraclab.kernels import Ball

logger = logging.getLogger(__name__)

# Relative overshoot when stepping onto the exterior of an open domain
EXIT_OVERSHOOT = 1e-12
MAX_EXIT_HOPS = 64


class Domain(ABC):
    """Open bounded region with a nonempty complement"""

    n: int

    @abstractmethod
    def contains(self, x: Sequence[float]) -> bool:
        """Strict membership"""

    @abstractmethod
    def dist_to_complement(self, x: Sequence[float]) -> float:
        """δ_Ω(x); 0 outside Ω"""

    @abstractmethod
    def nearest_exterior_point(self, x: Sequence[float]) -> np.ndarray:
        """A point of R^n \\ Ω at (about) distance δ_Ω(x) from x"""

    @abstractmethod
    def to_spec(self) -> str:
        ...

    def bounding_radius(self) -> Tuple[np.ndarray, float]:
        """(center, radius) of a ball containing Ω"""
        raise NotImplementedError

    def __str__(self) -> str:
        return self.to_spec()


def _fmt(values) -> str:
    return ','.join(f"{float(v):g}" for v in values)


@dataclass(frozen=True)
class BallDomain(Domain):
    center: Tuple[float, ...]
    radius: float

    def __post_init__(self):
        object.__setattr__(self, 'center', tuple(float(c) for c in self.center))
        if not self.radius > 0:
            raise DomainError(f"ball radius must be positive, got {self.radius}")

    @property
    def n(self) -> int:
        return len(self.center)

    @property
    def ball(self) -> Ball:
        return Ball(self.center, self.radius)

    def contains(self, x) -> bool:
        return bool(np.linalg.norm(np.asarray(x, dtype=float) - self.center) < self.radius)

    def dist_to_complement(self, x) -> float:
        return max(0.0, self.radius - float(np.linalg.norm(np.asarray(x, dtype=float) - self.center)))

    def nearest_exterior_point(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        center = np.asarray(self.center)
        offset = x - center
        norm = float(np.linalg.norm(offset))
        if norm >= self.radius:
            return x.copy()
        direction = offset / norm if norm > 0 else np.eye(self.n)[0]
        return center + self.radius * (1.0 + EXIT_OVERSHOOT) * direction

    def to_spec(self) -> str:
        return f"ball({_fmt(self.center)},{self.radius:g})"

    def bounding_radius(self):
        return np.asarray(self.center), self.radius


@dataclass(frozen=True)
class BoxDomain(Domain):
    lower: Tuple[float, ...]
    upper: Tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, 'lower', tuple(float(v) for v in self.lower))
        object.__setattr__(self, 'upper', tuple(float(v) for v in self.upper))
        if len(self.lower) != len(self.upper) or not self.lower:
            raise DomainError("box corners must have the same positive dimension")
        if any(lo >= hi for lo, hi in zip(self.lower, self.upper)):
            raise DomainError(f"box needs lower < upper, got {self.lower}, {self.upper}")

    @property
    def n(self) -> int:
        return len(self.lower)

    def _gaps(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.concatenate([x - np.asarray(self.lower), np.asarray(self.upper) - x])

    def contains(self, x) -> bool:
        return bool(np.all(self._gaps(x) > 0))

    def dist_to_complement(self, x) -> float:
        gaps = self._gaps(x)
        return float(gaps.min()) if np.all(gaps > 0) else 0.0

    def nearest_exterior_point(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        gaps = self._gaps(x)
        if not np.all(gaps > 0):
            return x.copy()
        face = int(np.argmin(gaps))
        axis = face % self.n
        point = x.copy()
        span = self.upper[axis] - self.lower[axis]
        if face < self.n:
            point[axis] = self.lower[axis] - EXIT_OVERSHOOT * span
        else:
            point[axis] = self.upper[axis] + EXIT_OVERSHOOT * span
        return point

    def to_spec(self) -> str:
        return f"box({_fmt(self.lower)},{_fmt(self.upper)})"

    def bounding_radius(self):
        lo, hi = np.asarray(self.lower), np.asarray(self.upper)
        return 0.5 * (lo + hi), 0.5 * float(np.linalg.norm(hi - lo))


@dataclass(frozen=True)
class UnionDomain(Domain):
    components: Tuple[Domain, ...]

    def __post_init__(self):
        if not self.components:
            raise DomainError("union needs at least one component")
        if len({c.n for c in self.components}) != 1:
            raise DomainError("union components must share one dimension")

    @property
    def n(self) -> int:
        return self.components[0].n

    def contains(self, x) -> bool:
        return any(c.contains(x) for c in self.components)

    def dist_to_complement(self, x) -> float:
        """Largest distance over the components that contain x"""
        return max((c.dist_to_complement(x) for c in self.components if c.contains(x)), default=0.0)

    def nearest_exterior_point(self, x) -> np.ndarray:
        point = np.asarray(x, dtype=float).copy()
        for _ in range(MAX_EXIT_HOPS):
            inside = [c for c in self.components if c.contains(point)]
            if not inside:
                return point
            point = max(inside, key=lambda c: c.dist_to_complement(point)).nearest_exterior_point(point)

        # Overlapping components kept bouncing the point; leave radially instead.
        center, radius = self.bounding_radius()
        offset = point - center
        norm = float(np.linalg.norm(offset))
        direction = offset / norm if norm > 0 else np.eye(self.n)[0]
        logger.debug("union exit fell back to the bounding ball")
        return center + radius * (1.0 + EXIT_OVERSHOOT) * direction

    def to_spec(self) -> str:
        return f"union({';'.join(c.to_spec() for c in self.components)})"

    def bounding_radius(self):
        centers, radii = zip(*(c.bounding_radius() for c in self.components))
        center = np.mean(centers, axis=0)
        return center, max(float(np.linalg.norm(c - center)) + r for c, r in zip(centers, radii))


def dist_to_complement(omega: Domain, x: Sequence[float]) -> float:
    """δ_Ω(x) = dist(x, R^n \\ Ω), 0 outside Ω"""
    return omega.dist_to_complement(x)


# ==========================================
# SPEC-STRING PARSER
# ==========================================


def _split_top_level(body: str) -> List[str]:
    parts, depth, start = [], 0, 0
    for i, ch in enumerate(body):
        if ch == '(':
            depth += 1
        elif ch == ')':
            depth -= 1
            if depth < 0:
                raise DomainError(f"unbalanced parentheses in {body!r}")
        elif ch == ';' and depth == 0:
            parts.append(body[start:i])
            start = i + 1
    parts.append(body[start:])
    return [p.strip() for p in parts if p.strip()]


def _numbers(body: str, text: str) -> List[float]:
    try:
        return [float(v) for v in body.split(',') if v.strip()]
    except ValueError:
        raise DomainError(f"non-numeric coordinates in {text!r}")


def parse_domain(text: str, n: int = None) -> Domain:
    """
    Parse a domain spec string

    Args:
        text: e.g. "ball(0,0,1)", "box(-1,-1,1,1)", "union(ball(0,1);ball(3,1))"
        n: Expected dimension, checked when given

    Returns:
        Domain
    """
    text = text.strip()
    name, paren, rest = text.partition('(')
    if not paren or not rest.endswith(')'):
        raise DomainError(f"cannot parse domain {text!r}")
    name, body = name.strip().lower(), rest[:-1]

    if name == 'ball':
        values = _numbers(body, text)
        if len(values) < 2:
            raise DomainError(f"ball needs a center and a radius: {text!r}")
        domain = BallDomain(tuple(values[:-1]), values[-1])
    elif name == 'box':
        values = _numbers(body, text)
        if not values or len(values) % 2:
            raise DomainError(f"box needs 2n coordinates: {text!r}")
        half = len(values) // 2
        domain = BoxDomain(tuple(values[:half]), tuple(values[half:]))
    elif name == 'union':
        domain = UnionDomain(tuple(parse_domain(part) for part in _split_top_level(body)))
    else:
        raise DomainError(f"unknown domain shape {name!r}")

    if n is not None and domain.n != n:
        raise DomainError(f"domain {text!r} has dimension {domain.n}, expected {n}")
    return domain
