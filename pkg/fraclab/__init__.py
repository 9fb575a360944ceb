"""
fraclab: numerical experiments for the fractional Laplacian (-Δ)^s on R^n,
s-harmonic functions, Poisson extensions into balls, regularized mean-value
kernels, Riesz potentials and walk-on-spheres sampling.
"""

from fraclab.constants import FracParams, constants_for
from fraclab.errors import (CertificateError, ConstructionError, DomainError,
                            FraclabError, InconsistencyError,
                            NonConvergenceError, PreconditionError)
from fraclab.quadrature import QuadResult, QuadSpec

__version__ = '0.1.0'

__all__ = [
    'FracParams',
    'constants_for',
    'QuadSpec',
    'QuadResult',
    'FraclabError',
    'DomainError',
    'CertificateError',
    'PreconditionError',
    'NonConvergenceError',
    'InconsistencyError',
    'ConstructionError',
]
