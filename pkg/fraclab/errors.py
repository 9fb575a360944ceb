"""
Exception hierarchy for fraclab.

Every error raised on purpose by the toolkit derives from FraclabError so the
command-line dispatcher can map it to an exit code in one place.
"""


class FraclabError(Exception):
    """Base class for all toolkit errors"""

    exit_code = 2


class DomainError(FraclabError, ValueError):
    """An argument lies outside the domain of the operation"""


class UnsupportedDimensionError(DomainError):
    """Requested ambient dimension is not implemented (only n <= 3 is)"""


class BoundarySingularityError(DomainError):
    """Poisson kernel evaluated exactly on the sphere |y| = r"""


class SingularityError(DomainError):
    """Kernel evaluated at its pole (e.g. Riesz kernel with x == y)"""


class CertificateError(FraclabError):
    """Field has no L1_s growth certificate; the evaluation is refused"""


class PreconditionError(FraclabError):
    """A documented precondition of the operation does not hold"""


class NonConvergenceError(FraclabError):
    """Numerical procedure failed and no flagged value can be returned"""

    exit_code = 3


class InconsistencyError(FraclabError):
    """Two numerically computed quantities contradict each other"""

    exit_code = 3


class ConstructionError(FraclabError):
    """A precomputed table failed its own validation"""

    exit_code = 3
