"""Exception types shared across the package."""


class QswalkError(Exception):
    """Base class for all package-specific errors."""


class NotHermitian(QswalkError):
    """An operator that must be Hermitian is not (beyond tolerance)."""


class SectorViolation(QswalkError):
    """Requested operation does not preserve the chosen excitation sector."""


class DegenerateTransitions(QswalkError):
    """Transition frequencies are degenerate in a way that couples secular terms.

    The golden-rule reduction assumes each surviving secular term belongs to a
    unique Bohr frequency.  This error is raised when two distinct level pairs
    share a transition frequency *and* both carry nonzero coupling matrix
    elements, so the single-frequency rate formulas would silently drop a
    surviving cross term.
    """

    def __init__(self, message, offenders=None):
        super().__init__(message)
        self.offenders = offenders or []


class DegenerateSteadyState(QswalkError):
    """The generator kernel is more than one dimensional.

    ``solutions`` holds an orthonormal basis of the kernel (as density-matrix
    shaped arrays) so callers can inspect the degenerate family.
    """

    def __init__(self, message, solutions=None):
        super().__init__(message)
        self.solutions = solutions or []


class ToleranceNotMet(QswalkError):
    """A numerical invariant (trace, Hermiticity, positivity, residual) failed."""


class InvalidTarget(QswalkError):
    """An engineering target is structurally impossible (e.g. changes excitation number)."""


class ConfigInvalid(QswalkError):
    """A CLI configuration file failed schema or semantic validation."""
