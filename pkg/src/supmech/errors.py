"""Exception hierarchy. Every error raised by the library derives from
:class:`SupmechError`; the CLI maps each subclass to its own exit code."""


class SupmechError(Exception):
    """Base class for all library errors."""


class DimensionMismatch(SupmechError, ValueError):
    pass


class NotHermitian(SupmechError, ValueError):
    pass


class InvalidState(SupmechError, ValueError):
    pass


class DegenerateSpectrum(SupmechError, ValueError):
    pass


class GridMismatch(SupmechError, ValueError):
    pass


class InvalidGrid(SupmechError, ValueError):
    pass


class OverlappingDomains(SupmechError, ValueError):
    pass


# build_experiment raises this name for overlap between initial support and
# pointer domains; it is the same condition.
OverlapError = OverlappingDomains


class DuplicateLabel(SupmechError, ValueError):
    pass


class ZeroLabel(SupmechError, ValueError):
    pass


class EmptyDomain(SupmechError, ValueError):
    pass


class EmptyReadyDomain(EmptyDomain):
    pass


class CflViolation(SupmechError, ValueError):
    pass


class MassLeak(SupmechError, RuntimeError):
    pass


class UnsupportedCoupling(SupmechError, ValueError):
    pass


class GeometryInfeasible(SupmechError, ValueError):
    pass


class CalibrationFailure(SupmechError, RuntimeError):
    """Raised when an eigenstate input does not produce its pointer reading.

    ``index`` is the offending branch and ``report`` the full per-branch report.
    """

    def __init__(self, message, index=None, report=None):
        super().__init__(message)
        self.index = index
        self.report = report


class ParseError(SupmechError, ValueError):
    pass


class InvariantViolation(SupmechError, ValueError):
    """Config failed semantic checks. ``problems`` is a list of
    ``(field, message)`` pairs."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(f"{f}: {m}" for f, m in self.problems))
