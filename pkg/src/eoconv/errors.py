"""Exception hierarchy shared by all eoconv modules."""


class EOConvError(Exception):
    """Base class for every error raised by eoconv."""


class DomainError(EOConvError, ValueError):
    """An argument lies outside the domain of the operation."""


class NonPositiveLinewidth(DomainError):
    """A total decay rate that must be strictly positive is not."""


class ZeroLinewidth(NonPositiveLinewidth):
    """A linewidth appearing in a denominator is zero or negative."""


class PhaseMatchingError(DomainError):
    """Azimuthal mode numbers violate m_sb = m_pump +/- m_mw."""


class NoConvergence(EOConvError, RuntimeError):
    def __init__(self, message, iterations=None, residual=None):
        super().__init__(message)
        self.iterations = iterations
        self.residual = residual


class DegenerateSlopes(DomainError):
    """Bare thermal slopes are equal so branch labelling is undefined."""


class NoRootInBracket(EOConvError, ValueError):
    pass


class DegenerateTarget(EOConvError, ValueError):
    """Target asymmetry is met identically over the whole bracket."""


class GridMismatch(EOConvError, ValueError):
    pass


class ZeroNormVolume(EOConvError, ValueError):
    pass


class FitError(EOConvError, RuntimeError):
    pass


class FitNoConvergence(FitError, NoConvergence):
    pass


class IllConditioned(FitError):
    """Resonance dip is not resolved above the noise floor."""


class UnresolvedCrossing(FitError):
    """Fitted minimum splitting is below the frequency noise floor."""


class TraceParseError(EOConvError, ValueError):
    def __init__(self, path, line_no, message):
        super().__init__(f"{path}:{line_no}: {message}")
        self.path = path
        self.line_no = line_no


class ScenarioError(EOConvError, ValueError):
    """Invalid or incomplete scenario configuration."""
