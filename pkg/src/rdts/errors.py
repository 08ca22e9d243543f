"""Exception hierarchy shared by all modules."""


class DomainError(ValueError):
    """An argument lies outside the domain of a physical relation."""


class InvalidRatio(DomainError):
    """A calibration ratio cannot be inverted to a positive temperature."""


class DegenerateFit(ValueError):
    """A least-squares problem has too few informative points."""


class DegenerateStokes(ValueError):
    """The noise-subtracted Stokes signal is not positive."""


class ConvergenceError(RuntimeError):
    """An iterative solve did not converge."""


class RangeError(ValueError):
    """The fiber is longer than the unambiguous range of the pulse train."""


class ConfigError(ValueError):
    """An experiment configuration or input file failed validation."""


class ShapeError(ConfigError):
    """Histograms or arrays that must be aligned are not."""
