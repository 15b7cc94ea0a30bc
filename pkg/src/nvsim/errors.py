"""Exception hierarchy shared by the simulation modules and the CLI."""


class NVSimError(Exception):
    """Base class for all errors raised by nvsim."""


class UnsupportedSpinError(NVSimError, ValueError):
    pass


class NotHermitianError(NVSimError, ValueError):
    pass


class DegenerateLabelError(NVSimError):
    """Two candidate eigenstates are indistinguishable by the labeling rule."""


class ContinuityError(NVSimError):
    """Adjacent sweep points could not be matched by eigenvector overlap."""

    def __init__(self, theta_a, theta_b, overlap):
        self.theta_a = theta_a
        self.theta_b = theta_b
        self.overlap = overlap
        super().__init__(
            f"label continuity lost between theta={theta_a:g} deg and "
            f"theta={theta_b:g} deg (overlap {overlap:.3f} <= 0.5)"
        )


class SensitivityLostError(NVSimError):
    """The echo modulation factor vanishes, so the angle signal is invisible."""


class InvariantViolation(NVSimError):
    """A numerical invariant (trace, Hermiticity, positivity) was broken."""


class IntegrationError(NVSimError):
    pass


class ConfigError(NVSimError, ValueError):
    """Invalid run configuration. ``path`` names the offending field."""

    def __init__(self, message, path=None, line=None, column=None):
        self.path = path
        self.line = line
        self.column = column
        where = ""
        if path:
            where = f"{path}: "
        if line is not None:
            where = f"line {line}, column {column}: " + where
        super().__init__(where + message)
