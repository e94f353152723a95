"""Exception hierarchy shared across the package."""


class SnnUnwrapError(Exception):
    """Base class for all package errors."""


class InvalidRaster(SnnUnwrapError, ValueError):
    pass


class InvalidSpec(SnnUnwrapError, ValueError):
    pass


class OracleInapplicable(SnnUnwrapError):
    """Raised when the path-following oracle is asked to unwrap a field with residues."""

    def __init__(self, residues):
        self.residues = list(residues)
        super().__init__(f"{len(self.residues)} residue(s) present; Itoh integration is path dependent")


class FormatError(SnnUnwrapError):
    """Malformed SNUR/SNUT file."""


class BadMagic(FormatError):
    pass


class VersionMismatch(FormatError):
    pass


class Truncated(FormatError):
    pass


class DimensionOverflow(FormatError):
    pass


class BadHeader(FormatError):
    pass


class NumericalError(SnnUnwrapError, ArithmeticError):
    def __init__(self, message, timestep=None):
        self.timestep = timestep
        if timestep is not None:
            message = f"{message} (timestep {timestep})"
        super().__init__(message)


class CapacityError(SnnUnwrapError):
    pass


class TraceIncomplete(SnnUnwrapError):
    pass


class InvalidDataset(SnnUnwrapError, ValueError):
    pass


class ConfigError(SnnUnwrapError, ValueError):
    pass
