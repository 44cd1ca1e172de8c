"""Exception types shared across the toolkit."""


class MatteForgeError(Exception):
    """Base class for all toolkit errors."""


class ShapeMismatchError(MatteForgeError):
    """Two operands that must share dimensions do not."""

    def __init__(self, operand, expected, actual):
        self.operand = operand
        self.expected = tuple(expected)
        self.actual = tuple(actual)
        super().__init__(
            f"shape mismatch on {operand!r}: expected {self.expected}, got {self.actual}"
        )


class FormatError(MatteForgeError):
    """Image payload has the wrong mode, bit depth or layout."""


class PaletteError(MatteForgeError):
    """A three-valued map contains a value outside its palette."""

    def __init__(self, x, y, value):
        self.x = x
        self.y = y
        self.value = value
        super().__init__(f"off-palette value {value!r} at pixel (x={x}, y={y})")


class EmptyRegionError(MatteForgeError):
    """A metric that averages over a region received an empty region."""


class ContractViolationError(MatteForgeError):
    """Inputs violate a documented precondition."""


class ConfigError(MatteForgeError):
    """Configuration file is malformed or carries unknown keys."""
