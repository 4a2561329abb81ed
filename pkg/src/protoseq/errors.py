"""Exception types shared across the package."""


class ProtoseqError(Exception):
    """Base class for every error raised by this package."""


class ParseError(ProtoseqError):
    """A dataset line could not be parsed; the message names the line."""


class SchemaError(ProtoseqError):
    """Structurally valid input that violates the dataset schema."""


class DegeneratePoseError(ProtoseqError):
    """Anchor joints of a sequence do not span a usable coordinate frame."""


class ShapeError(ProtoseqError):
    """Operands with incompatible shapes; the message names both shapes."""


class NormalizationError(ProtoseqError):
    """A vector with near-zero norm cannot be normalized."""


class ContractError(ProtoseqError):
    """An internal API contract was violated by the caller."""
