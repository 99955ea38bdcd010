"""Exception hierarchy shared by every qtape module."""


class QTapeError(Exception):
    """Base class for all library errors."""


class DomainError(QTapeError, ValueError):
    """A numeric argument lies outside the domain of an operation."""


class InvalidRequestError(QTapeError, ValueError):
    """The operation is not defined for the given kind of object."""


class InputIndexError(QTapeError, IndexError):
    """An expression references a parameter slot that was not supplied."""


class WidthError(QTapeError, ValueError):
    """Wire count of a tape does not fit the device or measurement."""


class UnsupportedRuleError(QTapeError):
    """No gradient recipe is registered for a trainable gate."""


class ParseError(QTapeError):
    """Malformed circuit file, with optional line/column position."""

    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        where = ""
        if line is not None:
            where = f"line {line}"
            if column is not None:
                where += f", column {column}"
            where += ": "
        super().__init__(where + message)
