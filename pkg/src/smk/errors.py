"""Exception types shared across the package."""


class SmkError(Exception):
    """Base class for all errors raised by this package."""


class ParseError(SmkError):
    """Syntax error in a program, formula or structure file."""

    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        if line is not None:
            message = f"{line}:{column}: {message}"
        super().__init__(message)


class VocabularyError(SmkError):
    """Arity mismatch, name clash between predicates and functions, etc."""


class InterpretationError(SmkError):
    """A symbol is not interpreted by the structure/assignment at hand."""


class ResourceCapError(SmkError):
    """An enumeration would exceed the configured resource cap."""

    def __init__(self, message, partial_count=None):
        self.partial_count = partial_count
        super().__init__(message)


class NotNormalError(SmkError):
    """Operation requires a normal program (heads of at most one atom)."""


class PrefixClassError(SmkError):
    """Formula is not in the prefix class required by a translation."""


class SolverError(SmkError):
    """External SMT solver missing or misbehaving."""
