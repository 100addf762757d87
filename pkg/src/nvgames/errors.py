"""Exception hierarchy shared across the package.

Exit-code mapping used by the CLI: InputError (and subclasses) -> 2,
SolverError -> 3, GameInvalidError -> 4.
"""


class NvGamesError(Exception):
    """Base class for all package errors."""


class InputError(NvGamesError):
    """Malformed or inconsistent user input (dimensions, bounds, file fields)."""


class CapacityError(InputError):
    """A configured size cap would be exceeded (e.g. joint support too large)."""


class DomainError(InputError):
    """An argument lies outside the mathematical domain of the operation."""


class SolverError(NvGamesError):
    """The LP solver failed or produced an internally inconsistent result."""


class GameInvalidError(NvGamesError):
    """The game violates a model assumption (no order quantity keeps the
    grand-coalition profit positive under every admissible distribution)."""
