"""Shared exception types.

The CLI maps these to exit codes: BudgetError -> 2, everything else that
escapes -> 1.
"""


class DomainError(ValueError):
    """An argument is outside the documented domain of an operation."""


class BudgetError(RuntimeError):
    """A request was refused because it exceeds a compute/memory budget.

    The message carries a rough cost estimate so the caller can rescale.
    """


class InvariantError(RuntimeError):
    """A structural invariant that should hold by construction failed."""
