"""Exception hierarchy shared by all modules."""
from __future__ import annotations


class MaxentLobError(Exception):
    """Base class for every error raised by this package."""


class InvalidInputError(MaxentLobError, ValueError):
    pass


class InfeasibleDriftError(InvalidInputError):
    """Requested drift cannot be produced: ``|mu| >= sigma``."""


class FitInfeasibleError(MaxentLobError, ValueError):
    pass


class UndefinedStatisticError(MaxentLobError, ValueError):
    pass


class NumericFailureError(MaxentLobError, ArithmeticError):
    pass


class ConfigError(MaxentLobError, ValueError):
    pass


class MissingStateError(MaxentLobError, KeyError):
    """Lookup hit a (bucket, spread) state that was never observed."""


class QuoteParseError(MaxentLobError, ValueError):
    """Malformed quote input. ``problems`` holds ``(line_number, message)`` pairs."""

    def __init__(self, problems: list[tuple[int, str]], source: str = "<stream>"):
        self.problems = list(problems)
        self.source = source
        shown = "; ".join(f"line {ln}: {msg}" for ln, msg in self.problems[:20])
        more = "" if len(self.problems) <= 20 else f" (+{len(self.problems) - 20} more)"
        super().__init__(f"{source}: {len(self.problems)} bad row(s): {shown}{more}")
