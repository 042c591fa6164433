"""Exception hierarchy shared by every module in the package."""

from __future__ import annotations


class RegCCRFError(Exception):
    """Base class for all errors raised by regccrf."""


class RegexSyntaxError(RegCCRFError, ValueError):
    def __init__(self, message: str, position: int):
        super().__init__(f"{message} at position {position}")
        self.position = position


class UndeclaredSymbolError(RegCCRFError, ValueError):
    def __init__(self, symbol: str, position: int | None = None):
        where = "" if position is None else f" at position {position}"
        super().__init__(f"symbol {symbol!r} is not in the declared alphabet{where}")
        self.symbol = symbol
        self.position = position


class StateBudgetExceeded(RegCCRFError):
    def __init__(self, budget: int):
        super().__init__(
            f"automaton construction exceeded the state budget of {budget} states"
        )
        self.budget = budget


class LanguageBudgetExceeded(RegCCRFError):
    def __init__(self, budget: int):
        super().__init__(f"language enumeration exceeded {budget} strings")
        self.budget = budget


class AmbiguousAutomatonError(RegCCRFError):
    """An automaton accepts some string along two distinct paths."""

    def __init__(self, witness):
        super().__init__(
            "automaton is ambiguous: string "
            f"{' '.join(witness.string) or '<empty>'!r} has two accepting paths"
        )
        self.witness = witness


class OutOfLanguageError(RegCCRFError, ValueError):
    """A label sequence lies outside the constraint language."""

    def __init__(self, y):
        super().__init__(f"label sequence {' '.join(y)!r} is not in the language")
        self.y = tuple(y)


class EmptySupportError(RegCCRFError):
    """No tag sequence of the requested length has finite score."""

    def __init__(self, length: int | None = None):
        msg = "empty support: every tag sequence is forbidden"
        if length is not None:
            msg = f"empty support at length {length}: the language has no string of that length"
        super().__init__(msg)
        self.length = length


class DivergenceError(RegCCRFError):
    def __init__(self, step: int, loss: float):
        super().__init__(f"training diverged at step {step} (loss={loss})")
        self.step = step
        self.loss = loss
