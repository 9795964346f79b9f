"""Exception types shared across the package."""

from __future__ import annotations

LOAD_ERROR_KINDS = (
    "hidden-functor-leak",
    "import-not-exported",
    "duplicate-definition",
    "parse-error",
    "visibility-violation",
    "malformed-assertion",
)


class LoadError(Exception):
    """A module set could not be parsed, flattened or validated."""

    def __init__(self, kind: str, module: str, location: str, message: str):
        assert kind in LOAD_ERROR_KINDS, kind
        self.kind = kind
        self.module = module
        self.location = location
        self.message = message
        super().__init__(f"{kind} in {module or '?'} at {location}: {message}")


class VisibilityError(LoadError):
    """A goal called a predicate that is neither local nor imported."""

    def __init__(self, goal: str, caller: str):
        super().__init__("visibility-violation", caller, "runtime", f"{goal} is not visible from {caller}")
        self.goal = goal
        self.caller = caller


class EvaluationError(Exception):
    """Instantiation/type error raised by a builtin, or a step limit hit."""
