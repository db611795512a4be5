"""Exception types raised by the catalogue data model."""

from __future__ import annotations


class ParseError(ValueError):
    """Input bytes are not a well-formed document of the expected format."""


class IntegrityError(ValueError):
    """A document parsed but violates a structural invariant."""


class UnknownStep(KeyError):
    """A step identifier does not exist in the taxonomy."""

    def __init__(self, step_id: str) -> None:
        super().__init__(step_id)
        self.step_id = step_id

    def __str__(self) -> str:
        return f"unknown step id: {self.step_id!r}"
