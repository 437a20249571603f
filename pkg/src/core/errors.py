"""
Exception hierarchy for the grounding engine
"""

from typing import Optional


class GroundingError(Exception):
    """Base class for every error raised by this package"""


class InvalidInputError(GroundingError, ValueError):
    """Input violates a documented precondition"""


class SearchLimitError(GroundingError):
    """A size guard refused to run an enumeration"""


class ModelMismatchError(GroundingError):
    """Model parts (vocabulary, relevance matrix, maps) disagree"""


class FormatError(InvalidInputError):
    """A file could not be parsed; carries its location"""

    def __init__(self, message: str, path: Optional[str] = None, line: Optional[int] = None):
        self.path = path
        self.line = line
        self.reason = message
        location = ""
        if path is not None:
            location = f"{path}:{line}: " if line is not None else f"{path}: "
        super().__init__(f"{location}{message}")
