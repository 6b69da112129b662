"""Exception types shared across the package."""


class GraphCrewError(Exception):
    """Base class for every error raised by this package."""


class UnknownTemplate(GraphCrewError):
    def __init__(self, name: str):
        super().__init__(f"unknown prompt template: {name!r}")
        self.name = name


class MissingBinding(GraphCrewError):
    def __init__(self, name: str):
        super().__init__(f"no binding supplied for placeholder {name!r}")
        self.name = name


class TransportError(GraphCrewError):
    """Network failure or HTTP >= 500 that survived the retry budget."""


class AuthError(GraphCrewError):
    """HTTP 401/403 from the chat endpoint; never retried."""


class BackendRefusal(GraphCrewError):
    """The backend produced no usable completion."""


class ParseFailure(GraphCrewError):
    """No JSON object could be extracted from a model reply."""


class NormalizationParseError(GraphCrewError):
    """Question-agent reply stayed unparseable after the lenient retry."""


class EmbeddingBackendError(GraphCrewError):
    """Remote embedding endpoint failure."""


class DimensionMismatch(GraphCrewError):
    def __init__(self, left: int, right: int):
        super().__init__(f"vector dimensions differ: {left} vs {right}")
        self.left = left
        self.right = right


class SchemaError(GraphCrewError):
    """A data file record does not match its documented schema."""

    def __init__(self, index: int, reason: str):
        super().__init__(f"record {index}: {reason}")
        self.index = index
        self.reason = reason


class NoCodeBlock(GraphCrewError):
    """A coding-agent reply contained no fenced code block."""
