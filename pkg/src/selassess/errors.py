"""Exception types shared across the package."""


class SelAssessError(Exception):
    """Base class for all package errors."""


# --- transcript ---

class EmptyInput(SelAssessError):
    pass


class MalformedLine(SelAssessError):
    def __init__(self, line_number: int, reason: str):
        self.line_number = line_number
        self.reason = reason
        super().__init__(f"line {line_number}: {reason}")


class NoTutorTurns(SelAssessError):
    pass


class InvalidChunkParams(SelAssessError):
    pass


# --- principles / config files ---

class RubricFileNotFound(SelAssessError):
    pass


class RubricParseError(SelAssessError):
    def __init__(self, location: str, reason: str = ""):
        self.location = location
        super().__init__(f"{location}: {reason}" if reason else location)


class ValidationError(SelAssessError):
    pass


# --- llm client ---

class InvalidRequest(SelAssessError):
    pass


class AuthError(SelAssessError):
    pass


class RateLimited(SelAssessError):
    pass


class TransportError(SelAssessError):
    pass


class MalformedResponse(SelAssessError):
    pass


class ScriptExhausted(SelAssessError):
    pass


# --- rag store ---

class EmbedderUnavailable(SelAssessError):
    pass


class DimensionMismatch(SelAssessError):
    pass


class DuplicateRecordId(SelAssessError):
    pass


class EmptyStore(SelAssessError):
    pass


# --- strategies ---

class MissingBinding(SelAssessError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"missing binding for placeholder {{{name}}}")


class UnknownPlaceholder(SelAssessError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"unknown placeholder {{{name}}}")


# --- assessment ---

class EmptyRubric(SelAssessError):
    pass


class RagStoreMissing(SelAssessError):
    pass


# --- cost ledger ---

class UnknownModel(SelAssessError):
    pass


# --- annotation ---

class InvalidCode(SelAssessError):
    def __init__(self, metric: str, value):
        self.metric = metric
        self.value = value
        super().__init__(f"invalid {metric} code: {value!r}")


class InconsistentNoInfo(SelAssessError):
    pass


class DanglingRunReference(SelAssessError):
    pass
