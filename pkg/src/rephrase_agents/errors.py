"""Exception hierarchy shared across the package."""

from __future__ import annotations


class RephraseError(Exception):
    """Base class for every error raised by rephrase_agents."""


def _at_row(message: str, row: int | None) -> str:
    return f"row {row}: {message}" if row is not None else message


# --- labels & datasets -------------------------------------------------------


class DatasetError(RephraseError, ValueError):
    """Ingestion or validation problem; ``row`` is 1-based when known."""

    def __init__(self, message: str, row: int | None = None):
        self.row = row
        super().__init__(_at_row(message, row))


class UnknownLabel(DatasetError):
    def __init__(self, label: str, row: int | None = None):
        self.label = label
        super().__init__(f"unknown rephrase label {label!r}", row)


class MissingColumn(DatasetError):
    def __init__(self, columns: list[str]):
        self.columns = columns
        super().__init__(f"missing required column(s): {', '.join(columns)}")


class DuplicateId(DatasetError):
    def __init__(self, pair_id: str, row: int):
        self.pair_id = pair_id
        super().__init__(f"duplicate id {pair_id!r}", row)


class EmptyText(DatasetError):
    def __init__(self, field: str, row: int):
        self.field = field
        super().__init__(f"{field} is empty", row)


class MissingGold(DatasetError):
    def __init__(self, pair_id: str, row: int):
        self.pair_id = pair_id
        super().__init__(f"record {pair_id!r} has no gold label", row)


class UnknownId(RephraseError, KeyError):
    def __init__(self, ids: list[str]):
        self.ids = list(ids)
        super().__init__(f"unknown id(s): {', '.join(self.ids)}")

    def __str__(self) -> str:
        return self.args[0]


class IdSetMismatch(RephraseError, ValueError):
    def __init__(self, only_a: list[str], only_b: list[str]):
        self.only_a = only_a
        self.only_b = only_b
        super().__init__(
            f"id sets differ: {len(only_a)} only in first ({', '.join(only_a[:5])}), "
            f"{len(only_b)} only in second ({', '.join(only_b[:5])})"
        )


# --- knowledge base ----------------------------------------------------------


class InvalidParams(RephraseError, ValueError):
    pass


class EmptyCorpus(RephraseError, ValueError):
    pass


class UnknownChunk(RephraseError, KeyError):
    def __str__(self) -> str:
        return f"unknown chunk id {self.args[0]!r}"


class IndexFormatError(RephraseError, ValueError):
    pass


# --- model backends ----------------------------------------------------------


class BackendError(RephraseError):
    """Any failure to obtain a completion; deliberation records it as BackendFailure."""


class BackendFailure(BackendError):
    def __init__(self, attempts: int, last_cause: object):
        self.attempts = attempts
        self.last_cause = last_cause
        super().__init__(f"backend failed after {attempts} attempt(s): {last_cause}")


class AuthFailure(BackendError):
    pass


class MalformedResponse(BackendError):
    pass


class ScriptExhausted(BackendError):
    def __init__(self, key: tuple[str, int]):
        self.key = key
        super().__init__(f"no scripted response for key {key!r}")


# --- metrics -----------------------------------------------------------------


class LengthMismatch(RephraseError, ValueError):
    pass


class EmptyMatrix(RephraseError, ValueError):
    pass


class EmptyInput(RephraseError, ValueError):
    pass


# --- experiment --------------------------------------------------------------


class ConfigError(RephraseError, ValueError):
    pass


class CorruptResultsFile(RephraseError, ValueError):
    def __init__(self, path: str, line: int, cause: object):
        self.path = path
        self.line = line
        super().__init__(f"{path}: line {line} is not a valid run record ({cause})")
