"""Exception hierarchy shared by every fflm module."""


class FFLMError(Exception):
    """Base class for all toolkit errors."""


# -- backends ---------------------------------------------------------------

class BackendError(FFLMError):
    """A scoring backend failed to produce a usable series.

    ``call`` is set by :func:`fflm.extraction.build_pair_bundle` to the name of
    the probability series that was being fetched (e.g. ``"p_y_pref"``).
    """

    call: str | None = None


class BackendUnreachableError(BackendError):
    pass


class ProtocolViolationError(BackendError, ValueError):
    pass


class ReplayMissError(BackendError, KeyError):
    def __str__(self) -> str:  # KeyError would repr() the message
        return str(self.args[0]) if self.args else "replay miss"


class StoreIOError(FFLMError):
    pass


class InvalidRequestError(FFLMError, ValueError):
    pass


# -- extraction / metrics ---------------------------------------------------

class EmptyInputError(FFLMError, ValueError):
    pass


class BudgetExceededError(FFLMError, ValueError):
    pass


class LengthMismatchError(FFLMError, ValueError):
    pass


class InvalidWeightsError(FFLMError, ValueError):
    pass


# -- datasets ---------------------------------------------------------------

class DatasetError(FFLMError):
    pass


class DatasetParseError(DatasetError):
    pass


class SchemaError(DatasetError):
    pass


class ModeMismatchError(DatasetError):
    pass


# -- evaluation -------------------------------------------------------------

class EvaluationError(FFLMError, ValueError):
    pass


class SingleClassLabelsError(EvaluationError):
    pass


class EmptyValidationError(EvaluationError):
    pass


class DegenerateInputError(EvaluationError):
    pass


class TooFewSystemsError(EvaluationError):
    pass


class MissingSystemIdError(EvaluationError):
    pass


class InsufficientExamplesError(EvaluationError):
    pass


class EmptyFaithfulPoolError(EvaluationError):
    pass
