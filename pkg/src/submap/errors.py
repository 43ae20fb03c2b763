"""Exception types shared across the package."""


class SubmapError(Exception):
    """Base class for all typed failures raised by this package."""


class ConfigError(SubmapError):
    """Invalid configuration value or out-of-range parameter."""


class ParseError(SubmapError):
    """Malformed input file (embedding, dictionary, map, or partition)."""


class EmptySpaceError(SubmapError):
    """An embedding file yielded zero usable rows."""


class DegenerateVectorError(SubmapError):
    """A zero vector was encountered where a direction is required."""


class NumericError(SubmapError):
    """Non-finite values appeared in a numeric computation."""


class ShapeError(SubmapError):
    """Array dimensions do not match the operation's contract."""


class TooFewSamplesError(SubmapError):
    """An operation needs at least two sample rows."""


class EmptyDictionaryError(SubmapError):
    """Bidirectional induction produced no mutual translation pairs."""


class TrainingFailedError(SubmapError):
    """Every adversarial training restart diverged."""


class EmptyTargetSubspaceError(SubmapError):
    """One or more source clusters received no target words."""

    def __init__(self, empty_ids):
        self.empty_ids = sorted(int(i) for i in empty_ids)
        super().__init__(f"clusters with no target words: {self.empty_ids}")


class EmptyEvaluationError(SubmapError):
    """No gold dictionary entry was evaluable against the given spaces."""
