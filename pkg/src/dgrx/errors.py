"""Exception taxonomy shared across the package.

Every library error derives from DgrxError so callers (and the CLI exit-code
mapping) can distinguish usage problems from data problems in one place.
"""


class DgrxError(Exception):
    """Base class for all dgrx errors."""


class ConfigError(DgrxError):
    """Invalid configuration: bad flag values, malformed config files, missing paths."""


class SchemaError(DgrxError):
    """A data record violates the corpus schema (unknown label, bad span, non-tree parse)."""


class CorpusParseError(DgrxError):
    """A corpus file could not be parsed; the message carries the record index or line number."""


class InputError(DgrxError):
    """Mismatched inputs to an aggregation (for example gold/prediction length skew)."""


class AlignmentError(DgrxError):
    """Subword-to-word or parse-to-example alignment failed."""


class GraphError(DgrxError):
    """Dependency heads do not encode a valid tree."""


class ShapeError(DgrxError):
    """Tensor operands have incompatible shapes."""


class PoolError(DgrxError):
    """Pooling was requested over an empty token set."""


class LabelError(DgrxError):
    """A label index is outside the registered label set."""


class CacheLookupError(DgrxError):
    """The embedding cache has no record for the requested id."""


class CacheFormatError(DgrxError):
    """The embedding cache file is corrupt or truncated."""


class TransportError(DgrxError):
    """The remote embedding service could not be reached within the retry budget."""


class ContractError(DgrxError):
    """The remote embedding service answered outside its declared contract."""


class CheckpointError(DgrxError):
    """A model checkpoint file is corrupt or inconsistent with its config."""


class DivergenceError(DgrxError):
    """Training produced a non-finite loss; the message names the offending example."""
