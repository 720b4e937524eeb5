from .encoder import DEFAULT_MODEL, MODELS, EmbedResult, InputError, LengthBudgetError, StubEncoder
from .tokenizer import split_word, tokenize

__all__ = [
    "DEFAULT_MODEL",
    "MODELS",
    "EmbedResult",
    "InputError",
    "LengthBudgetError",
    "StubEncoder",
    "split_word",
    "tokenize",
]
