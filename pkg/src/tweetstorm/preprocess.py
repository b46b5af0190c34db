"""Tweet text normalization: noise removal, tokenizing, stop words, stemming."""
from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from typing import Iterable, Optional, Protocol

_URL = re.compile(r"(?:https?://|www\.)\S+", re.IGNORECASE)
_CHECK_IN = re.compile(r"i\s+am\s+at\b", re.IGNORECASE)
_TOKEN = re.compile(r"[#@]?[^\W_]+")
_RUN = re.compile(r"(.)\1{2,}", re.DOTALL)


class Stemmer(Protocol):
    def stem(self, word: str) -> str: ...


class PorterStemmer:
    """Original Porter (1980) algorithm, memoized per word."""

    def __init__(self, cache_size: int = 1 << 16):
        from nltk.stem.porter import PorterStemmer as _Porter

        impl = _Porter(mode=_Porter.ORIGINAL_ALGORITHM)
        self.stem = lru_cache(maxsize=cache_size)(impl.stem)


class IdentityStemmer:
    def stem(self, word: str) -> str:
        return word


def load_stopwords(path=None) -> frozenset[str]:
    """Read a one-word-per-line stop list; the bundled English list by default."""
    if path is None:
        text = resources.files("tweetstorm").joinpath("data/stopwords.txt").read_text("utf-8")
    else:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    return frozenset(w.strip().lower() for w in text.splitlines() if w.strip())


def collapse_repeats(word: str) -> str:
    return _RUN.sub(r"\1", word)


def strip_noise(text: str) -> str:
    if _CHECK_IN.match(text.strip()):
        return ""
    return _URL.sub("", text)


def tokenize(text: str) -> list[str]:
    return _TOKEN.findall(text)


def _stem_token(token: str, stemmer: Stemmer) -> str:
    if token[0] in "#@":
        body = stemmer.stem(token[1:])
        return token[0] + body if body else ""
    return stemmer.stem(token)


def preprocess(text: str, stopwords: Iterable[str] = frozenset(), stemmer: Optional[Stemmer] = None) -> list[str]:
    if stemmer is None:
        stemmer = default_stemmer()
    stopwords = stopwords if isinstance(stopwords, (set, frozenset)) else frozenset(stopwords)
    tokens = (collapse_repeats(tok) for tok in tokenize(strip_noise(text).lower()))
    out = []
    for tok in tokens:
        if tok in stopwords:
            continue
        tok = _stem_token(tok, stemmer)
        if tok:
            out.append(tok)
    return out


def vectorize(tokens: list[str]) -> dict[str, float]:
    """Relative term frequencies of a token list; ``{}`` for no tokens."""
    if not tokens:
        return {}
    n = len(tokens)
    return {term: count / n for term, count in Counter(tokens).items()}


@lru_cache(maxsize=1)
def default_stemmer() -> PorterStemmer:
    return PorterStemmer()


@dataclass
class Preprocessor:
    """Bundles a stop list and a stemmer; the callable used by the spouts."""

    stopwords: frozenset = field(default_factory=load_stopwords)
    stemmer: Stemmer = field(default_factory=default_stemmer)

    @classmethod
    def from_options(cls, stopwords_path=None, stemming: bool = True) -> "Preprocessor":
        return cls(load_stopwords(stopwords_path), default_stemmer() if stemming else IdentityStemmer())

    def __call__(self, text: str) -> list[str]:
        return preprocess(text, self.stopwords, self.stemmer)
