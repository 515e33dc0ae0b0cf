"""Tweet normalization, retweet filtering and sparse featurization.

The normalization pipeline is applied in a fixed order: username removal,
emoticon replacement, lowercasing, tokenization (keeping ".", "!" and "?"
runs as their own tokens, deleting all other punctuation), squashing of
character runs, stopword removal and stemming.  All functions here are pure;
the loaded resources (stopword set, emoticon map, Brown lexicon) are
immutable after construction and safe to share.
"""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass, field
from enum import IntEnum
from importlib import resources

import numpy as np

from .errors import DataFormatError
from .porter import stem

__all__ = [
    "StanceLabel",
    "TweetRecord",
    "Vocabulary",
    "BrownLexicon",
    "SparseFeatureVector",
    "preprocess",
    "filter_retweets",
    "build_vocabulary",
    "featurize_bow",
    "featurize_brown",
    "restrict_lexicon",
    "load_brown_lexicon",
    "load_stopwords",
    "load_emoticons",
    "default_stopwords",
    "default_emoticons",
]


class StanceLabel(IntEnum):
    """Stance of a tweet towards its rumour."""

    SUPPORTING = 0
    DENYING = 1
    QUESTIONING = 2

    @classmethod
    def from_string(cls, s: str) -> "StanceLabel":
        try:
            return _LABEL_FROM_STRING[s]
        except KeyError:
            raise DataFormatError(
                f"unknown label {s!r} (expected one of support/deny/question)"
            ) from None

    def to_string(self) -> str:
        return _LABEL_TO_STRING[self]


_LABEL_FROM_STRING = {
    "support": StanceLabel.SUPPORTING,
    "deny": StanceLabel.DENYING,
    "question": StanceLabel.QUESTIONING,
}
_LABEL_TO_STRING = {v: k for k, v in _LABEL_FROM_STRING.items()}


@dataclass(frozen=True)
class TweetRecord:
    """One message: rumour (task) identity, position in the stream, text, stance."""

    tweet_id: str
    rumour_id: str
    seq_index: int
    text: str
    label: StanceLabel

    def __post_init__(self):
        if self.seq_index < 0:
            raise ValueError(f"seq_index must be nonnegative, got {self.seq_index}")


@dataclass(frozen=True)
class Vocabulary:
    """Bijective token -> dense feature index map."""

    entries: dict[str, int]

    @property
    def size(self) -> int:
        return len(self.entries)

    def index_of(self, token: str) -> int | None:
        return self.entries.get(token)


@dataclass(frozen=True)
class BrownLexicon:
    """Word -> Brown cluster bitstring map plus a cluster -> feature index map.

    ``counts`` carries the corpus frequency column of the cluster file and is
    used to pick a representative word per cluster for reports.
    """

    entries: dict[str, str]
    cluster_index: dict[str, int]
    counts: dict[str, int] = field(default_factory=dict)

    @property
    def n_clusters(self) -> int:
        return len(self.cluster_index)

    def representative_word(self, bitstring: str) -> str | None:
        """Most frequent member word of a cluster (ties broken lexicographically)."""
        return self.representatives().get(bitstring)

    def representatives(self) -> dict[str, str]:
        """Most frequent member word per cluster, in one pass over the entries."""
        best: dict[str, tuple[int, str]] = {}
        for word, bits in self.entries.items():
            key = (-self.counts.get(word, 0), word)
            if bits not in best or key < best[bits]:
                best[bits] = key
        return {bits: word for bits, (_, word) in best.items()}


@dataclass(frozen=True, eq=False)
class SparseFeatureVector:
    """Sparse nonnegative feature vector with strictly increasing indices."""

    dims: int
    indices: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64)
        val = np.asarray(self.values, dtype=np.float64)
        if idx.shape != val.shape or idx.ndim != 1:
            raise ValueError("indices and values must be 1-d arrays of equal length")
        if idx.size:
            if np.any(np.diff(idx) <= 0):
                raise ValueError("indices must be strictly increasing")
            if idx[0] < 0 or idx[-1] >= self.dims:
                raise ValueError("index out of range")
            if np.any(val <= 0):
                raise ValueError("stored values must be positive (zeros are dropped)")
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "values", val)

    @classmethod
    def from_counts(cls, dims: int, counts: dict[int, float]) -> "SparseFeatureVector":
        items = sorted((i, v) for i, v in counts.items() if v != 0)
        idx = np.array([i for i, _ in items], dtype=np.int64)
        val = np.array([v for _, v in items], dtype=np.float64)
        return cls(dims, idx, val)

    @property
    def pairs(self) -> list[tuple[int, float]]:
        return list(zip(self.indices.tolist(), self.values.tolist()))

    def to_dense(self) -> np.ndarray:
        out = np.zeros(self.dims)
        out[self.indices] = self.values
        return out


# ---------------------------------------------------------------------------
# resource loading

def load_stopwords(path) -> frozenset[str]:
    """One stopword per line, UTF-8; blank lines ignored."""
    words = set()
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            token = line.strip()
            if token:
                words.add(token)
    return frozenset(words)


def load_emoticons(path) -> dict[str, str]:
    """Lines of ``emoticon<TAB>replacement``; the replacement is one word."""
    mapping = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 2 or not parts[0] or not parts[1]:
                raise DataFormatError("expected 'emoticon<TAB>replacement'", lineno)
            mapping[parts[0]] = parts[1].lower()
    return mapping


def load_brown_lexicon(path) -> BrownLexicon:
    """Load a Brown cluster file with lines ``bitstring<TAB>word<TAB>count``.

    Cluster feature indices are assigned in first-occurrence order of the
    bitstrings.  Malformed lines are rejected with their line number.
    """
    entries: dict[str, str] = {}
    counts: dict[str, int] = {}
    cluster_index: dict[str, int] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise DataFormatError("expected 'bitstring<TAB>word<TAB>count'", lineno)
            bits, word, count_s = parts
            if not bits or any(c not in "01" for c in bits):
                raise DataFormatError(f"bad cluster bitstring {bits!r}", lineno)
            try:
                count = int(count_s)
            except ValueError:
                raise DataFormatError(f"bad count {count_s!r}", lineno) from None
            if word in entries and entries[word] != bits:
                raise DataFormatError(f"word {word!r} remapped to a second cluster", lineno)
            entries[word] = bits
            counts[word] = count
            if bits not in cluster_index:
                cluster_index[bits] = len(cluster_index)
    return BrownLexicon(entries=entries, cluster_index=cluster_index, counts=counts)


def _bundled(name: str):
    return resources.files("rumourgp.data").joinpath(name)


_DEFAULT_STOPWORDS: frozenset[str] | None = None
_DEFAULT_EMOTICONS: dict[str, str] | None = None


def default_stopwords() -> frozenset[str]:
    global _DEFAULT_STOPWORDS
    if _DEFAULT_STOPWORDS is None:
        with resources.as_file(_bundled("stopwords.txt")) as p:
            _DEFAULT_STOPWORDS = load_stopwords(p)
    return _DEFAULT_STOPWORDS


def default_emoticons() -> dict[str, str]:
    global _DEFAULT_EMOTICONS
    if _DEFAULT_EMOTICONS is None:
        with resources.as_file(_bundled("emoticons.tsv")) as p:
            _DEFAULT_EMOTICONS = load_emoticons(p)
    return _DEFAULT_EMOTICONS


# ---------------------------------------------------------------------------
# normalization pipeline

_KEPT_PUNCT = frozenset(".!?")
_SQUASH_RE = re.compile(r"(.)\1{2,}", flags=re.DOTALL)


def _split_chunk(chunk: str) -> list[str]:
    """Split one whitespace chunk into word tokens and ./!/? run tokens.

    Punctuation other than ".", "!" and "?" is deleted in place, joining the
    characters around it ("don't" -> "dont").
    """
    tokens: list[str] = []
    word: list[str] = []
    punct: list[str] = []
    for ch in chunk:
        if ch in _KEPT_PUNCT:
            if word:
                tokens.append("".join(word))
                word.clear()
            punct.append(ch)
        elif ch.isalnum():
            if punct:
                tokens.append("".join(punct))
                punct.clear()
            word.append(ch)
        # anything else: deleted
    if word:
        tokens.append("".join(word))
    if punct:
        tokens.append("".join(punct))
    return tokens


def _squash(token: str) -> str:
    return _SQUASH_RE.sub(r"\1\1", token)


def _is_punct_token(token: str) -> bool:
    return all(c in _KEPT_PUNCT for c in token)


def _stemmable(token: str) -> bool:
    return token.isascii() and token.isalpha()


def preprocess(
    text: str,
    emoticon_map: dict[str, str] | None = None,
    stopwords: frozenset[str] | None = None,
) -> list[str]:
    """Normalize raw tweet text into a token sequence.

    Steps, in order: drop @usernames, map emoticons to words, lowercase,
    tokenize (keep ./!/? runs, delete other punctuation), squash character
    runs of three or more to two, drop stopwords, stem.  Stopword matching
    also fires when a token's stem is on the list, so that inflected
    stopwords ("beings") do not leak through and the pipeline stays
    idempotent on its own output.
    """
    if emoticon_map is None:
        emoticon_map = default_emoticons()
    if stopwords is None:
        stopwords = default_stopwords()
    out: list[str] = []
    for chunk in text.split():
        if chunk.startswith("@"):
            continue
        chunk = emoticon_map.get(chunk, chunk)
        chunk = chunk.lower()
        for token in _split_chunk(chunk):
            token = _squash(token)
            if _is_punct_token(token):
                out.append(token)
                continue
            if token in stopwords:
                continue
            if _stemmable(token):
                token = stem(token)
                if token in stopwords:
                    continue
            out.append(token)
    return out


def filter_retweets(records: list[TweetRecord], **preprocess_kwargs) -> list[TweetRecord]:
    """Drop simple retweets from a training record list.

    A record is removed when its text starts with "RT @" (case-insensitive)
    or when its normalized token sequence duplicates that of an earlier
    (lower ``seq_index``) record of the same rumour.  Surviving records keep
    their input order.
    """
    by_rumour: dict[str, list[TweetRecord]] = {}
    for rec in records:
        by_rumour.setdefault(rec.rumour_id, []).append(rec)

    dropped: set[tuple[str, str]] = set()
    for rumour_id, group in by_rumour.items():
        seen: set[tuple[str, ...]] = set()
        for rec in sorted(group, key=lambda r: r.seq_index):
            tokens = tuple(preprocess(rec.text, **preprocess_kwargs))
            is_rt = rec.text[:4].upper() == "RT @"
            if is_rt or tokens in seen:
                dropped.add((rumour_id, rec.tweet_id))
            seen.add(tokens)
    return [r for r in records if (r.rumour_id, r.tweet_id) not in dropped]


# ---------------------------------------------------------------------------
# featurization

def build_vocabulary(token_seqs: list[list[str]]) -> Vocabulary:
    """Assign one index per distinct token in first-occurrence order."""
    entries: dict[str, int] = {}
    for seq in token_seqs:
        for token in seq:
            if token not in entries:
                entries[token] = len(entries)
    return Vocabulary(entries=entries)


def featurize_bow(tokens: list[str], vocab: Vocabulary) -> SparseFeatureVector:
    """Term-count vector over the vocabulary; out-of-vocabulary tokens drop."""
    counts = Counter(
        vocab.entries[t] for t in tokens if t in vocab.entries
    )
    return SparseFeatureVector.from_counts(vocab.size, counts)


def featurize_brown(tokens: list[str], lexicon: BrownLexicon) -> SparseFeatureVector:
    """Count vector over Brown cluster indices; unmapped tokens drop."""
    counts: Counter[int] = Counter()
    for t in tokens:
        bits = lexicon.entries.get(t)
        if bits is None:
            continue
        idx = lexicon.cluster_index.get(bits)
        if idx is not None:
            counts[idx] += 1
    return SparseFeatureVector.from_counts(lexicon.n_clusters, counts)


def restrict_lexicon(lexicon: BrownLexicon, token_seqs: list[list[str]]) -> BrownLexicon:
    """Restrict a lexicon to the clusters observed in the given token sequences.

    Used to fit the cluster feature space on fold training data only: cluster
    indices are reassigned in first-occurrence order over ``token_seqs`` and
    words belonging to unobserved clusters are removed.
    """
    cluster_index: dict[str, int] = {}
    for seq in token_seqs:
        for token in seq:
            bits = lexicon.entries.get(token)
            if bits is not None and bits not in cluster_index:
                cluster_index[bits] = len(cluster_index)
    entries = {w: b for w, b in lexicon.entries.items() if b in cluster_index}
    counts = {w: c for w, c in lexicon.counts.items() if w in entries}
    return BrownLexicon(entries=entries, cluster_index=cluster_index, counts=counts)
