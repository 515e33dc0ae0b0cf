"""Seeded synthetic rumour corpora for transfer and relevance experiments.

Each task (rumour) mixes three ingredients: class-conditional cue words
shared by every task, task-local class cues that only help once some target
tweets are annotated, and uninformative filler/noise tokens.  Class
proportions are drawn per task with a support-heavy skew, mirroring the kind
of imbalance seen in real rumour collections.  A dedicated "denial marker"
token appears in most denying tweets and almost nowhere else, giving
relevance-ranking tests a planted ground truth.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .experiments import Corpus
from .textproc import BrownLexicon, StanceLabel, TweetRecord, preprocess

__all__ = ["SyntheticData", "make_synthetic_corpus"]

_SUPPORT_WORDS = ("confirm", "legit", "truth")
_DENY_WORDS = ("fake", "wrong")
_DENY_MARKER = "rubbish"
_QUESTION_WORDS = ("doubt", "unsure", "evidence")
_FILLERS = ("today", "people", "street", "city", "photo")

_P_OWN_SHARED = 0.25
_P_OFF_SHARED = 0.06
_P_MARKER_DENY = 0.9
_P_MARKER_OTHER = 0.01
_P_OWN_LOCAL = 0.65
_P_OFF_LOCAL = 0.06
_P_FILLER = 0.3
_P_NEUTRAL = 0.3


@dataclass(frozen=True)
class SyntheticData:
    corpus: Corpus
    lexicon: BrownLexicon
    marker_cluster: str
    marker_word: str
    n_tasks: int


def _class_words(task: int) -> dict[int, tuple[str, ...]]:
    local = (
        f"story{task}yes",
        f"story{task}no",
        f"story{task}eh",
    )
    return {
        int(StanceLabel.SUPPORTING): _SUPPORT_WORDS + (local[0],),
        int(StanceLabel.DENYING): _DENY_WORDS + (local[1],),
        int(StanceLabel.QUESTIONING): _QUESTION_WORDS + (local[2],),
    }


def _neutral_words(task: int) -> tuple[str, ...]:
    return (f"place{task}a", f"place{task}b")


def _build_lexicon(n_tasks: int) -> tuple[BrownLexicon, str]:
    """Cluster map over the generator vocabulary, keyed by pipeline output."""
    clusters: list[tuple[str, ...]] = [("confirm", "legit")]
    singles = [
        "truth", "fake", "wrong", _DENY_MARKER, "doubt", "unsure", "evidence",
        "?", "!",
    ]
    clusters += [(w,) for w in singles]
    clusters += [(w,) for w in _FILLERS]
    for task in range(n_tasks):
        for words in _class_words(task).values():
            local = words[-1]
            clusters.append((local,))
        clusters += [(w,) for w in _neutral_words(task)]

    entries: dict[str, str] = {}
    counts: dict[str, int] = {}
    cluster_index: dict[str, int] = {}
    marker_bits = ""
    for i, words in enumerate(clusters):
        bits = format(i + 1, "010b")
        cluster_index[bits] = i
        for rank, word in enumerate(words):
            normalized = preprocess(word)
            if len(normalized) != 1:
                raise AssertionError(
                    f"generator word {word!r} does not survive preprocessing: {normalized}"
                )
            key = normalized[0]
            entries[key] = bits
            counts[key] = 1000 - 10 * i - rank
            if word == _DENY_MARKER:
                marker_bits = bits
    lexicon = BrownLexicon(entries=entries, cluster_index=cluster_index, counts=counts)
    return lexicon, marker_bits


def _label_sequence(rng: np.random.Generator, n: int) -> np.ndarray:
    for _ in range(50):
        props = rng.dirichlet((6.0, 3.0, 2.5))
        if props.min() >= 0.15:
            break
    counts = np.floor(props * n).astype(int)
    while counts.sum() < n:
        counts[int(np.argmax(props * n - counts))] += 1
    labels = np.repeat(np.arange(3), counts)
    return rng.permutation(labels)


def _tweet_tokens(rng: np.random.Generator, task: int, label: int) -> list[str]:
    words = _class_words(task)
    tokens: list[str] = []
    for c in range(3):
        shared = words[c][:-1]
        local = words[c][-1]
        p_shared = _P_OWN_SHARED if c == label else _P_OFF_SHARED
        p_local = _P_OWN_LOCAL if c == label else _P_OFF_LOCAL
        for w in shared:
            if rng.random() < p_shared:
                tokens.append(w)
        if rng.random() < p_local:
            tokens.append(local)
    p_marker = _P_MARKER_DENY if label == int(StanceLabel.DENYING) else _P_MARKER_OTHER
    if rng.random() < p_marker:
        tokens.append(_DENY_MARKER)
    for w in _FILLERS:
        if rng.random() < _P_FILLER:
            tokens.append(w)
    for w in _neutral_words(task):
        if rng.random() < _P_NEUTRAL:
            tokens.append(w)
    if not tokens:
        tokens.append(_FILLERS[int(rng.integers(len(_FILLERS)))])
    tokens = list(rng.permutation(tokens))
    if label == int(StanceLabel.QUESTIONING):
        if rng.random() < 0.45:
            tokens.append("?")
    elif label == int(StanceLabel.DENYING):
        if rng.random() < 0.35:
            tokens.append("!")
    elif rng.random() < 0.2:
        tokens.append("!")
    return tokens


def make_synthetic_corpus(
    seed: int, n_tasks: int = 3, n_per_task: int = 45
) -> SyntheticData:
    """Generate a deterministic multi-task stance corpus and its cluster lexicon."""
    if n_tasks < 1 or n_per_task < 3:
        raise ValueError("need at least one task and three tweets per task")
    rng = np.random.default_rng(seed)
    lexicon, marker_bits = _build_lexicon(n_tasks)
    records: list[TweetRecord] = []
    for task in range(n_tasks):
        rumour_id = f"riot{task}"
        labels = _label_sequence(rng, n_per_task)
        for i, label in enumerate(labels):
            tokens = _tweet_tokens(rng, task, int(label))
            records.append(
                TweetRecord(
                    tweet_id=f"{rumour_id}-{i:03d}",
                    rumour_id=rumour_id,
                    seq_index=i,
                    text=" ".join(tokens),
                    label=StanceLabel(int(label)),
                )
            )
    corpus = Corpus(records=tuple(records))
    marker_word = preprocess(_DENY_MARKER)[0]
    return SyntheticData(
        corpus=corpus,
        lexicon=lexicon,
        marker_cluster=marker_bits,
        marker_word=marker_word,
        n_tasks=n_tasks,
    )
