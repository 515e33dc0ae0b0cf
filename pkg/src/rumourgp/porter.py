"""Porter suffix-stripping stemmer (1980 rule set).

Self-contained implementation of the classic five-step algorithm.  Within
each step the longest matching suffix is selected and its condition tested;
if the condition fails no shorter suffix from the same step is tried (so
e.g. "rational" survives step 2 unchanged).

``stem`` applies the rule passes repeatedly until the word stops changing.
Canonical Porter is not idempotent for a handful of words whose step-2
replacement reintroduces a final "s" ("famously" -> "famous" -> "famou");
iterating to the fixed point makes repeated normalization stable, which the
text pipeline relies on.
"""

from __future__ import annotations

_VOWELS = "aeiou"


def _is_consonant(word: str, i: int) -> bool:
    ch = word[i]
    if ch in _VOWELS:
        return False
    if ch == "y":
        # "y" is a vowel when preceded by a consonant
        return i == 0 or not _is_consonant(word, i - 1)
    return True


def _measure(stem: str) -> int:
    """Number of vowel-consonant sequences [C](VC){m}[V]."""
    m = 0
    i = 0
    n = len(stem)
    while i < n and _is_consonant(stem, i):
        i += 1
    while i < n:
        while i < n and not _is_consonant(stem, i):
            i += 1
        if i >= n:
            break
        m += 1
        while i < n and _is_consonant(stem, i):
            i += 1
    return m


def _has_vowel(stem: str) -> bool:
    return any(not _is_consonant(stem, i) for i in range(len(stem)))


def _ends_double_consonant(word: str) -> bool:
    return (
        len(word) >= 2
        and word[-1] == word[-2]
        and _is_consonant(word, len(word) - 1)
    )


def _ends_cvc(word: str) -> bool:
    # consonant-vowel-consonant where the final consonant is not w, x or y
    if len(word) < 3:
        return False
    return (
        _is_consonant(word, len(word) - 3)
        and not _is_consonant(word, len(word) - 2)
        and _is_consonant(word, len(word) - 1)
        and word[-1] not in "wxy"
    )


def _step1a(w: str) -> str:
    if w.endswith("sses"):
        return w[:-2]
    if w.endswith("ies"):
        return w[:-2]
    if w.endswith("ss"):
        return w
    if w.endswith("s"):
        return w[:-1]
    return w


def _step1b(w: str) -> str:
    if w.endswith("eed"):
        if _measure(w[:-3]) > 0:
            return w[:-1]
        return w
    if w.endswith("ed"):
        stem = w[:-2]
        if not _has_vowel(stem):
            return w
    elif w.endswith("ing"):
        stem = w[:-3]
        if not _has_vowel(stem):
            return w
    else:
        return w
    # "ed"/"ing" removed; tidy up the exposed stem
    if stem.endswith(("at", "bl", "iz")):
        return stem + "e"
    if _ends_double_consonant(stem) and stem[-1] not in "lsz":
        return stem[:-1]
    if _measure(stem) == 1 and _ends_cvc(stem):
        return stem + "e"
    return stem


def _step1c(w: str) -> str:
    if w.endswith("y") and _has_vowel(w[:-1]):
        return w[:-1] + "i"
    return w


_STEP2 = (
    ("ational", "ate"),
    ("tional", "tion"),
    ("enci", "ence"),
    ("anci", "ance"),
    ("izer", "ize"),
    ("abli", "able"),
    ("alli", "al"),
    ("entli", "ent"),
    ("eli", "e"),
    ("ousli", "ous"),
    ("ization", "ize"),
    ("ation", "ate"),
    ("ator", "ate"),
    ("alism", "al"),
    ("iveness", "ive"),
    ("fulness", "ful"),
    ("ousness", "ous"),
    ("aliti", "al"),
    ("iviti", "ive"),
    ("biliti", "ble"),
)

_STEP3 = (
    ("icate", "ic"),
    ("ative", ""),
    ("alize", "al"),
    ("iciti", "ic"),
    ("ical", "ic"),
    ("ful", ""),
    ("ness", ""),
)

_STEP4 = (
    "al", "ance", "ence", "er", "ic", "able", "ible", "ant", "ement",
    "ment", "ent", "ion", "ou", "ism", "ate", "iti", "ous", "ive", "ize",
)

_STEP2_MAP = dict(_STEP2)
_STEP3_MAP = dict(_STEP3)
_STEP2_SUFFIXES = tuple(s for s, _ in _STEP2)
_STEP3_SUFFIXES = tuple(s for s, _ in _STEP3)


def _longest_suffix(w: str, suffixes) -> str | None:
    best = None
    for s in suffixes:
        if w.endswith(s) and (best is None or len(s) > len(best)):
            best = s
    return best


def _step2(w: str) -> str:
    match = _longest_suffix(w, _STEP2_SUFFIXES)
    if match is None:
        return w
    stem = w[: -len(match)]
    if _measure(stem) > 0:
        return stem + _STEP2_MAP[match]
    return w


def _step3(w: str) -> str:
    match = _longest_suffix(w, _STEP3_SUFFIXES)
    if match is None:
        return w
    stem = w[: -len(match)]
    if _measure(stem) > 0:
        return stem + _STEP3_MAP[match]
    return w


def _step4(w: str) -> str:
    match = _longest_suffix(w, _STEP4)
    if match is None:
        return w
    stem = w[: -len(match)]
    if _measure(stem) <= 1:
        return w
    if match == "ion" and not stem.endswith(("s", "t")):
        return w
    return stem


def _step5(w: str) -> str:
    if w.endswith("e"):
        stem = w[:-1]
        m = _measure(stem)
        if m > 1 or (m == 1 and not _ends_cvc(stem)):
            w = stem
    if _ends_double_consonant(w) and w.endswith("l") and _measure(w) > 1:
        w = w[:-1]
    return w


def _porter_once(word: str) -> str:
    if len(word) <= 2:
        return word
    word = _step1a(word)
    word = _step1b(word)
    word = _step1c(word)
    word = _step2(word)
    word = _step3(word)
    word = _step4(word)
    word = _step5(word)
    return word


def stem(word: str) -> str:
    """Stem a lowercase word, iterating the Porter passes to a fixed point."""
    for _ in range(5):
        out = _porter_once(word)
        if out == word:
            return out
        word = out
    return word
