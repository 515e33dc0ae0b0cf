"""Walk through the tweet normalization pipeline step by step.

Shows username removal, emoticon mapping, character-run squashing,
punctuation handling, stopword removal and stemming, then the two sparse
featurizations (bag of words and Brown clusters).
"""

import numpy as np

from rumourgp import (
    build_vocabulary,
    featurize_bow,
    featurize_brown,
    filter_retweets,
    preprocess,
)
from rumourgp.textproc import BrownLexicon, StanceLabel, TweetRecord

EXAMPLES = [
    "LOOOOOL",
    "@bob Hospital attacked!!!",
    "Birmingham children's hospital guarded by police? Really?",
    "this is soooooo fake :S",
    "RT @alice: Fire in the zoo",
    "I can't believe it's true! :D",
]

print("normalization")
print("-" * 60)
for text in EXAMPLES:
    print(f"{text!r:55s} -> {preprocess(text)}")

print()
print("retweet filtering (prefix rule + normalized duplicates)")
print("-" * 60)
records = [
    TweetRecord("t0", "zoo", 0, "fire in zoo", StanceLabel.SUPPORTING),
    TweetRecord("t1", "zoo", 1, "RT @a: fire in zoo", StanceLabel.SUPPORTING),
    TweetRecord("t2", "zoo", 2, "Fire in ZOO", StanceLabel.SUPPORTING),
    TweetRecord("t3", "zoo", 3, "the zoo story is fake!", StanceLabel.DENYING),
]
for rec in filter_retweets(records):
    print(f"kept {rec.tweet_id}: {rec.text!r}")

print()
print("featurization")
print("-" * 60)
token_seqs = [preprocess(t) for t in EXAMPLES]
vocab = build_vocabulary(token_seqs)
print(f"vocabulary of {vocab.size} stemmed tokens")
fv = featurize_bow(preprocess("the hospital was attacked, hospital staff confirm"), vocab)
print("BOW pairs (index, count):", fv.pairs)

lexicon = BrownLexicon(
    entries={"hospit": "110", "attack": "111", "fake": "01", "fire": "00", "zoo": "10"},
    cluster_index={"110": 0, "111": 1, "01": 2, "00": 3, "10": 4},
    counts={"hospit": 50, "attack": 40, "fake": 90, "fire": 70, "zoo": 30},
)
fv = featurize_brown(preprocess("the hospital was attacked, hospital staff confirm"), lexicon)
print("Brown cluster counts:", fv.pairs, "dims:", fv.dims)
print("dense:", np.asarray(fv.to_dense(), dtype=int))
