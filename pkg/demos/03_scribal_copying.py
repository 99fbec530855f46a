"""
An artificial scribe
====================

Copying is modeled per character: each letter survives a draw with the
confusion matrix's fidelity, otherwise it is replaced by a visually
confusable one (vowels tend to become other vowels, consonants other
consonants).  A scribe with a lexicon then "corrects" any word they do
not recognize to the nearest word they do.
"""

import numpy as np

from stemmaplace import (
    ScribeConfig,
    copy_text,
    damerau_levenshtein,
    uniform_class_confusion,
)

text = "the abbot kept the old psalter in the tower scriptorium".split()

# A deliberately clumsy scribe: 10% of characters get garbled.
cm = uniform_class_confusion(fidelity=0.90)
scribe = ScribeConfig(error_rate=0.10, confusion=cm, correction_enabled=False)

rng = np.random.default_rng(7)
edits = []
copy = copy_text(text, scribe, rng, edits=edits)
print("original:", " ".join(text))
print("copy:    ", " ".join(copy))
print("edits applied:", len(edits))
for e in edits[:4]:
    print("  ", e)

# Word count and order are conserved: only characters change, so the
# copies stay positionally aligned with the exemplar.
assert len(copy) == len(text)

# Edit distance per word, counting substitutions and adjacent swaps.
dists = [damerau_levenshtein(a, b) for a, b in zip(text, copy)]
print("per-word distances:", dists)

# Same seed, same copy -- the scribe is fully deterministic.
again = copy_text(text, scribe, np.random.default_rng(7))
assert again == copy

# With a lexicon and correction on, garbled words snap back to the
# nearest known word, which can hide the corruption entirely ... or
# replace it with a different word (a very medieval failure mode).
corrector = ScribeConfig(
    error_rate=0.10,
    confusion=cm,
    lexicon=text,
    correction_enabled=True,
)
corrected = copy_text(text, corrector, np.random.default_rng(7))
print("corrected:", " ".join(corrected))
print("words still wrong:", sum(a != b for a, b in zip(text, corrected)))
