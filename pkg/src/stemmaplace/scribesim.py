"""Scribal copy simulation: random stemmata, noisy copying, aligned collation.

A root text is copied along every edge of a stemma by an artificial scribe
that miscopies single characters according to a confusion matrix and then
"corrects" any word it does not recognize to the nearest lexicon entry.
Substitution-only noise never touches spaces, so word counts are conserved
and the resulting tradition collates positionally with known ground truth.
"""

from __future__ import annotations

import csv
import hashlib
import io
from dataclasses import dataclass, field

import numpy as np

from .collation import Collation
from .errors import ConfigError, DataError
from .stemma import Stemma

VOWELS = frozenset("aeiou")

DEFAULT_ALPHABET = "abcdefghijklmnopqrstuvwxyz"


class BadParams(ConfigError):
    pass


class EmptyText(DataError):
    pass


def character_class(c):
    if c in VOWELS:
        return "vowel"
    if c.isalpha():
        return "consonant"
    return "other"


def damerau_levenshtein(a, b):
    """Optimal-string-alignment edit distance between two words.

    Substitutions, insertions, deletions, and adjacent transpositions cost
    1 each; no substring is edited twice.  (That restriction makes this the
    OSA variant, which can violate the triangle inequality.)
    """
    la, lb = len(a), len(b)
    if la == 0:
        return lb
    if lb == 0:
        return la
    prev2 = None
    prev = list(range(lb + 1))
    for i in range(1, la + 1):
        cur = [i] + [0] * lb
        ca = a[i - 1]
        for j in range(1, lb + 1):
            best = prev[j - 1] + (ca != b[j - 1])
            up = prev[j] + 1
            if up < best:
                best = up
            left = cur[j - 1] + 1
            if left < best:
                best = left
            if i > 1 and j > 1 and ca == b[j - 2] and a[i - 2] == b[j - 1]:
                swap = prev2[j - 2] + 1
                if swap < best:
                    best = swap
            cur[j] = best
        prev2 = prev
        prev = cur
    return prev[lb]


class ConfusionMatrix:
    """Row-stochastic character-substitution model.

    ``p[i, j]`` is the probability that ``alphabet[i]`` is copied as
    ``alphabet[j]``; the diagonal carries the faithful-copy mass.  The
    scribe draws replacements from the off-diagonal conditional, so a
    triggered confusion always changes the character.
    """

    def __init__(self, alphabet, p, within_class_floor=None):
        self.alphabet = tuple(alphabet)
        n = len(self.alphabet)
        if n == 0:
            raise DataError("empty confusion alphabet")
        if len(set(self.alphabet)) != n or any(len(c) != 1 for c in self.alphabet):
            raise DataError("alphabet must be distinct single characters")
        self.p = np.asarray(p, dtype=np.float64)
        if self.p.shape != (n, n):
            raise DataError(f"matrix shape {self.p.shape} does not fit {n} characters")
        if (self.p < -1e-12).any():
            raise DataError("negative probability in confusion matrix")
        sums = self.p.sum(axis=1)
        bad = np.nonzero(np.abs(sums - 1.0) > 1e-9)[0]
        if bad.size:
            i = int(bad[0])
            raise DataError(
                f"row {self.alphabet[i]!r} sums to {sums[i]!r}, not 1"
            )
        self.classes = tuple(character_class(c) for c in self.alphabet)
        self.within_class_floor = within_class_floor
        self._index = {c: i for i, c in enumerate(self.alphabet)}

        # off-diagonal conditional per row, as cumulative weights
        self._cands = []
        self._cum = []
        for i in range(n):
            off = self.p[i].copy()
            off[i] = 0.0
            mass = off.sum()
            if mass <= 0.0:
                self._cands.append(None)
                self._cum.append(None)
                continue
            nz = np.nonzero(off)[0]
            self._cands.append(nz)
            self._cum.append(np.cumsum(off[nz]) / mass)

        if within_class_floor is not None:
            self._check_class_bias(within_class_floor)

    def _check_class_bias(self, floor):
        for i, c in enumerate(self.alphabet):
            if self.classes[i] == "other" or self._cands[i] is None:
                continue
            same = [
                j
                for j in range(len(self.alphabet))
                if j != i and self.classes[j] == self.classes[i]
            ]
            if not same:
                continue
            off = self.p[i].copy()
            off[i] = 0.0
            within = off[same].sum() / off.sum()
            if within < floor - 1e-9:
                raise DataError(
                    f"row {c!r}: within-class mass {within:.4f} below floor {floor}"
                )

    def __contains__(self, c):
        return c in self._index

    def replace(self, c, rng):
        """One miscopy of `c`, or None when `c` has nothing to turn into."""
        i = self._index.get(c)
        if i is None or self._cum[i] is None:
            return None
        j = int(np.searchsorted(self._cum[i], rng.random(), side="right"))
        if j >= len(self._cands[i]):
            j = len(self._cands[i]) - 1
        return self.alphabet[self._cands[i][j]]


def uniform_class_confusion(
    alphabet=DEFAULT_ALPHABET, fidelity=0.99, within_class_ratio=0.9
):
    """Synthetic confusion matrix with a class bias.

    Each letter keeps `fidelity` probability of surviving a draw; the
    leftover mass goes `within_class_ratio` to the letter's own class
    (vowel or consonant), uniformly, and the remainder crosses the class
    boundary.  If one side has no candidates its share folds into the other.
    """
    if not 0.0 <= fidelity <= 1.0:
        raise BadParams(f"fidelity {fidelity} outside [0, 1]")
    if not 0.0 <= within_class_ratio <= 1.0:
        raise BadParams(f"within_class_ratio {within_class_ratio} outside [0, 1]")
    chars = tuple(alphabet)
    n = len(chars)
    classes = [character_class(c) for c in chars]
    p = np.zeros((n, n), dtype=np.float64)
    for i in range(n):
        if classes[i] == "other":
            p[i, i] = 1.0
            continue
        same = [j for j in range(n) if j != i and classes[j] == classes[i]]
        cross = [
            j
            for j in range(n)
            if classes[j] != classes[i] and classes[j] != "other"
        ]
        err = 1.0 - fidelity
        same_mass = err * within_class_ratio
        cross_mass = err - same_mass
        if not same:
            cross_mass += same_mass
            same_mass = 0.0
        if not cross:
            same_mass += cross_mass
            cross_mass = 0.0
        p[i, i] = fidelity
        if same:
            p[i, same] = same_mass / len(same)
        if cross:
            p[i, cross] = cross_mass / len(cross)
        if not same and not cross:
            p[i, i] = 1.0
    floor = within_class_ratio if n > 1 else None
    return ConfusionMatrix(chars, p, within_class_floor=floor)


def load_confusion_csv(text):
    """Parse a confusion matrix from CSV.

    Header: empty corner cell, then the alphabet; each body row gives a
    character followed by its outgoing probabilities in header order.
    """
    reader = csv.reader(io.StringIO(text))
    table = [row for row in reader if row and any(cell.strip() for cell in row)]
    if not table:
        raise DataError("empty confusion CSV")
    header = [cell.strip() for cell in table[0]]
    alphabet = header[1:]
    if len(table) - 1 != len(alphabet):
        raise DataError(
            f"{len(table) - 1} body rows for {len(alphabet)} header characters"
        )
    p = np.zeros((len(alphabet), len(alphabet)), dtype=np.float64)
    for i, row in enumerate(table[1:]):
        cells = [cell.strip() for cell in row]
        if cells[0] != alphabet[i]:
            raise DataError(
                f"row {i + 1} is labeled {cells[0]!r}, expected {alphabet[i]!r}"
            )
        if len(cells) != len(alphabet) + 1:
            raise DataError(f"row {cells[0]!r} has {len(cells) - 1} probabilities")
        try:
            p[i] = [float(x) for x in cells[1:]]
        except ValueError as exc:
            raise DataError(f"row {cells[0]!r}: {exc}") from None
    return ConfusionMatrix(alphabet, p)


def save_confusion_csv(cm: ConfusionMatrix) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow([""] + list(cm.alphabet))
    for i, c in enumerate(cm.alphabet):
        writer.writerow([c] + [repr(float(x)) for x in cm.p[i]])
    return out.getvalue()


def load_lexicon(text):
    """One word per line; blank lines and # comments ignored; lowercased."""
    words = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        w = raw.strip()
        if not w or w.startswith("#"):
            continue
        if any(ch.isspace() for ch in w):
            raise DataError(f"line {lineno}: lexicon entry {w!r} contains whitespace")
        words.add(w.lower())
    if not words:
        raise DataError("lexicon has no words")
    return tuple(sorted(words))


class ScribeConfig:
    """Everything one artificial scribe needs: noise model, lexicon, seed."""

    def __init__(
        self,
        error_rate,
        confusion=None,
        lexicon=(),
        correction_enabled=True,
        seed=0,
    ):
        if not 0.0 <= error_rate <= 1.0:
            raise ConfigError(f"error_rate {error_rate} outside [0, 1]")
        self.error_rate = float(error_rate)
        if confusion is None:
            confusion = uniform_class_confusion(fidelity=1.0 - self.error_rate)
        self.confusion = confusion
        entries = sorted({str(w).lower() for w in lexicon})
        if any(any(ch.isspace() for ch in w) or not w for w in entries):
            raise ConfigError("lexicon entries must be non-empty single words")
        if correction_enabled and not entries:
            raise ConfigError("correction enabled but lexicon is empty")
        self.lexicon = tuple(entries)
        self.correction_enabled = bool(correction_enabled)
        self.seed = int(seed)
        self._lexset = frozenset(entries)
        self._tie_cache = {}

    def knows(self, word):
        return word.lower() in self._lexset

    def correct(self, word, rng):
        """Nearest-lexicon replacement for an out-of-lexicon word.

        All minimal-distance candidates are equally likely; the scribe has
        no other context to prefer one.
        """
        low = word.lower()
        if not self.correction_enabled or low in self._lexset:
            return word
        ties = self._tie_cache.get(low)
        if ties is None:
            best = None
            keep = []
            for cand in self.lexicon:
                if best is not None and abs(len(cand) - len(low)) > best:
                    continue
                d = damerau_levenshtein(low, cand)
                if best is None or d < best:
                    best = d
                    keep = [cand]
                elif d == best:
                    keep.append(cand)
            ties = tuple(keep)
            self._tie_cache[low] = ties
        if len(ties) == 1:
            return ties[0]
        return ties[int(rng.integers(len(ties)))]


def copy_text(words, cfg: ScribeConfig, rng, edits=None):
    """One scribal copy of `words`: character confusion, then correction.

    Characters outside the confusion alphabet (spaces never even reach us:
    the text is a word sequence) are exempt, so word count and word order
    are conserved and downstream alignment stays positional.  `edits`, when
    given, is a list that collects one dict per applied change.
    """
    words = tuple(words)
    if not words:
        raise EmptyText("cannot copy an empty text")
    if any(not w for w in words):
        raise EmptyText("empty word in text")
    out = list(words)

    if cfg.error_rate > 0.0:
        lengths = np.array([len(w) for w in words], dtype=np.int64)
        starts = np.concatenate(([0], np.cumsum(lengths)))
        u = rng.random(int(starts[-1]))
        mutable = {}
        for pos in np.nonzero(u < cfg.error_rate)[0]:
            wi = int(np.searchsorted(starts, pos, side="right")) - 1
            ci = int(pos - starts[wi])
            old = words[wi][ci]
            new = cfg.confusion.replace(old, rng)
            if new is None:
                continue
            buf = mutable.get(wi)
            if buf is None:
                buf = mutable[wi] = list(words[wi])
            buf[ci] = new
            if edits is not None:
                edits.append(
                    {"kind": "confusion", "word": wi, "char": ci, "old": old, "new": new}
                )
        for wi, buf in mutable.items():
            out[wi] = "".join(buf)

    if cfg.correction_enabled:
        for wi, w in enumerate(out):
            if cfg.knows(w):
                continue
            fixed = cfg.correct(w, rng)
            if fixed != w:
                if edits is not None:
                    edits.append(
                        {"kind": "correction", "word": wi, "old": w, "new": fixed}
                    )
                out[wi] = fixed

    return tuple(out)


@dataclass
class SimulatedTradition:
    """A complete artificial tradition with its ground truth.

    texts[node] is that witness's word tuple; collation columns follow
    sorted node order; provenance[(parent, child)] lists the edits applied
    on that edge in application order.
    """

    stemma: Stemma
    texts: dict
    collation: Collation
    provenance: dict = field(default_factory=dict)


def _edge_seed(seed, parent, child):
    digest = hashlib.sha256(f"{seed}\n{parent}\n{child}".encode("utf-8")).digest()
    return int.from_bytes(digest[:16], "little")


def simulate_tradition(stemma: Stemma, root_text, cfg: ScribeConfig):
    """Copy `root_text` down every edge of `stemma`, collecting all copies.

    Every edge draws from its own RNG seeded by (cfg.seed, parent, child),
    so the result is independent of traversal order and sibling subtrees
    could be simulated in parallel without changing a single character.
    """
    if isinstance(root_text, str):
        words = tuple(root_text.split())
    else:
        words = tuple(root_text)
    if not words:
        raise EmptyText("root text has no words")

    texts = {stemma.root: words}
    provenance = {}
    stack = [stemma.root]
    while stack:
        node = stack.pop()
        for child in stemma.children(node):
            rng = np.random.default_rng(_edge_seed(cfg.seed, node, child))
            applied = []
            texts[child] = copy_text(texts[node], cfg, rng, edits=applied)
            provenance[(node, child)] = applied
            stack.append(child)

    witnesses = tuple(sorted(stemma.nodes))
    rows = tuple(
        tuple(texts[w][r] for w in witnesses) for r in range(len(words))
    )
    collation = Collation(witnesses=witnesses, rows=rows)
    return SimulatedTradition(
        stemma=stemma, texts=texts, collation=collation, provenance=provenance
    )


def generate_stemma(n_nodes, max_children, seed):
    """Random rooted tree by sequential uniform attachment.

    Each new node picks its parent uniformly among the nodes that still
    have spare child capacity; ids are zero-padded so sorted order equals
    creation order.
    """
    if n_nodes < 2:
        raise BadParams(f"need at least 2 nodes, got {n_nodes}")
    if max_children < 1:
        raise BadParams(f"max_children must be >= 1, got {max_children}")
    rng = np.random.default_rng(seed)
    width = len(str(n_nodes - 1))
    names = [f"n{i:0{width}d}" for i in range(n_nodes)]
    open_slots = [0]
    child_count = [0] * n_nodes
    edges = []
    for new in range(1, n_nodes):
        k = int(rng.integers(len(open_slots)))
        parent = open_slots[k]
        edges.append((names[parent], names[new]))
        child_count[parent] += 1
        if child_count[parent] >= max_children:
            open_slots[k] = open_slots[-1]
            open_slots.pop()
        open_slots.append(new)
    return Stemma(edges)
