"""Pairwise training instances and hold-one-leaf-out splits.

Every unordered witness pair becomes one instance: a token sequence
comparing the two columns row by row (the source) and the pair's tree
edge distance (the target).  Holding out one leaf sends exactly the
pairs involving it to the test set; the rest split into train/valid.
"""

from __future__ import annotations

import itertools
import json
import os
from dataclasses import dataclass

import numpy as np

from .collation import (
    Collation,
    LetterCollation,
    places_of_variation,
)
from .errors import ConfigError, DataError
from .stemma import NotALeaf, Stemma, UnknownNode, distance_matrix

DIFF_TYPES = ("binary", "variants_sorted", "variants_unsorted", "words")
INPUT_TYPES = ("all_places", "variation_places")

SAME = "SAME"
DIFF = "DIFF"


class MissingWitnessColumn(DataError):
    pass


class EncodingMismatch(DataError):
    pass


class EmptyInput(DataError):
    pass


class ValidTooLarge(DataError):
    pass


@dataclass(frozen=True)
class EncodingConfig:
    """How a witness pair's rows become tokens.

    diff_type: binary (SAME/DIFF), variants_sorted ("A:C", smaller letter
    first), variants_unsorted ("C:A", pair order), or words ("the:thee").
    input_type: all_places keeps every row, variation_places only rows
    where some two witnesses disagree.
    """

    diff_type: str = "variants_sorted"
    input_type: str = "all_places"

    def __post_init__(self):
        if self.diff_type not in DIFF_TYPES:
            raise ConfigError(
                f"diff_type {self.diff_type!r} not one of {DIFF_TYPES}"
            )
        if self.input_type not in INPUT_TYPES:
            raise ConfigError(
                f"input_type {self.input_type!r} not one of {INPUT_TYPES}"
            )


@dataclass(frozen=True)
class PairInstance:
    """One witness pair: source token sequence plus distance token."""

    a: str
    b: str
    source: tuple
    target: str

    def __post_init__(self):
        if not self.a < self.b:
            raise DataError(
                f"pair ({self.a!r}, {self.b!r}) not in canonical order a < b"
            )
        try:
            d = int(self.target)
        except ValueError:
            raise DataError(f"target {self.target!r} is not an integer") from None
        if d < 1:
            raise DataError(f"target distance {d} < 1")

    def involves(self, witness):
        return witness == self.a or witness == self.b


def _selected_rows(c: Collation, cfg: EncodingConfig):
    if cfg.input_type == "variation_places":
        return [c.rows[r] for r in places_of_variation(c)]
    return list(c.rows)


def _pair_tokens(rows, ia, ib, diff_type):
    tokens = []
    for row in rows:
        x, y = row[ia], row[ib]
        if diff_type == "binary":
            tokens.append(SAME if x == y else DIFF)
        elif diff_type == "variants_sorted":
            tokens.append(f"{x}:{y}" if x <= y else f"{y}:{x}")
        else:
            # variants_unsorted and words both keep pair order verbatim
            tokens.append(f"{x}:{y}")
    return tuple(tokens)


def _check_encoding_input(c, cfg):
    if cfg.diff_type in ("variants_sorted", "variants_unsorted"):
        if not isinstance(c, LetterCollation):
            raise EncodingMismatch(
                f"diff_type {cfg.diff_type!r} needs a letter-recoded collation"
            )


def encode_pair(c: Collation, a, b, cfg: EncodingConfig):
    """Token sequence comparing witnesses `a` and `b`, one token per row."""
    _check_encoding_input(c, cfg)
    ia = c.column_index(a)
    ib = c.column_index(b)
    return _pair_tokens(_selected_rows(c, cfg), ia, ib, cfg.diff_type)


def generate_instances(c: Collation, stemma: Stemma, cfg: EncodingConfig):
    """One PairInstance per unordered pair of stemma nodes, canonical order.

    Targets always come from the tree, never from text similarity.
    """
    _check_encoding_input(c, cfg)
    missing = sorted(n for n in stemma.nodes if n not in c.witnesses)
    if missing:
        raise MissingWitnessColumn(
            f"stemma nodes {missing} have no collation column"
        )
    rows = _selected_rows(c, cfg)
    if not rows:
        raise EmptyInput(
            "no rows selected: collation has no places of variation"
        )
    columns = {n: c.column_index(n) for n in stemma.nodes}
    dm = distance_matrix(stemma)
    instances = []
    for a, b in itertools.combinations(sorted(stemma.nodes), 2):
        instances.append(
            PairInstance(
                a=a,
                b=b,
                source=_pair_tokens(rows, columns[a], columns[b], cfg.diff_type),
                target=str(dm.get(a, b)),
            )
        )
    return instances


@dataclass(frozen=True)
class HoldoutSplit:
    """Train/valid/test partition for one held-back leaf."""

    held_leaf: str
    train: tuple
    valid: tuple
    test: tuple
    seed: int

    def __post_init__(self):
        if not self.train:
            raise DataError("empty training set")
        if not self.test:
            raise DataError(f"no test instances involve {self.held_leaf!r}")
        for inst in itertools.chain(self.train, self.valid):
            if inst.involves(self.held_leaf):
                raise DataError(
                    f"instance ({inst.a}, {inst.b}) leaks the held leaf"
                )
        for inst in self.test:
            if not inst.involves(self.held_leaf):
                raise DataError(
                    f"test instance ({inst.a}, {inst.b}) does not involve "
                    f"{self.held_leaf!r}"
                )
        overlap = {(i.a, i.b) for i in self.train} & {
            (i.a, i.b) for i in self.valid
        }
        if overlap:
            raise DataError(f"train/valid overlap on pairs {sorted(overlap)}")


def holdout_split(instances, held_leaf, valid_size=5, seed=0, stemma=None):
    """Partition instances for one held-back leaf.

    test = exactly the pairs involving `held_leaf`; `valid_size` of the
    remaining pairs are drawn uniformly without replacement (seeded), the
    rest train.  5 and 10 are the canonical validation sizes.
    """
    if stemma is not None:
        if held_leaf not in stemma:
            raise UnknownNode(f"unknown node {held_leaf!r}")
        if not stemma.is_leaf(held_leaf):
            raise NotALeaf(f"{held_leaf!r} is not a leaf")
    if valid_size < 1:
        raise ConfigError(f"valid_size must be >= 1, got {valid_size}")
    instances = list(instances)
    test = tuple(i for i in instances if i.involves(held_leaf))
    rest = [i for i in instances if not i.involves(held_leaf)]
    if valid_size >= len(rest):
        raise ValidTooLarge(
            f"valid_size {valid_size} leaves no training data "
            f"({len(rest)} non-test instances)"
        )
    rng = np.random.default_rng(seed)
    picked = set(rng.choice(len(rest), size=valid_size, replace=False).tolist())
    valid = tuple(inst for i, inst in enumerate(rest) if i in picked)
    train = tuple(inst for i, inst in enumerate(rest) if i not in picked)
    return HoldoutSplit(
        held_leaf=held_leaf, train=train, valid=valid, test=test, seed=int(seed)
    )


# --- on-disk form: <split>.src / <split>.tgt + manifest.json -------------

SPLIT_NAMES = ("train", "valid", "test")

MANIFEST_NAME = "manifest.json"


def split_manifest(split: HoldoutSplit, enc: EncodingConfig) -> dict:
    return {
        "held_leaf": split.held_leaf,
        "seed": split.seed,
        "encoding": {
            "diff_type": enc.diff_type,
            "input_type": enc.input_type,
        },
        "counts": {name: len(getattr(split, name)) for name in SPLIT_NAMES},
        "pairs": {
            name: [[i.a, i.b] for i in getattr(split, name)]
            for name in SPLIT_NAMES
        },
    }


def write_split_dir(split: HoldoutSplit, enc: EncodingConfig, out_dir):
    """Write train/valid/test as line-aligned .src/.tgt files + manifest."""
    os.makedirs(out_dir, exist_ok=True)
    for name in SPLIT_NAMES:
        insts = getattr(split, name)
        src = "".join(" ".join(i.source) + "\n" for i in insts)
        tgt = "".join(i.target + "\n" for i in insts)
        with open(os.path.join(out_dir, name + ".src"), "w", encoding="utf-8") as f:
            f.write(src)
        with open(os.path.join(out_dir, name + ".tgt"), "w", encoding="utf-8") as f:
            f.write(tgt)
    manifest = split_manifest(split, enc)
    with open(os.path.join(out_dir, MANIFEST_NAME), "w", encoding="utf-8") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
        f.write("\n")
    return manifest


def read_split_dir(in_dir):
    """Rebuild (HoldoutSplit, EncodingConfig, manifest) from a split dir."""
    path = os.path.join(in_dir, MANIFEST_NAME)
    try:
        with open(path, encoding="utf-8") as f:
            manifest = json.load(f)
    except FileNotFoundError:
        raise DataError(f"no {MANIFEST_NAME} in {in_dir}") from None
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: {exc}") from None
    enc = EncodingConfig(**manifest["encoding"])
    parts = {}
    for name in SPLIT_NAMES:
        with open(os.path.join(in_dir, name + ".src"), encoding="utf-8") as f:
            src_lines = f.read().splitlines()
        with open(os.path.join(in_dir, name + ".tgt"), encoding="utf-8") as f:
            tgt_lines = f.read().splitlines()
        pairs = manifest["pairs"][name]
        if not len(src_lines) == len(tgt_lines) == len(pairs):
            raise DataError(
                f"{name}: {len(src_lines)} source lines, {len(tgt_lines)} "
                f"target lines, {len(pairs)} manifest pairs"
            )
        if len(pairs) != manifest["counts"][name]:
            raise DataError(
                f"{name}: manifest count {manifest['counts'][name]} "
                f"!= {len(pairs)} pairs"
            )
        parts[name] = tuple(
            PairInstance(
                a=a, b=b, source=tuple(src.split()), target=tgt.strip()
            )
            for (a, b), src, tgt in zip(pairs, src_lines, tgt_lines)
        )
    split = HoldoutSplit(
        held_leaf=manifest["held_leaf"],
        train=parts["train"],
        valid=parts["valid"],
        test=parts["test"],
        seed=int(manifest["seed"]),
    )
    return split, enc, manifest
