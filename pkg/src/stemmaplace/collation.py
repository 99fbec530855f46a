"""Collation handling: the aligned readings of all witnesses.

A collation is the philological analogue of a multiple sequence alignment:
rows are text positions, columns are witnesses, cells are readings.  The
canonical on-disk form is TSV with a witness-id header row.  ``-`` is the
reserved gap marker and compares like any other reading (two gaps agree).
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import DataError

GAP = "-"

_LETTERS = "ABCDEFGHIJKLMNOPQRSTUVWXYZ"


class RaggedRow(DataError):
    pass


class DuplicateWitness(DataError):
    pass


class EmptyCollation(DataError):
    pass


class UnknownWitness(DataError):
    pass


class UnknownArchetype(DataError):
    pass


class TooManyVariants(DataError):
    pass


@dataclass(frozen=True)
class Collation:
    """Aligned readings: `rows[r][i]` is witness `witnesses[i]` at position r."""

    witnesses: tuple
    rows: tuple

    def __post_init__(self):
        if len(self.witnesses) < 2:
            raise EmptyCollation("need at least 2 witnesses")
        if len(set(self.witnesses)) != len(self.witnesses):
            dupes = sorted({w for w in self.witnesses if self.witnesses.count(w) > 1})
            raise DuplicateWitness(f"duplicated witness ids {dupes}")
        if not self.rows:
            raise EmptyCollation("no alignment rows")
        width = len(self.witnesses)
        for r, row in enumerate(self.rows):
            if len(row) != width:
                raise RaggedRow(f"row {r} has {len(row)} cells, expected {width}")

    def column_index(self, witness):
        try:
            return self.witnesses.index(witness)
        except ValueError:
            raise UnknownWitness(f"unknown witness {witness!r}") from None

    def column(self, witness):
        i = self.column_index(witness)
        return tuple(row[i] for row in self.rows)

    def __len__(self):
        return len(self.rows)


@dataclass(frozen=True)
class LetterCollation(Collation):
    """Collation with every reading recoded to one letter per row.

    Within each row, equal source readings share a letter and distinct ones
    differ; ``A`` marks the archetype's reading where one was designated.
    """


def load_collation(tsv_text: str) -> Collation:
    """Parse collation TSV: header = witness ids, one alignment row per line.

    Readings are stripped of surrounding whitespace, case preserved.  Empty
    cells are rejected; lacunae must be written as the explicit gap ``-``.
    """
    lines = tsv_text.splitlines()
    while lines and not lines[-1].strip():
        lines.pop()
    if not lines:
        raise EmptyCollation("empty input")
    witnesses = tuple(w.strip() for w in lines[0].split("\t"))
    if any(not w for w in witnesses):
        raise EmptyCollation(f"blank witness id in header {lines[0]!r}")
    rows = []
    for lineno, raw in enumerate(lines[1:], start=2):
        cells = tuple(c.strip() for c in raw.split("\t"))
        if len(cells) != len(witnesses):
            raise RaggedRow(
                f"line {lineno}: {len(cells)} cells for {len(witnesses)} witnesses"
            )
        if any(not c for c in cells):
            raise DataError(f"line {lineno}: empty reading; use {GAP!r} for gaps")
        rows.append(cells)
    return Collation(witnesses=witnesses, rows=tuple(rows))


def save_collation(c: Collation) -> str:
    lines = ["\t".join(c.witnesses)]
    lines.extend("\t".join(row) for row in c.rows)
    return "\n".join(lines) + "\n"


def places_of_variation(c: Collation):
    """Indices of rows where at least two witnesses disagree.

    Gaps count as a reading of their own, so text-vs-gap is variation.
    """
    return [r for r, row in enumerate(c.rows) if len(set(row)) > 1]


def recode_letters(c: Collation, archetype=None) -> LetterCollation:
    """Recode each row's readings to single letters.

    If `archetype` names a witness, its reading takes ``A``; the remaining
    distinct readings get letters by descending frequency in the row, ties
    broken by first occurrence in witness order.  Without an archetype the
    frequency rule assigns all letters.  Gaps pass through unchanged.
    """
    arch_col = None
    if archetype is not None:
        if archetype not in c.witnesses:
            raise UnknownArchetype(f"unknown archetype witness {archetype!r}")
        arch_col = c.witnesses.index(archetype)

    out_rows = []
    for r, row in enumerate(c.rows):
        assignment = {}
        pool = iter(_LETTERS)
        if arch_col is not None and row[arch_col] != GAP:
            assignment[row[arch_col]] = next(pool)
        counts = {}
        first_seen = {}
        for i, reading in enumerate(row):
            if reading == GAP or reading in assignment:
                continue
            counts[reading] = counts.get(reading, 0) + 1
            first_seen.setdefault(reading, i)
        ranked = sorted(counts, key=lambda v: (-counts[v], first_seen[v]))
        for reading in ranked:
            try:
                assignment[reading] = next(pool)
            except StopIteration:
                raise TooManyVariants(
                    f"row {r} has more than {len(_LETTERS)} distinct readings"
                ) from None
        out_rows.append(
            tuple(GAP if v == GAP else assignment[v] for v in row)
        )
    return LetterCollation(witnesses=c.witnesses, rows=tuple(out_rows))
