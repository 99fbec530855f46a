import pytest

from stemmaplace.collation import (
    GAP,
    Collation,
    DuplicateWitness,
    EmptyCollation,
    LetterCollation,
    RaggedRow,
    TooManyVariants,
    UnknownArchetype,
    UnknownWitness,
    load_collation,
    places_of_variation,
    recode_letters,
    save_collation,
)
from stemmaplace.errors import DataError


class TestConstruction:
    def test_basic(self, tiny_collation):
        assert tiny_collation.witnesses == ("W1", "W2", "W3")
        assert len(tiny_collation) == 4

    def test_needs_two_witnesses(self):
        with pytest.raises(DataError):
            Collation(witnesses=("only",), rows=(("x",),))

    def test_duplicate_witness(self):
        with pytest.raises(DuplicateWitness):
            Collation(witnesses=("W", "W"), rows=(("a", "b"),))

    def test_empty_rows(self):
        with pytest.raises(EmptyCollation):
            Collation(witnesses=("A", "B"), rows=())

    def test_ragged_row(self):
        with pytest.raises(RaggedRow):
            Collation(witnesses=("A", "B"), rows=(("x", "y"), ("z",)))

    def test_column(self, tiny_collation):
        assert tiny_collation.column("W2") == ("cat", "doc", "sun", "ink")

    def test_column_unknown(self, tiny_collation):
        with pytest.raises(UnknownWitness):
            tiny_collation.column("W9")


class TestLoadSave:
    def test_load(self, demo_collation_text):
        c = load_collation(demo_collation_text)
        assert c.witnesses == ("W1", "W2", "W3")
        assert c.rows[1] == ("cat", "cat", "bat")

    def test_round_trip(self, demo_collation_text):
        c = load_collation(demo_collation_text)
        assert save_collation(c) == demo_collation_text
        assert load_collation(save_collation(c)).rows == c.rows

    def test_cells_stripped_case_preserved(self):
        c = load_collation("A\tB\n Cat \tDOG\n")
        assert c.rows[0] == ("Cat", "DOG")

    def test_ragged_line_reports_line_number(self):
        with pytest.raises(RaggedRow) as err:
            load_collation("A\tB\nx\ty\nonly-one\n")
        assert "3" in str(err.value)

    def test_empty_cell_rejected(self):
        with pytest.raises(DataError) as err:
            load_collation("A\tB\nx\t\n")
        assert GAP in str(err.value)

    def test_gap_cell_accepted(self):
        c = load_collation("A\tB\nx\t-\n")
        assert c.rows[0] == ("x", GAP)

    def test_trailing_blank_lines_ignored(self):
        c = load_collation("A\tB\nx\ty\n\n\n")
        assert len(c) == 1

    def test_header_only(self):
        with pytest.raises(EmptyCollation):
            load_collation("A\tB\n")


class TestPlacesOfVariation:
    def test_basic(self, tiny_collation):
        assert places_of_variation(tiny_collation) == [1, 2, 3]

    def test_constant_collation(self):
        c = Collation(witnesses=("A", "B"), rows=(("x", "x"), ("y", "y")))
        assert places_of_variation(c) == []

    def test_gap_counts_as_distinct(self):
        c = Collation(witnesses=("A", "B"), rows=(("x", GAP),))
        assert places_of_variation(c) == [0]


class TestRecodeLetters:
    def test_most_frequent_gets_a(self):
        c = Collation(
            witnesses=("A", "B", "C"),
            rows=(("dog", "dog", "cat"),),
        )
        lc = recode_letters(c)
        assert isinstance(lc, LetterCollation)
        assert lc.rows[0] == ("A", "A", "B")

    def test_frequency_ties_broken_by_first_seen(self):
        c = Collation(witnesses=("A", "B"), rows=(("zzz", "aaa"),))
        lc = recode_letters(c)
        assert lc.rows[0] == ("A", "B")

    def test_archetype_reading_gets_a(self):
        c = Collation(
            witnesses=("W1", "W2", "W3"),
            rows=(("cat", "dog", "dog"),),
        )
        lc = recode_letters(c, archetype="W1")
        assert lc.rows[0] == ("A", "B", "B")

    def test_archetype_gap_passthrough(self):
        c = Collation(witnesses=("W1", "W2"), rows=((GAP, "dog"),))
        lc = recode_letters(c, archetype="W1")
        assert lc.rows[0] == (GAP, "A")

    def test_unknown_archetype(self, tiny_collation):
        with pytest.raises(UnknownArchetype):
            recode_letters(tiny_collation, archetype="W9")

    def test_gap_passthrough(self, tiny_collation):
        lc = recode_letters(tiny_collation)
        assert lc.rows[3][0] == GAP

    def test_same_reading_same_letter(self, tiny_collation):
        lc = recode_letters(tiny_collation)
        row = lc.rows[1]  # dog / doc / dog
        assert row[0] == row[2] != row[1]

    def test_per_row_independence(self):
        c = Collation(
            witnesses=("A", "B"),
            rows=(("x", "y"), ("y", "x")),
        )
        lc = recode_letters(c)
        # each row recodes on its own; both rows start fresh at "A"
        assert lc.rows[0] == ("A", "B")
        assert lc.rows[1] == ("A", "B")

    def test_too_many_variants(self):
        witnesses = tuple(f"W{i:02d}" for i in range(27))
        rows = (tuple(f"word{i}" for i in range(27)),)
        with pytest.raises(TooManyVariants):
            recode_letters(Collation(witnesses=witnesses, rows=rows))

    def test_27_witnesses_26_variants_ok(self):
        witnesses = tuple(f"W{i:02d}" for i in range(27))
        row = tuple(f"word{i}" for i in range(26)) + ("word0",)
        lc = recode_letters(Collation(witnesses=witnesses, rows=(row,)))
        assert lc.rows[0][0] == lc.rows[0][26] == "A"
