import itertools

import pytest

from stemmaplace.collation import Collation, recode_letters
from stemmaplace.errors import ConfigError, DataError
from stemmaplace.pairgen import (
    DIFF,
    SAME,
    EncodingConfig,
    EncodingMismatch,
    EmptyInput,
    MissingWitnessColumn,
    PairInstance,
    ValidTooLarge,
    encode_pair,
    generate_instances,
    holdout_split,
    read_split_dir,
    split_manifest,
    write_split_dir,
)
from stemmaplace.scribesim import ScribeConfig, simulate_tradition
from stemmaplace.stemma import NotALeaf, Stemma, UnknownNode, distance_matrix


@pytest.fixture(scope="module")
def tradition():
    edges = [("R", "A"), ("R", "B")]
    for top in ("A", "B"):
        for i in (1, 2, 3):
            mid = f"{top}{i}"
            edges.append((top, mid))
            edges.append((mid, f"{mid}x"))
            edges.append((mid, f"{mid}y"))
    stemma = Stemma(edges)
    import numpy as np

    rng = np.random.default_rng(55)
    letters = np.array(list("abcdefghijklmnopqrstuvwxyz"))
    words = ["".join(rng.choice(letters, size=5)) for _ in range(120)]
    cfg = ScribeConfig(error_rate=0.02, correction_enabled=False, seed=6)
    trad = simulate_tradition(stemma, " ".join(words), cfg)
    return stemma, recode_letters(trad.collation)


class TestEncodingConfig:
    def test_defaults(self):
        cfg = EncodingConfig()
        assert cfg.diff_type == "variants_sorted"
        assert cfg.input_type == "all_places"

    def test_rejects_unknown(self):
        with pytest.raises(ConfigError):
            EncodingConfig(diff_type="nonsense")
        with pytest.raises(ConfigError):
            EncodingConfig(input_type="nonsense")


class TestEncodePair:
    def test_binary(self, tiny_collation):
        cfg = EncodingConfig(diff_type="binary", input_type="all_places")
        tokens = encode_pair(tiny_collation, "W1", "W2", cfg)
        assert tokens == (SAME, DIFF, SAME, DIFF)

    def test_variation_places_selects_rows(self, tiny_collation):
        cfg = EncodingConfig(diff_type="binary", input_type="variation_places")
        tokens = encode_pair(tiny_collation, "W1", "W3", cfg)
        # variation rows are 1,2,3; W1 vs W3 differ only at rows 2,3
        assert tokens == (SAME, DIFF, DIFF)

    def test_variants_sorted_orders_within_token(self, tiny_letter_collation):
        cfg = EncodingConfig(diff_type="variants_sorted")
        ab = encode_pair(tiny_letter_collation, "W1", "W2", cfg)
        ba = encode_pair(tiny_letter_collation, "W2", "W1", cfg)
        assert ab == ba
        assert all(t[0] <= t[2] for t in ab)

    def test_variants_unsorted_keeps_order(self, tiny_letter_collation):
        cfg = EncodingConfig(diff_type="variants_unsorted")
        ab = encode_pair(tiny_letter_collation, "W1", "W2", cfg)
        ba = encode_pair(tiny_letter_collation, "W2", "W1", cfg)
        assert ab != ba
        assert [t[::-1] for t in ab] == list(ba)

    def test_words_verbatim(self, tiny_collation):
        cfg = EncodingConfig(diff_type="words")
        tokens = encode_pair(tiny_collation, "W1", "W2", cfg)
        assert tokens[0] == "cat:cat"
        assert tokens[1] == "dog:doc"

    def test_variants_need_letter_collation(self, tiny_collation):
        cfg = EncodingConfig(diff_type="variants_sorted")
        with pytest.raises(EncodingMismatch):
            encode_pair(tiny_collation, "W1", "W2", cfg)

    def test_missing_witness(self, tiny_collation):
        from stemmaplace.collation import UnknownWitness

        cfg = EncodingConfig(diff_type="binary")
        with pytest.raises(UnknownWitness):
            encode_pair(tiny_collation, "W1", "W9", cfg)

    def test_constant_collation_has_no_variation_rows(self):
        c = Collation(witnesses=("A", "B"), rows=(("x", "x"),))
        cfg = EncodingConfig(diff_type="binary", input_type="variation_places")
        assert encode_pair(c, "A", "B", cfg) == ()
        with pytest.raises(EmptyInput):
            generate_instances(c, Stemma([("A", "B")]), cfg)


class TestGenerateInstances:
    def test_pair_count_21_witnesses(self, tradition):
        stemma, collation = tradition
        instances = generate_instances(collation, stemma, EncodingConfig())
        assert len(instances) == 210  # C(21, 2)

    def test_targets_match_distances(self, tradition):
        stemma, collation = tradition
        dm = distance_matrix(stemma)
        for inst in generate_instances(collation, stemma, EncodingConfig()):
            assert int(inst.target) == dm.get(inst.a, inst.b)

    def test_canonical_pair_order(self, tradition):
        stemma, collation = tradition
        for inst in generate_instances(collation, stemma, EncodingConfig()):
            assert inst.a < inst.b

    def test_every_unordered_pair_once(self, tradition):
        stemma, collation = tradition
        instances = generate_instances(collation, stemma, EncodingConfig())
        pairs = {(i.a, i.b) for i in instances}
        expected = set(itertools.combinations(sorted(stemma.nodes), 2))
        assert pairs == expected

    def test_stemma_nodes_must_have_columns(self, tradition):
        stemma, collation = tradition
        bigger = Stemma(list(stemma.edges) + [("R", "EXTRA")])
        with pytest.raises(MissingWitnessColumn):
            generate_instances(collation, bigger, EncodingConfig())


class TestPairInstance:
    def test_canonical_enforced(self):
        with pytest.raises(DataError):
            PairInstance(a="Z", b="A", source=("x",), target="1")

    def test_target_positive_int(self):
        with pytest.raises(DataError):
            PairInstance(a="A", b="B", source=("x",), target="zero")
        with pytest.raises(DataError):
            PairInstance(a="A", b="B", source=("x",), target="0")

    def test_involves(self):
        inst = PairInstance(a="A", b="B", source=("x",), target="2")
        assert inst.involves("A") and inst.involves("B")
        assert not inst.involves("C")


class TestHoldoutSplit:
    def test_counts(self, tradition):
        stemma, collation = tradition
        instances = generate_instances(collation, stemma, EncodingConfig())
        leaf = stemma.leaves()[0]
        split = holdout_split(instances, leaf, valid_size=5, seed=0,
                              stemma=stemma)
        assert len(split.test) == 20
        assert len(split.train) + len(split.valid) == 190
        assert len(split.valid) == 5
        assert len(split.train) == 185

    def test_test_set_is_exactly_held_leaf_pairs(self, tradition):
        stemma, collation = tradition
        instances = generate_instances(collation, stemma, EncodingConfig())
        leaf = stemma.leaves()[3]
        split = holdout_split(instances, leaf, valid_size=5, seed=0,
                              stemma=stemma)
        assert all(i.involves(leaf) for i in split.test)
        assert not any(i.involves(leaf) for i in split.train)
        assert not any(i.involves(leaf) for i in split.valid)

    def test_seed_changes_validation_choice(self, tradition):
        stemma, collation = tradition
        instances = generate_instances(collation, stemma, EncodingConfig())
        leaf = stemma.leaves()[0]
        a = holdout_split(instances, leaf, valid_size=5, seed=0, stemma=stemma)
        b = holdout_split(instances, leaf, valid_size=5, seed=1, stemma=stemma)
        assert a.valid != b.valid
        assert set(a.train) | set(a.valid) == set(b.train) | set(b.valid)

    def test_same_seed_reproduces(self, tradition):
        stemma, collation = tradition
        instances = generate_instances(collation, stemma, EncodingConfig())
        leaf = stemma.leaves()[0]
        a = holdout_split(instances, leaf, valid_size=5, seed=0, stemma=stemma)
        b = holdout_split(instances, leaf, valid_size=5, seed=0, stemma=stemma)
        assert a == b

    def test_not_a_leaf(self, tradition):
        stemma, collation = tradition
        instances = generate_instances(collation, stemma, EncodingConfig())
        with pytest.raises(NotALeaf):
            holdout_split(instances, "A", valid_size=5, seed=0, stemma=stemma)

    def test_unknown_leaf(self, tradition):
        stemma, collation = tradition
        instances = generate_instances(collation, stemma, EncodingConfig())
        with pytest.raises(UnknownNode):
            holdout_split(instances, "ghost", valid_size=5, seed=0,
                          stemma=stemma)

    def test_valid_too_large(self, tradition):
        stemma, collation = tradition
        instances = generate_instances(collation, stemma, EncodingConfig())
        leaf = stemma.leaves()[0]
        with pytest.raises(ValidTooLarge):
            holdout_split(instances, leaf, valid_size=190, seed=0,
                          stemma=stemma)

    def test_valid_size_must_be_positive(self, tradition):
        stemma, collation = tradition
        instances = generate_instances(collation, stemma, EncodingConfig())
        with pytest.raises(ConfigError):
            holdout_split(instances, stemma.leaves()[0], valid_size=0, seed=0,
                          stemma=stemma)


class TestSplitFiles:
    def test_round_trip(self, tradition, tmp_path):
        stemma, collation = tradition
        enc = EncodingConfig()
        instances = generate_instances(collation, stemma, enc)
        leaf = stemma.leaves()[0]
        split = holdout_split(instances, leaf, valid_size=5, seed=3,
                              stemma=stemma)
        write_split_dir(split, enc, tmp_path / "s")
        back, back_enc, manifest = read_split_dir(tmp_path / "s")
        assert back == split
        assert back_enc == enc
        assert manifest == split_manifest(split, enc)

    def test_file_layout(self, tradition, tmp_path):
        stemma, collation = tradition
        enc = EncodingConfig()
        instances = generate_instances(collation, stemma, enc)
        split = holdout_split(instances, stemma.leaves()[0], valid_size=5,
                              seed=3, stemma=stemma)
        write_split_dir(split, enc, tmp_path / "s")
        names = sorted(p.name for p in (tmp_path / "s").iterdir())
        assert names == [
            "manifest.json",
            "test.src", "test.tgt",
            "train.src", "train.tgt",
            "valid.src", "valid.tgt",
        ]

    def test_src_lines_are_space_joined_tokens(self, tradition, tmp_path):
        stemma, collation = tradition
        enc = EncodingConfig()
        instances = generate_instances(collation, stemma, enc)
        split = holdout_split(instances, stemma.leaves()[0], valid_size=5,
                              seed=3, stemma=stemma)
        write_split_dir(split, enc, tmp_path / "s")
        first = (tmp_path / "s" / "train.src").read_text().splitlines()[0]
        assert tuple(first.split(" ")) == split.train[0].source

    def test_manifest_contents(self, tradition):
        stemma, collation = tradition
        enc = EncodingConfig()
        instances = generate_instances(collation, stemma, enc)
        split = holdout_split(
            instances, stemma.leaves()[0], valid_size=5, seed=3, stemma=stemma)
        manifest = split_manifest(split, enc)
        assert manifest["held_leaf"] == stemma.leaves()[0]
        assert manifest["seed"] == 3
        assert manifest["counts"] == {"train": 185, "valid": 5, "test": 20}
        assert manifest["encoding"]["diff_type"] == "variants_sorted"

    def test_tampered_counts_detected(self, tradition, tmp_path):
        stemma, collation = tradition
        enc = EncodingConfig()
        instances = generate_instances(collation, stemma, enc)
        split = holdout_split(instances, stemma.leaves()[0], valid_size=5,
                              seed=3, stemma=stemma)
        write_split_dir(split, enc, tmp_path / "s")
        src = tmp_path / "s" / "train.src"
        lines = src.read_text().splitlines()
        src.write_text("\n".join(lines[:-1]) + "\n")
        with pytest.raises(DataError):
            read_split_dir(tmp_path / "s")

    def test_missing_dir(self, tmp_path):
        with pytest.raises(DataError):
            read_split_dir(tmp_path / "nope")
