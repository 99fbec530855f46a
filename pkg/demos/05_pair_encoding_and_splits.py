"""
From collation to training pairs
================================

Every unordered witness pair becomes one instance: the source sequence
describes, row by row, how the two witnesses relate at each position, and
the target is their true edge distance in the stemma.  Holding back one
leaf then splits the instances into train/valid (pairs among the rest)
and test (every pair involving the held leaf).
"""

import tempfile

import numpy as np

from stemmaplace import (
    EncodingConfig,
    ScribeConfig,
    encode_pair,
    generate_instances,
    generate_stemma,
    holdout_split,
    read_split_dir,
    recode_letters,
    simulate_tradition,
    write_split_dir,
)

tree = generate_stemma(n_nodes=10, max_children=3, seed=11)
rng = np.random.default_rng(11)
words = ["".join(rng.choice(list("aeiourstln"), size=5)) for _ in range(150)]
trad = simulate_tradition(tree, words, ScribeConfig(0.02, correction_enabled=False, seed=11))
coded = recode_letters(trad.collation)

a, b = coded.witnesses[0], coded.witnesses[1]

# Four encodings of the same pair.  binary only says agree/disagree;
# the variants types name the two letter readings; all_places keeps
# unanimous rows while variation_places drops them.
for diff_type in ("binary", "variants_sorted", "variants_unsorted"):
    enc = EncodingConfig(diff_type=diff_type, input_type="variation_places")
    tokens = encode_pair(coded, a, b, enc)
    print(f"{diff_type:18s} {' '.join(tokens[:8])} ...")
enc = EncodingConfig(diff_type="binary", input_type="all_places")
print("all_places length:", len(encode_pair(coded, a, b, enc)),
      "| variation_places length:",
      len(encode_pair(coded, a, b, EncodingConfig("binary", "variation_places"))))

# One instance per unordered pair: C(10, 2) = 45.
enc = EncodingConfig()  # variants_sorted + all_places
instances = generate_instances(coded, tree, enc)
print("\ninstances:", len(instances))
inst = instances[0]
print("example:", (inst.a, inst.b), "target distance", inst.target)

# Hold back one leaf: its pairs are the test set, the rest split into
# train and a small validation sample.
held = tree.leaves()[0]
split = holdout_split(instances, held, valid_size=5, seed=0, stemma=tree)
print(f"\nheld leaf {held}: train {len(split.train)}, "
      f"valid {len(split.valid)}, test {len(split.test)}")
assert all(inst.involves(held) for inst in split.test)

# Splits round-trip through a directory of token files plus a manifest.
with tempfile.TemporaryDirectory() as d:
    manifest = write_split_dir(split, enc, d)
    back, back_enc, back_manifest = read_split_dir(d)
    assert back.train == split.train and back.test == split.test
    print("manifest counts:", manifest["counts"])
