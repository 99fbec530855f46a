"""
Training the distance estimator
===============================

The estimator is a sequence-to-sequence recurrent network: a bidirectional
encoder reads the pair encoding, a decoder with attention over the encoder
states emits the distance as a token string.  Everything below runs in a
few seconds at toy scale.
"""

import numpy as np

from stemmaplace import (
    EncodingConfig,
    HyperParams,
    ScribeConfig,
    generate_instances,
    generate_stemma,
    gradient_check,
    holdout_split,
    predict_batch,
    recode_letters,
    simulate_tradition,
    train,
)

# A small tradition to learn from.
tree = generate_stemma(n_nodes=10, max_children=3, seed=21)
rng = np.random.default_rng(21)
words = ["".join(rng.choice(list("aeiourstln"), size=5)) for _ in range(300)]
trad = simulate_tradition(tree, words, ScribeConfig(0.03, correction_enabled=False, seed=21))
instances = generate_instances(recode_letters(trad.collation), tree, EncodingConfig())

held = tree.leaves()[0]
split = holdout_split(instances, held, valid_size=3, seed=0, stemma=tree)

hp = HyperParams(
    embed_dim=16,
    hidden_dim=32,
    layers=1,
    batch_size=8,
    train_steps=1200,
    valid_size=3,
    learning_rate=2e-3,
    checkpoint_every=100,
    max_decode_len=4,
    seed=0,
)
model, log = train(split.train, split.valid, hp)

print("training log (step, loss, valid accuracy):")
for step, loss, acc in log.entries:
    print(f"  {step:4d}  {loss:7.4f}  {acc:.2f}")
best_step, best_loss, best_acc = log.best()
print(f"best checkpoint: step {best_step}, valid acc {best_acc:.2f}")

# Decode the held-back leaf's pairs and compare with the true distances.
estimates = predict_batch(
    model,
    [inst.source for inst in split.test],
    pairs=[(inst.a, inst.b) for inst in split.test],
)
print(f"\ntest pairs for held leaf {held}:")
exact = 0
for inst, est in zip(split.test, estimates):
    mark = "=" if str(est.d_hat) == inst.target else " "
    exact += mark == "="
    print(f"  ({inst.a}, {inst.b})  true {inst.target}  predicted {est.d_hat} {mark}")
print(f"exact: {exact}/{len(split.test)}")

# Same seed, same model: training is deterministic end to end.
model2, log2 = train(split.train, split.valid, hp)
assert log2.entries == log.entries

# The backward pass is hand-written; check it against central finite
# differences on a tiny double-precision model.
max_err, per_group = gradient_check()
print(f"\ngradient check: max relative error {max_err:.2e} "
      f"across {len(per_group)} parameter groups")
