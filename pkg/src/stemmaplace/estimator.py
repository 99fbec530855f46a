"""Distance estimators behind one interface.

The main estimator is a from-scratch sequence-to-sequence network: a
bidirectional LSTM encoder (hidden size split across the directions), a
unidirectional LSTM decoder initialized from the encoder finals, global
dot attention, and a token softmax.  The decoder emits the distance as a
token sequence; the first emitted token is the estimate.  An oracle
estimator (true tree distances) and a seeded random estimator share the
same call shape so placement and evaluation can be tested independently.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from ._rnn import (
    SGD,
    Adam,
    clip_gradients,
    decode_greedy,
    init_params,
    run_batch,
)
from .errors import ConfigError, DataError, NumericalError
from .stemma import distance_matrix


class EmptyTrainingSet(DataError):
    pass


class EmptyValidation(DataError):
    pass


class NonFiniteLoss(NumericalError):
    pass


class NoTokenEmitted(NumericalError):
    """The decoder emitted EOS immediately: the model is unusable."""


class ModelFormatError(DataError):
    pass


RESERVED_TOKENS = ("<pad>", "<bos>", "<eos>", "<unk>")


class Vocab:
    """Token table with fixed reserved ids; unknown tokens map to UNK."""

    PAD = 0
    BOS = 1
    EOS = 2
    UNK = 3

    def __init__(self, tokens):
        known = sorted(set(tokens))
        for t in known:
            if t in RESERVED_TOKENS:
                raise DataError(f"token {t!r} collides with a reserved symbol")
            if not t or any(ch.isspace() for ch in t):
                raise DataError(f"unusable token {t!r}")
        self.itos = RESERVED_TOKENS + tuple(known)
        self.stoi = {t: i for i, t in enumerate(self.itos)}

    @property
    def known(self):
        """All non-reserved tokens, sorted."""
        return self.itos[len(RESERVED_TOKENS):]

    def __len__(self):
        return len(self.itos)

    def __eq__(self, other):
        return isinstance(other, Vocab) and self.itos == other.itos

    def id(self, token):
        return self.stoi.get(token, self.UNK)

    def ids(self, tokens):
        return np.array([self.stoi.get(t, self.UNK) for t in tokens], dtype=np.int64)

    def token(self, i):
        return self.itos[i]


def build_vocab(instances):
    """Source and target vocabularies over a training set."""
    instances = list(instances)
    if not instances:
        raise EmptyTrainingSet("no training instances")
    src = set()
    tgt = set()
    for inst in instances:
        src.update(inst.source)
        tgt.add(inst.target)
    return Vocab(src), Vocab(tgt)


@dataclass(frozen=True)
class HyperParams:
    """Network and training settings.

    hidden_dim is split across the two encoder directions, so it must be
    even.  dropout applies between stacked layers only, which makes it
    inert at layers=1 (and the default is no dropout anyway).
    """

    embed_dim: int = 128
    hidden_dim: int = 512
    layers: int = 1
    dropout: float = 0.0
    batch_size: int = 16
    train_steps: int = 7000
    valid_size: int = 5
    optimizer: str = "adam"
    learning_rate: float = 1e-3
    grad_clip: float = 5.0
    seed: int = 0
    checkpoint_every: int = 100
    max_decode_len: int = 8

    def __post_init__(self):
        if self.embed_dim < 1:
            raise ConfigError(f"embed_dim must be positive, got {self.embed_dim}")
        if self.hidden_dim < 2 or self.hidden_dim % 2:
            raise ConfigError(
                f"hidden_dim must be positive and even, got {self.hidden_dim}"
            )
        if self.layers < 1:
            raise ConfigError(f"layers must be >= 1, got {self.layers}")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError(f"dropout {self.dropout} outside [0, 1)")
        for name in ("batch_size", "train_steps", "valid_size", "checkpoint_every",
                     "max_decode_len"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.optimizer not in ("adam", "sgd"):
            raise ConfigError(f"unknown optimizer {self.optimizer!r}")
        if self.learning_rate <= 0.0:
            raise ConfigError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.grad_clip <= 0.0:
            raise ConfigError(f"grad_clip must be > 0, got {self.grad_clip}")

    def to_dict(self):
        return {
            "embed_dim": self.embed_dim,
            "hidden_dim": self.hidden_dim,
            "layers": self.layers,
            "dropout": self.dropout,
            "batch_size": self.batch_size,
            "train_steps": self.train_steps,
            "valid_size": self.valid_size,
            "optimizer": self.optimizer,
            "learning_rate": self.learning_rate,
            "grad_clip": self.grad_clip,
            "seed": self.seed,
            "checkpoint_every": self.checkpoint_every,
            "max_decode_len": self.max_decode_len,
        }

    @classmethod
    def from_dict(cls, d):
        known = set(cls().to_dict())
        unknown = sorted(set(d) - known)
        if unknown:
            raise ConfigError(f"unknown hyperparameter keys {unknown}")
        return cls(**d)


@dataclass
class TrainingLog:
    """Loss/accuracy checkpoints: (step, train_loss, valid_acc) rows."""

    entries: list = field(default_factory=list)

    HEADER = "step,train_loss,valid_acc"

    def append(self, step, train_loss, valid_acc):
        self.entries.append((int(step), float(train_loss), float(valid_acc)))

    def best(self):
        """The entry with the highest validation accuracy (earliest wins)."""
        if not self.entries:
            raise DataError("empty training log")
        return max(self.entries, key=lambda e: (e[2], -e[0]))

    def to_csv(self):
        lines = [self.HEADER]
        lines.extend(f"{s},{l!r},{a!r}" for s, l, a in self.entries)
        return "\n".join(lines) + "\n"

    @classmethod
    def from_csv(cls, text):
        lines = [ln for ln in text.splitlines() if ln.strip()]
        if not lines or lines[0] != cls.HEADER:
            raise DataError("training log missing header")
        log = cls()
        for ln in lines[1:]:
            s, l, a = ln.split(",")
            log.append(int(s), float(l), float(a))
        return log


class Seq2SeqModel:
    """A trained encoder-decoder plus its vocabularies and settings."""

    def __init__(self, src_vocab, tgt_vocab, hp, params):
        self.src_vocab = src_vocab
        self.tgt_vocab = tgt_vocab
        self.hp = hp
        self.params = params

    @property
    def dtype(self):
        return self.params["src_emb"].dtype

    def params_equal(self, other):
        return set(self.params) == set(other.params) and all(
            np.array_equal(self.params[k], other.params[k]) for k in self.params
        )


def _to_arrays(instances, src_vocab, tgt_vocab):
    """(src_ids, tgt_in, tgt_out) per instance; target is token + EOS."""
    out = []
    for inst in instances:
        src = src_vocab.ids(inst.source)
        tid = tgt_vocab.id(inst.target)
        tgt_in = np.array([Vocab.BOS, tid], dtype=np.int64)
        tgt_out = np.array([tid, Vocab.EOS], dtype=np.int64)
        out.append((src, tgt_in, tgt_out))
    return out


def _shape_groups(arrays):
    """Indices grouped by (src_len, tgt_len), keys sorted."""
    groups = {}
    for i, (src, tin, _) in enumerate(arrays):
        groups.setdefault((len(src), len(tin)), []).append(i)
    return [groups[k] for k in sorted(groups)]


def _epoch_batches(arrays, batch_size, rng):
    """Yield index batches forever, reshuffling each epoch.

    Batches mix only equal-shape instances; leftovers flush at epoch end
    as smaller batches, so every instance is seen once per epoch.
    """
    n = len(arrays)
    while True:
        order = rng.permutation(n)
        pending = {}
        for idx in order:
            src, tin, _ = arrays[idx]
            key = (len(src), len(tin))
            bucket = pending.setdefault(key, [])
            bucket.append(int(idx))
            if len(bucket) == batch_size:
                yield list(bucket)
                bucket.clear()
        for key in sorted(pending):
            if pending[key]:
                yield pending[key]


def _stack(arrays, idx):
    src = np.stack([arrays[i][0] for i in idx])
    tin = np.stack([arrays[i][1] for i in idx])
    tout = np.stack([arrays[i][2] for i in idx])
    return src, tin, tout


def token_accuracy(params, hp, arrays):
    """Teacher-forced token accuracy (target + EOS positions)."""
    correct = 0
    total = 0
    for group in _shape_groups(arrays):
        for start in range(0, len(group), hp.batch_size):
            idx = group[start : start + hp.batch_size]
            src, tin, tout = _stack(arrays, idx)
            _, logits, _ = run_batch(
                params, hp, src, tin, tout, compute_grads=False
            )
            pred = logits.argmax(axis=1)
            correct += int((pred == tout.ravel()).sum())
            total += pred.size
    return correct / total


def train(train_instances, valid_instances, hp: HyperParams, select_best=False):
    """Train a model; returns (Seq2SeqModel, TrainingLog).

    Seeded end to end: parameter init, epoch shuffling, and dropout each
    draw from streams derived from hp.seed, so identical inputs give
    identical models.  With select_best the returned parameters are the
    checkpoint with the highest validation accuracy instead of the final
    step ("best accuracy curve cutoff").
    """
    train_instances = list(train_instances)
    valid_instances = list(valid_instances)
    if not train_instances:
        raise EmptyTrainingSet("no training instances")
    if not valid_instances:
        raise EmptyValidation("no validation instances")

    src_vocab, tgt_vocab = build_vocab(train_instances)
    init_rng = np.random.default_rng([hp.seed, 0])
    params = init_params(init_rng, hp, len(src_vocab), len(tgt_vocab))
    shuffle_rng = np.random.default_rng([hp.seed, 1])
    drop_rng = None
    if hp.dropout > 0.0 and hp.layers > 1:
        drop_rng = np.random.default_rng([hp.seed, 2])

    arrays = _to_arrays(train_instances, src_vocab, tgt_vocab)
    valid_arrays = _to_arrays(valid_instances, src_vocab, tgt_vocab)

    if hp.optimizer == "adam":
        opt = Adam(params, lr=hp.learning_rate)
    else:
        opt = SGD(params, lr=hp.learning_rate)

    log = TrainingLog()
    best_acc = -1.0
    best_params = None
    batches = _epoch_batches(arrays, hp.batch_size, shuffle_rng)
    for step in range(1, hp.train_steps + 1):
        idx = next(batches)
        src, tin, tout = _stack(arrays, idx)
        loss, _, grads = run_batch(
            params, hp, src, tin, tout, compute_grads=True, drop_rng=drop_rng
        )
        if not np.isfinite(loss):
            raise NonFiniteLoss(
                f"loss {loss!r} at step {step} "
                f"(lr={hp.learning_rate}, clip={hp.grad_clip})"
            )
        clip_gradients(grads, hp.grad_clip)
        opt.step(params, grads)
        if step % hp.checkpoint_every == 0 or step == hp.train_steps:
            acc = token_accuracy(params, hp, valid_arrays)
            log.append(step, loss, acc)
            if select_best and acc > best_acc:
                best_acc = acc
                best_params = {k: v.copy() for k, v in params.items()}

    if select_best and best_params is not None:
        params = best_params
    return Seq2SeqModel(src_vocab, tgt_vocab, hp, params), log


@dataclass(frozen=True)
class DistanceEstimate:
    """Predicted edge distance for one witness pair.

    d_hat is always the integer parse of the FIRST decoded token; decoders
    that overgenerate (repeat the token) are tolerated by construction.
    """

    query: str
    other: str
    d_hat: int
    raw_output: tuple = ()

    def __post_init__(self):
        if int(self.d_hat) != self.d_hat or self.d_hat < 0:
            raise DataError(f"d_hat {self.d_hat!r} is not a non-negative integer")


def predict_batch(model: Seq2SeqModel, sources, pairs=None):
    """Greedy-decode many sources at once; returns DistanceEstimates.

    Sources of equal length share a batch.  Reserved tokens other than EOS
    are masked out of the argmax, so every emitted token is a real target
    token; EOS as the very first step raises NoTokenEmitted.
    """
    sources = [tuple(s) for s in sources]
    if pairs is None:
        pairs = [(None, None)] * len(sources)
    pairs = list(pairs)
    if len(pairs) != len(sources):
        raise DataError(f"{len(sources)} sources but {len(pairs)} pairs")
    for s in sources:
        if not s:
            raise DataError("empty source sequence")

    banned = (Vocab.PAD, Vocab.BOS, Vocab.UNK)
    by_len = {}
    for i, s in enumerate(sources):
        by_len.setdefault(len(s), []).append(i)
    results = [None] * len(sources)
    for length in sorted(by_len):
        idx = by_len[length]
        ids = np.stack([model.src_vocab.ids(sources[i]) for i in idx])
        decoded = decode_greedy(
            model.params, model.hp, ids,
            Vocab.BOS, Vocab.EOS, banned, model.hp.max_decode_len,
        )
        for i, id_list in zip(idx, decoded):
            tokens = tuple(model.tgt_vocab.token(t) for t in id_list)
            q, o = pairs[i]
            if not tokens:
                raise NoTokenEmitted(
                    f"decoder emitted EOS immediately for pair ({q!r}, {o!r})"
                )
            try:
                d_hat = int(tokens[0])
            except ValueError:
                raise DataError(
                    f"decoded token {tokens[0]!r} is not an integer"
                ) from None
            results[i] = DistanceEstimate(
                query=q, other=o, d_hat=d_hat, raw_output=tokens
            )
    return results


def predict(model: Seq2SeqModel, source_tokens, query=None, other=None):
    """Greedy decode of one source; d_hat = first emitted token."""
    return predict_batch(model, [source_tokens], [(query, other)])[0]


def seq2seq_estimator(model: Seq2SeqModel):
    """Wrap a trained model in the common estimator call shape."""

    def estimate(query, other, source_tokens=None):
        if source_tokens is None:
            raise DataError("the trained estimator needs source tokens")
        return predict(model, source_tokens, query=query, other=other)

    return estimate


def oracle_estimator(stemma):
    """Estimator that reads the true tree distance (testing aid)."""
    dm = distance_matrix(stemma)

    def estimate(query, other, source_tokens=None):
        d = int(dm.get(query, other))
        return DistanceEstimate(query=query, other=other, d_hat=d,
                                raw_output=(str(d),))

    return estimate


def random_estimator(d_min, d_max, seed):
    """Uniform integer estimates in [d_min, d_max], seeded."""
    if d_min > d_max:
        raise ConfigError(f"empty range [{d_min}, {d_max}]")
    rng = np.random.default_rng(seed)

    def estimate(query, other, source_tokens=None):
        d = int(rng.integers(d_min, d_max + 1))
        return DistanceEstimate(query=query, other=other, d_hat=d,
                                raw_output=(str(d),))

    return estimate


# --- serialization: versioned binary ------------------------------------

MODEL_MAGIC = b"STPL"
MODEL_VERSION = 1


def save_model(model: Seq2SeqModel, path):
    """Magic + version + JSON header + raw little-endian tensors."""
    names = sorted(model.params)
    header = {
        "dtype": np.dtype(model.dtype).name,
        "hyperparams": model.hp.to_dict(),
        "src_tokens": list(model.src_vocab.known),
        "tgt_tokens": list(model.tgt_vocab.known),
        "params": [[name, list(model.params[name].shape)] for name in names],
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    le = np.dtype(model.dtype).newbyteorder("<")
    with open(path, "wb") as f:
        f.write(MODEL_MAGIC)
        f.write(MODEL_VERSION.to_bytes(4, "little"))
        f.write(len(blob).to_bytes(8, "little"))
        f.write(blob)
        for name in names:
            f.write(np.ascontiguousarray(model.params[name], dtype=le).tobytes())


def load_model(path) -> Seq2SeqModel:
    with open(path, "rb") as f:
        magic = f.read(4)
        if magic != MODEL_MAGIC:
            raise ModelFormatError(f"{path}: bad magic {magic!r}")
        version = int.from_bytes(f.read(4), "little")
        if version != MODEL_VERSION:
            raise ModelFormatError(f"{path}: unsupported version {version}")
        header_len = int.from_bytes(f.read(8), "little")
        try:
            header = json.loads(f.read(header_len).decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise ModelFormatError(f"{path}: corrupt header: {exc}") from None
        hp = HyperParams.from_dict(header["hyperparams"])
        src_vocab = Vocab(header["src_tokens"])
        tgt_vocab = Vocab(header["tgt_tokens"])
        native = np.dtype(header["dtype"])
        le = native.newbyteorder("<")
        params = {}
        for name, shape in header["params"]:
            count = int(np.prod(shape)) if shape else 1
            buf = f.read(count * le.itemsize)
            if len(buf) != count * le.itemsize:
                raise ModelFormatError(f"{path}: truncated tensor {name!r}")
            arr = np.frombuffer(buf, dtype=le).astype(native).reshape(shape)
            params[name] = arr
        trailing = f.read(1)
        if trailing:
            raise ModelFormatError(f"{path}: trailing bytes after tensors")
    return Seq2SeqModel(src_vocab, tgt_vocab, hp, params)


# --- gradient verification ----------------------------------------------

def gradient_check(model=None, epsilon=1e-5, seed=0, max_entries_per_group=64):
    """Analytic vs central finite-difference gradients, double precision.

    Builds a tiny two-layer model on a toy vocabulary unless one is given
    (a given model is converted to float64).  Returns (max_relative_error,
    per-parameter-group dict).  Dropout stays off: the comparison needs a
    deterministic loss.
    """
    rng = np.random.default_rng(seed)
    if model is None:
        hp = HyperParams(
            embed_dim=4, hidden_dim=8, layers=2, dropout=0.0, batch_size=3,
            train_steps=1, valid_size=1, seed=seed, max_decode_len=4,
        )
        src_vocab = Vocab(["x", "y", "z"])
        tgt_vocab = Vocab(["1", "2"])
        params = init_params(rng, hp, len(src_vocab), len(tgt_vocab), np.float64)
        # The training-time +-0.08 init leaves deep-layer gradients below
        # 1e-10, where finite differences are pure rounding noise; O(1)
        # random weights keep every gradient well conditioned for the check.
        for k, v in params.items():
            params[k] = rng.uniform(-0.4, 0.4, size=v.shape)
        n_src, n_tgt = len(src_vocab), len(tgt_vocab)
    else:
        hp = model.hp
        params = {k: v.astype(np.float64) for k, v in model.params.items()}
        n_src = params["src_emb"].shape[0]
        n_tgt = params["tgt_emb"].shape[0]
    B, Ts = 3, 5
    src = rng.integers(0, n_src, size=(B, Ts))
    data_lo = len(RESERVED_TOKENS)
    tgt = rng.integers(data_lo, n_tgt, size=(B, 1))
    tgt_in = np.concatenate([np.full((B, 1), Vocab.BOS, dtype=np.int64), tgt], axis=1)
    tgt_out = np.concatenate([tgt, np.full((B, 1), Vocab.EOS, dtype=np.int64)], axis=1)

    _, _, grads = run_batch(params, hp, src, tgt_in, tgt_out, compute_grads=True)

    def loss_only():
        return run_batch(params, hp, src, tgt_in, tgt_out, compute_grads=False)[0]

    errors = {}
    for name in sorted(params):
        flat = params[name].reshape(-1)
        gflat = grads[name].reshape(-1)
        if flat.size <= max_entries_per_group:
            picks = np.arange(flat.size)
        else:
            picks = rng.choice(flat.size, size=max_entries_per_group, replace=False)
        worst = 0.0
        for i in picks:
            orig = flat[i]
            flat[i] = orig + epsilon
            lp = loss_only()
            flat[i] = orig - epsilon
            lm = loss_only()
            flat[i] = orig
            numeric = (lp - lm) / (2.0 * epsilon)
            denom = max(abs(numeric) + abs(gflat[i]), 1e-8)
            rel = abs(numeric - gflat[i]) / denom
            if rel > worst:
                worst = float(rel)
        errors[name] = worst
    return max(errors.values()), errors
