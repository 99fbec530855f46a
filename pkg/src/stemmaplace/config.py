"""Plain-text experiment configuration: one `key = value` per line.

Full-line comments start with `#`; blank lines are ignored; keys are
case-sensitive and may appear once.  Unknown keys are rejected so typos
fail loudly instead of silently running defaults.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, fields

from .errors import ConfigError
from .estimator import HyperParams
from .pairgen import DIFF_TYPES, INPUT_TYPES, EncodingConfig

_TRUE = ("1", "true", "yes", "on")
_FALSE = ("0", "false", "no", "off")


def _bool(key, raw):
    low = raw.lower()
    if low in _TRUE:
        return True
    if low in _FALSE:
        return False
    raise ConfigError(f"{key}: expected a boolean, got {raw!r}")


@dataclass
class ExperimentConfig:
    """Everything one experiment run needs, with working defaults.

    Path keys stay None unless set; commands that need a missing path
    fall back to the standard artifact name under out_dir (for files a
    previous pipeline step writes) or fail with a ConfigError.
    """

    # paths
    out_dir: str = "run"
    collation: str | None = None
    stemma: str | None = None
    lexicon: str | None = None
    root_text: str | None = None
    confusion_csv: str | None = None

    # pair encoding
    diff_type: str = "variants_sorted"
    input_type: str = "all_places"
    archetype: str | None = None

    # network / training
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
    checkpoint_every: int = 100
    max_decode_len: int = 8
    select_best: bool = False

    # simulation
    n_nodes: int = 21
    max_children: int = 3
    text_words: int = 958
    error_rate: float = 0.006
    correction_enabled: bool = False
    within_class_ratio: float = 0.9

    # baseline
    baseline_min: int = 1
    baseline_max: int | None = None
    baseline_iterations: int = 100_000

    # seeds
    seed: int = 0
    train_seed: int | None = None

    def __post_init__(self):
        if self.diff_type not in DIFF_TYPES:
            raise ConfigError(f"diff_type must be one of {DIFF_TYPES}")
        if self.input_type not in INPUT_TYPES:
            raise ConfigError(f"input_type must be one of {INPUT_TYPES}")
        self.hyperparams()  # validates the network settings
        for name in ("n_nodes", "text_words"):
            if getattr(self, name) < 2:
                raise ConfigError(f"{name} must be >= 2, got {getattr(self, name)}")
        if self.max_children < 1:
            raise ConfigError(f"max_children must be >= 1, got {self.max_children}")
        if not 0.0 <= self.error_rate <= 1.0:
            raise ConfigError(f"error_rate {self.error_rate} outside [0, 1]")
        if self.baseline_iterations < 1:
            raise ConfigError("baseline_iterations must be >= 1")

    def encoding(self) -> EncodingConfig:
        return EncodingConfig(diff_type=self.diff_type, input_type=self.input_type)

    def hyperparams(self) -> HyperParams:
        return HyperParams(
            embed_dim=self.embed_dim,
            hidden_dim=self.hidden_dim,
            layers=self.layers,
            dropout=self.dropout,
            batch_size=self.batch_size,
            train_steps=self.train_steps,
            valid_size=self.valid_size,
            optimizer=self.optimizer,
            learning_rate=self.learning_rate,
            grad_clip=self.grad_clip,
            seed=self.seed if self.train_seed is None else self.train_seed,
            checkpoint_every=self.checkpoint_every,
            max_decode_len=self.max_decode_len,
        )

    def to_dict(self):
        return {f.name: getattr(self, f.name) for f in fields(self)}


_FIELD_TYPES = {f.name: f.type for f in fields(ExperimentConfig)}
_INT_KEYS = {k for k, t in _FIELD_TYPES.items() if t == "int" or t == "int | None"}
_FLOAT_KEYS = {k for k, t in _FIELD_TYPES.items() if t == "float"}
_BOOL_KEYS = {k for k, t in _FIELD_TYPES.items() if t == "bool"}


def _coerce(key, raw):
    if key not in _FIELD_TYPES:
        raise ConfigError(f"unknown config key {key!r}")
    if raw.lower() == "none":
        return None
    try:
        if key in _INT_KEYS:
            return int(raw)
        if key in _FLOAT_KEYS:
            return float(raw)
    except ValueError:
        raise ConfigError(f"{key}: expected a number, got {raw!r}") from None
    if key in _BOOL_KEYS:
        return _bool(key, raw)
    return raw


def parse_config(text) -> ExperimentConfig:
    """Parse `key = value` lines into a validated ExperimentConfig."""
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, _, raw = stripped.partition("=")
        key = key.strip()
        raw = raw.strip()
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        values[key] = _coerce(key, raw)
    return ExperimentConfig(**values)


def load_config(path) -> ExperimentConfig:
    try:
        with open(path, "r", encoding="utf-8") as f:
            text = f.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text)


def apply_overrides(cfg: ExperimentConfig, overrides) -> ExperimentConfig:
    """Apply `key=value` strings (from --set flags) on top of a config."""
    values = cfg.to_dict()
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key=value")
        key, _, raw = item.partition("=")
        values[key.strip()] = _coerce(key.strip(), raw.strip())
    return ExperimentConfig(**values)


def derive_seed(seed, *labels) -> int:
    """Stable 128-bit sub-seed from a root seed and string labels."""
    blob = "\n".join([str(int(seed)), *map(str, labels)]).encode("utf-8")
    return int.from_bytes(hashlib.sha256(blob).digest()[:16], "little")
