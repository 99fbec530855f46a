"""Witness placement on stemmata via learned pairwise edge distances.

Pipeline: simulate or load a manuscript tradition, encode witness pairs as
variant-configuration sequences labeled with tree edge distances, train a
recurrent sequence-to-sequence estimator, place held-back witnesses on the
backbone tree by distance voting, and score everything against a random
baseline.
"""

__version__ = "0.1.0"

from .collation import (
    Collation,
    LetterCollation,
    load_collation,
    places_of_variation,
    recode_letters,
    save_collation,
)
from .errors import ConfigError, DataError, NumericalError, StemmaplaceError
from .estimator import (
    DistanceEstimate,
    HyperParams,
    Seq2SeqModel,
    TrainingLog,
    Vocab,
    build_vocab,
    gradient_check,
    load_model,
    oracle_estimator,
    predict,
    predict_batch,
    random_estimator,
    save_model,
    seq2seq_estimator,
    train,
)
from .evaluation import (
    BaselineReport,
    EstimateReport,
    expected_baseline,
    results_table,
    run_baseline,
    score_estimates,
)
from .pairgen import (
    EncodingConfig,
    HoldoutSplit,
    PairInstance,
    encode_pair,
    generate_instances,
    holdout_split,
    read_split_dir,
    write_split_dir,
)
from .placement import (
    PlacementResult,
    hitrate,
    mean_radius,
    place,
    placement_radius,
    placement_report,
    with_truth,
)
from .scribesim import (
    ConfusionMatrix,
    ScribeConfig,
    SimulatedTradition,
    copy_text,
    damerau_levenshtein,
    generate_stemma,
    load_confusion_csv,
    load_lexicon,
    save_confusion_csv,
    simulate_tradition,
    uniform_class_confusion,
)
from .stemma import DistanceMatrix, Stemma, distance_matrix, load_stemma

__all__ = [
    "__version__",
    "Collation",
    "LetterCollation",
    "load_collation",
    "places_of_variation",
    "recode_letters",
    "save_collation",
    "ConfigError",
    "DataError",
    "NumericalError",
    "StemmaplaceError",
    "DistanceEstimate",
    "HyperParams",
    "Seq2SeqModel",
    "TrainingLog",
    "Vocab",
    "build_vocab",
    "gradient_check",
    "load_model",
    "oracle_estimator",
    "predict",
    "predict_batch",
    "random_estimator",
    "save_model",
    "seq2seq_estimator",
    "train",
    "BaselineReport",
    "EstimateReport",
    "expected_baseline",
    "results_table",
    "run_baseline",
    "score_estimates",
    "EncodingConfig",
    "HoldoutSplit",
    "PairInstance",
    "encode_pair",
    "generate_instances",
    "holdout_split",
    "read_split_dir",
    "write_split_dir",
    "PlacementResult",
    "hitrate",
    "mean_radius",
    "place",
    "placement_radius",
    "placement_report",
    "with_truth",
    "ConfusionMatrix",
    "ScribeConfig",
    "SimulatedTradition",
    "copy_text",
    "damerau_levenshtein",
    "generate_stemma",
    "load_confusion_csv",
    "load_lexicon",
    "save_confusion_csv",
    "simulate_tradition",
    "uniform_class_confusion",
    "DistanceMatrix",
    "Stemma",
    "distance_matrix",
    "load_stemma",
]
