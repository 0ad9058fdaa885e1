"""Siamese BiLSTM text-pair matching with exact-match and paraphrase features."""

from .corpus import (
    Dataset,
    Sentence,
    SentencePair,
    TaskKind,
    load_dataset,
    scale_score,
    tokenize,
    unscale_score,
)
from .errors import DataError, NumericalError
from .features import EmbeddingTable, FeatureMode, augment_pair, load_glove
from .ppdb import ParaphraseIndex, build_index
from .encoder import (
    EncoderParams,
    RegularizationConfig,
    encode,
    encode_backward,
    encode_batch,
)
from .matcher import HeadParams, compose, head_forward, relatedness_score
from .model import (
    ModelConfig,
    PairModel,
    init_model,
    load_checkpoint,
    make_batch,
    save_checkpoint,
)
from .training import TrainConfig, evaluate, grid_search, gradient_check, train
from .analysis import analyze, feature_proportion, partition, relative_difference
from .metrics import accuracy, f1_binary, mse, pearson, spearman

__version__ = "0.1.0"

__all__ = [
    "Dataset",
    "Sentence",
    "SentencePair",
    "TaskKind",
    "load_dataset",
    "scale_score",
    "tokenize",
    "unscale_score",
    "DataError",
    "NumericalError",
    "EmbeddingTable",
    "FeatureMode",
    "augment_pair",
    "load_glove",
    "ParaphraseIndex",
    "build_index",
    "EncoderParams",
    "RegularizationConfig",
    "encode",
    "encode_backward",
    "encode_batch",
    "HeadParams",
    "compose",
    "head_forward",
    "relatedness_score",
    "ModelConfig",
    "PairModel",
    "init_model",
    "load_checkpoint",
    "make_batch",
    "save_checkpoint",
    "TrainConfig",
    "evaluate",
    "grid_search",
    "gradient_check",
    "train",
    "analyze",
    "feature_proportion",
    "partition",
    "relative_difference",
    "accuracy",
    "f1_binary",
    "mse",
    "pearson",
    "spearman",
]
