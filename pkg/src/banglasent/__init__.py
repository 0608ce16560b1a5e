"""Sentiment classification for Bangla and Romanized Bangla text.

Corpus preprocessing, dual-annotation agreement analysis, a from-scratch
peephole LSTM classifier with exact backpropagation through time, and a
tagged experiment-matrix runner.
"""

from .annotations import AgreementReport, Label, apply_ato2, apply_ra, confusion_matrix
from .corpus import (
    EncodedDataset,
    TextSample,
    Vocab,
    build_vocab,
    encode,
    load_corpus,
    normalize_text,
    save_corpus,
    split_shuffle,
    tokenize,
)
from .experiments import (
    ExperimentConfig,
    RunSettings,
    enumerate_matrix,
    parse_tag,
    run_experiment,
)
from .numerics import LossKind
from .recurrent import CellState, LstmParams, ModelParams, init_model
from .training import AdamConfig, LabeledSet, SgdConfig, TrainConfig, evaluate, pretrain_transfer, train

__version__ = "0.1.0"
