"""Subword and two-dimensional word codes with mixture-of-softmax output layers."""

from .assign import HybridLightRNN, solve_exact, solve_greedy, train_hybrid_lightrnn
from .bpe import BPETokenizer, bpe_decode, bpe_encode, train_bpe
from .codelm import CodeRNNLM, TrainConfig
from .codetable import CodeTable, decode_sequence, encode_word, init_table
from .corpus import Vocabulary, build_vocab, tokenize
from .mos import MixtureOfSoftmaxes, bottleneck_report

__version__ = "0.1.0"

__all__ = [
    "BPETokenizer",
    "CodeRNNLM",
    "CodeTable",
    "HybridLightRNN",
    "MixtureOfSoftmaxes",
    "TrainConfig",
    "Vocabulary",
    "bottleneck_report",
    "bpe_decode",
    "bpe_encode",
    "build_vocab",
    "decode_sequence",
    "encode_word",
    "init_table",
    "solve_exact",
    "solve_greedy",
    "tokenize",
    "train_bpe",
    "train_hybrid_lightrnn",
]
