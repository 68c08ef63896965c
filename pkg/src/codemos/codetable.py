"""Hybrid frequent-word / two-dimensional code table.

Codes live in one dictionary of size ``k_freq + n_rows + n_cols``::

    [0, k_freq)                       exclusive codes of frequent words
    [k_freq, k_freq + n_rows)         row (first-position) codes
    [k_freq + n_rows, n_codes)        column (second-position) codes

Word ``i < k_freq`` encodes to ``(i,)``; every other word encodes to a
``(row, col)`` pair. The unknown-word id ``len(vocab)`` always sits in the last
table cell.
"""

from dataclasses import dataclass, field

import numpy as np

from ._validation import check_positive_int
from .exceptions import ArgumentError, ContractError, MalformedSequenceError

MAGIC = "#hlr-v1"


@dataclass(frozen=True)
class CodeTable:
    """Bijection between word ids and code sequences.

    ``cells[w - k_freq]`` is the flat cell index ``r * n_cols + c`` assigned to
    infrequent word ``w``; words are ids ``0..vocab_size`` with ``vocab_size``
    being UNK.
    """

    k_freq: int
    n_rows: int
    n_cols: int
    vocab_size: int
    cells: np.ndarray
    words: tuple = None
    _cell_to_word: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        cells = np.array(self.cells, dtype=np.int64)
        cells.setflags(write=False)
        object.__setattr__(self, "cells", cells)
        n_dense = self.n_words - self.k_freq
        if cells.shape != (n_dense,):
            raise ArgumentError(f"expected {n_dense} dense cells, got shape {cells.shape}")
        capacity = self.n_rows * self.n_cols
        if n_dense and (cells.min() < 0 or cells.max() >= capacity):
            raise ArgumentError("cell index outside the dense table")
        inverse = np.full(capacity, -1, dtype=np.int64)
        inverse[cells] = np.arange(self.k_freq, self.n_words)
        if np.count_nonzero(inverse >= 0) != n_dense:
            raise ArgumentError("two words share a table cell")
        if cells[-1] != capacity - 1:
            raise ArgumentError("UNK must occupy the last table cell")
        inverse.setflags(write=False)
        object.__setattr__(self, "_cell_to_word", inverse)
        if self.words is not None:
            words = tuple(self.words)
            if len(words) != self.vocab_size:
                raise ArgumentError("words must list exactly vocab_size entries")
            object.__setattr__(self, "words", words)

    def __eq__(self, other):
        if not isinstance(other, CodeTable):
            return NotImplemented
        return (
            (self.k_freq, self.n_rows, self.n_cols, self.vocab_size, self.words)
            == (other.k_freq, other.n_rows, other.n_cols, other.vocab_size, other.words)
            and np.array_equal(self.cells, other.cells)
        )

    __hash__ = None

    @property
    def n_codes(self):
        return self.k_freq + self.n_rows + self.n_cols

    @property
    def n_words(self):
        """Vocabulary size including the UNK slot."""
        return self.vocab_size + 1

    @property
    def unk_id(self):
        return self.vocab_size

    @property
    def row_offset(self):
        return self.k_freq

    @property
    def col_offset(self):
        return self.k_freq + self.n_rows

    def is_frequent(self, word_id):
        return word_id < self.k_freq

    def cell_of(self, word_id):
        return int(self.cells[word_id - self.k_freq])

    def word_at(self, row, col):
        """Word id stored at (row, col) or -1 for an unused cell."""
        return int(self._cell_to_word[row * self.n_cols + col])

    def with_cells(self, cells):
        return CodeTable(self.k_freq, self.n_rows, self.n_cols, self.vocab_size, cells, self.words)


def check_capacity(n_words, k_freq, n_rows, n_cols):
    """Raise unless ``k_freq + n_rows * n_cols`` can hold ``n_words`` (UNK included)."""
    if k_freq + n_rows * n_cols < n_words:
        raise ArgumentError(
            f"capacity violation: k_freq + rows*cols = {k_freq + n_rows * n_cols} "
            f"< |V| = {n_words} (UNK included)"
        )


def init_table(vocab, k_freq, n_rows, n_cols):
    """Frequency-ranked table: frequent words first, the rest row-major."""
    check_positive_int(k_freq, "k_freq", allow_zero=True)
    check_positive_int(n_rows, "n_rows")
    check_positive_int(n_cols, "n_cols")
    vocab_size = len(vocab)
    if k_freq > vocab_size:
        raise ArgumentError(f"k_freq={k_freq} exceeds vocabulary size {vocab_size}")
    check_capacity(vocab_size + 1, k_freq, n_rows, n_cols)
    n_dense = vocab_size - k_freq
    cells = np.concatenate([np.arange(n_dense), [n_rows * n_cols - 1]])
    return CodeTable(k_freq, n_rows, n_cols, vocab_size, cells, vocab.words)


def encode_word(table, word_id):
    if not 0 <= word_id <= table.vocab_size:
        raise ArgumentError(f"word id {word_id} outside [0, {table.vocab_size}]")
    if word_id < table.k_freq:
        return (int(word_id),)
    r, c = divmod(table.cell_of(word_id), table.n_cols)
    return (table.row_offset + r, table.col_offset + c)


def encode_ids(table, word_ids):
    out = []
    for w in word_ids:
        out.extend(encode_word(table, w))
    return np.asarray(out, dtype=np.int64)


def decode_sequence(table, codes):
    """Parse a code stream back into word ids using the prefix-free layout."""
    k, ro, co, n = table.k_freq, table.row_offset, table.col_offset, table.n_codes
    out = []
    pos = 0
    codes = list(codes)
    while pos < len(codes):
        c = int(codes[pos])
        if not 0 <= c < n:
            raise MalformedSequenceError(f"code {c} out of range at position {pos}", position=pos)
        if c < k:
            out.append(c)
            pos += 1
            continue
        if c >= co:
            raise MalformedSequenceError(f"column code {c} in word-initial position {pos}", position=pos)
        if pos + 1 >= len(codes):
            raise MalformedSequenceError(
                f"stream ends mid-word after row code at position {pos}", position=pos, suffix=[c]
            )
        c2 = int(codes[pos + 1])
        if not co <= c2 < n:
            raise MalformedSequenceError(
                f"row code followed by non-column code {c2} at position {pos + 1}", position=pos + 1
            )
        w = table.word_at(c - ro, c2 - co)
        if w < 0:
            raise MalformedSequenceError(f"unused table cell ({c - ro}, {c2 - co}) at position {pos}", position=pos)
        out.append(w)
        pos += 2
    return out


def encode_corpus(table, corpus_ids):
    """Encode sentences of word ids into per-sentence code arrays."""
    return [encode_ids(table, sent) for sent in corpus_ids]


def sentence_ids(table, sentences):
    """Map token lists to word ids using the table's word list (OOV -> UNK)."""
    if table.words is None:
        raise ArgumentError("table carries no word list")
    index = {w: i for i, w in enumerate(table.words)}
    unk = table.unk_id
    return [[index.get(t, unk) for t in sent] for sent in sentences]


def corpus_log_likelihood(table, lm, corpus_ids):
    """Total negative log-likelihood (nats) of the encoded corpus under ``lm``.

    ``lm`` needs an ``n_codes`` attribute and ``sequence_log_probs(codes)``
    returning the ``(len(codes), n_codes)`` predictive log-probabilities.
    """
    if lm.n_codes != table.n_codes:
        raise ContractError(f"lm has {lm.n_codes} codes but the table has {table.n_codes}")
    total = 0.0
    for codes in encode_corpus(table, corpus_ids):
        if len(codes) == 0:
            continue
        logp = lm.sequence_log_probs(codes)
        total -= float(logp[np.arange(len(codes)), codes].sum())
    return total


def save_table(table, path, seed=None):
    if table.words is None:
        raise ArgumentError("cannot save a table without its word list")
    header = f"{MAGIC} {table.k_freq} {table.n_rows} {table.n_cols} {table.vocab_size}"
    if seed is not None:
        header += f" seed={seed}"
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(header + "\n")
        for i, w in enumerate(table.words):
            fh.write(w + "\t" + ",".join(str(c) for c in encode_word(table, i)) + "\n")


def load_table(path):
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().split("\n")
    head = lines[0].split(" ")
    if head[0] != MAGIC or len(head) < 5:
        raise ArgumentError(f"{path}: not a {MAGIC} table file")
    k, n_rows, n_cols, vocab_size = (int(x) for x in head[1:5])
    ro, co = k, k + n_rows
    words, cells = [], []
    for lineno, line in enumerate(lines[1:], 2):
        if not line:
            continue
        try:
            w, codes = line.split("\t")
            codes = [int(c) for c in codes.split(",")]
        except ValueError:
            raise ArgumentError(f"{path}:{lineno}: expected 'word<TAB>code[,code]'") from None
        i = len(words)
        words.append(w)
        if i < k:
            if codes != [i]:
                raise ArgumentError(f"{path}:{lineno}: frequent word must map to ({i})")
        else:
            if len(codes) != 2:
                raise ArgumentError(f"{path}:{lineno}: expected a (row, col) pair")
            cells.append((codes[0] - ro) * n_cols + (codes[1] - co))
    if len(words) != vocab_size:
        raise ArgumentError(f"{path}: header says {vocab_size} words, found {len(words)}")
    cells.append(n_rows * n_cols - 1)
    return CodeTable(k, n_rows, n_cols, vocab_size, np.asarray(cells), tuple(words))


def seed_of(path):
    """Seed recorded in a file's magic line, if any."""
    with open(path, encoding="utf-8") as fh:
        head = fh.readline().split()
    for f in head:
        if f.startswith("seed="):
            return int(f[5:])
    return None


class UniformLM:
    """Every code equally likely; handy as a baseline and in tests."""

    def __init__(self, n_codes):
        self.n_codes = n_codes

    def sequence_log_probs(self, codes):
        return np.full((len(codes), self.n_codes), -np.log(self.n_codes))
