"""Whitespace tokenization and frequency-ranked vocabularies."""

from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from ._validation import check_positive_int
from .exceptions import ArgumentError, CorpusDecodeError

UNK = "<unk>"


def tokenize(text):
    """Split ``text`` on Unicode whitespace. Bytes are decoded as strict UTF-8."""
    if isinstance(text, (bytes, bytearray)):
        try:
            text = bytes(text).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise CorpusDecodeError(exc.start, exc.reason) from None
    return text.split()


@dataclass(frozen=True)
class Vocabulary:
    """Words ordered by count descending, ties broken lexicographically.

    Word ids are positions in that order; any word outside the vocabulary maps
    to ``unk_id == len(vocab)``.
    """

    entries: tuple
    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        entries = tuple((str(w), int(c)) for w, c in self.entries)
        for w, c in entries:
            if not w or any(ch.isspace() for ch in w):
                raise ArgumentError(f"invalid token {w!r}")
            if c <= 0:
                raise ArgumentError(f"count for {w!r} must be positive, got {c}")
        if list(entries) != sorted(entries, key=lambda e: (-e[1], e[0])):
            raise ArgumentError("entries must be sorted by (-count, word)")
        index = {w: i for i, (w, _) in enumerate(entries)}
        if len(index) != len(entries):
            raise ArgumentError("duplicate words in vocabulary")
        object.__setattr__(self, "entries", entries)
        object.__setattr__(self, "_index", index)

    def __len__(self):
        return len(self.entries)

    def __contains__(self, word):
        return word in self._index

    @property
    def words(self):
        return tuple(w for w, _ in self.entries)

    @property
    def counts(self):
        return tuple(c for _, c in self.entries)

    @property
    def unk_id(self):
        return len(self.entries)

    def id(self, word):
        return self._index.get(word, self.unk_id)

    def word(self, idx):
        if idx == self.unk_id:
            return UNK
        return self.entries[idx][0]

    def ids(self, tokens):
        return [self.id(t) for t in tokens]


def count_tokens(corpus):
    counts = Counter()
    for sent in corpus:
        counts.update(tokenize(sent) if isinstance(sent, (str, bytes)) else sent)
    return counts


def build_vocab(corpus, max_size=None):
    """Keep the ``max_size`` most frequent words of ``corpus``.

    ``corpus`` holds sentences, either as raw strings or token lists.
    """
    if max_size is not None:
        check_positive_int(max_size, "max_size")
    counts = count_tokens(corpus)
    if not counts:
        raise ArgumentError("corpus is empty")
    entries = sorted(counts.items(), key=lambda e: (-e[1], e[0]))
    if max_size is not None:
        entries = entries[:max_size]
    return Vocabulary(tuple(entries))


def read_corpus(path):
    """Read a one-sentence-per-line UTF-8 file into token lists."""
    with open(path, "rb") as fh:
        data = fh.read()
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise CorpusDecodeError(exc.start, f"{path}: {exc.reason}") from None
    return [tokenize(line) for line in text.splitlines()]


def save_vocab(vocab, path):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for w, c in vocab.entries:
            fh.write(f"{w}\t{c}\n")


def load_vocab(path):
    entries = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line:
                continue
            try:
                w, c = line.split("\t")
                entries.append((w, int(c)))
            except ValueError:
                raise ArgumentError(f"{path}:{lineno}: expected 'word<TAB>count'") from None
    return Vocabulary(tuple(entries))


def synthetic_corpus(n_words=200, n_sentences=400, length=8, n_classes=10, seed=0):
    """Class-based Markov text over exactly ``n_words`` word types.

    Words are split into ``n_classes`` groups; each sentence walks a noisy
    class chain and draws a Zipf-distributed word from the current class.
    Words the walk never emitted are appended as extra sentences.
    """
    rng = np.random.default_rng(seed)
    words = [f"w{i:03d}" for i in range(n_words)]
    groups = [words[c::n_classes] for c in range(n_classes)]
    nxt = rng.permutation(n_classes)
    sentences = []
    for _ in range(n_sentences):
        c = int(rng.integers(n_classes))
        sent = []
        for _ in range(length):
            group = groups[c]
            z = 1.0 / np.arange(1, len(group) + 1)
            sent.append(group[rng.choice(len(group), p=z / z.sum())])
            c = int(nxt[c]) if rng.random() < 0.8 else int(rng.integers(n_classes))
        sentences.append(sent)
    seen = {w for s in sentences for w in s}
    missing = [w for w in words if w not in seen]
    for i in range(0, len(missing), length):
        sentences.append(missing[i:i + length])
    return sentences
