"""Byte pair encoding over a frequency-weighted word vocabulary.

Training works on word types weighted by their counts. Every word is split into
characters followed by an explicit end-of-word code, and the most frequent
adjacent pair is merged until the dictionary reaches its budget or no pair
occurs at least twice.
"""

import heapq
from collections import Counter, defaultdict
from dataclasses import dataclass

from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import as_sentences, check_positive_int
from .corpus import Vocabulary, build_vocab
from .exceptions import ArgumentError, MalformedSequenceError

EOW = "</w>"
MAGIC = "#bpe-v1"


@dataclass(frozen=True)
class MergeRule:
    left: str
    right: str

    @property
    def merged(self):
        return self.left + self.right


@dataclass(frozen=True)
class MergeList:
    rules: tuple
    alphabet: frozenset
    eow: str = EOW

    def __post_init__(self):
        object.__setattr__(self, "rules", tuple(self.rules))
        object.__setattr__(self, "alphabet", frozenset(self.alphabet))
        known = set(self.alphabet) | {self.eow}
        seen = set()
        for rule in self.rules:
            if (rule.left, rule.right) in seen:
                raise ArgumentError(f"duplicate merge rule {rule}")
            if rule.left not in known or rule.right not in known:
                raise ArgumentError(f"rule {rule} uses an unknown code")
            seen.add((rule.left, rule.right))
            known.add(rule.merged)

    @property
    def dict_size(self):
        return len(self.alphabet | {self.eow}) + len(self.rules)

    @property
    def ranks(self):
        return {(r.left, r.right): i for i, r in enumerate(self.rules)}


def _alphabet(vocab):
    return frozenset(ch for w in vocab.words for ch in w)


def _pairs(seq):
    return zip(seq, seq[1:])


def _merge_seq(seq, left, right):
    out = []
    i = 0
    n = len(seq)
    while i < n:
        if i + 1 < n and seq[i] == left and seq[i + 1] == right:
            out.append(left + right)
            i += 2
        else:
            out.append(seq[i])
            i += 1
    return out


def train_bpe(vocab, target_dict_size, eow=EOW):
    """Learn merge rules until the dictionary holds ``target_dict_size`` codes.

    The dictionary starts as the vocabulary's characters plus ``eow``; each
    merge adds one code. Ties on pair frequency go to the lexicographically
    smallest ``(left, right)``.
    """
    if not isinstance(vocab, Vocabulary):
        raise ArgumentError("train_bpe expects a Vocabulary")
    check_positive_int(target_dict_size, "target_dict_size")
    alphabet = _alphabet(vocab)
    for w in vocab.words:
        if eow in w:
            raise ArgumentError(f"word {w!r} contains the end-of-word marker {eow!r}")
    base = len(alphabet | {eow})
    if target_dict_size < base:
        raise ArgumentError(
            f"target_dict_size={target_dict_size} is below the alphabet size {base}"
        )

    segs = [list(w) + [eow] for w in vocab.words]
    freqs = list(vocab.counts)
    stats = Counter()
    where = defaultdict(set)
    for idx, seq in enumerate(segs):
        for pair in _pairs(seq):
            stats[pair] += freqs[idx]
            where[pair].add(idx)
    heap = [(-c, p[0], p[1]) for p, c in stats.items()]
    heapq.heapify(heap)

    rules = []
    while base + len(rules) < target_dict_size:
        best = None
        while heap:
            neg, left, right = heapq.heappop(heap)
            if stats.get((left, right), 0) == -neg and -neg > 0:
                best = (left, right, -neg)
                break
        if best is None or best[2] < 2:
            break
        left, right, _ = best
        rules.append(MergeRule(left, right))
        touched = set()
        for idx in sorted(where.pop((left, right), ())):
            old = segs[idx]
            new = _merge_seq(old, left, right)
            if len(new) == len(old):
                continue
            f = freqs[idx]
            for pair in _pairs(old):
                stats[pair] -= f
                touched.add(pair)
            for pair in _pairs(new):
                stats[pair] += f
                where[pair].add(idx)
                touched.add(pair)
            segs[idx] = new
        stats.pop((left, right), None)
        for pair in touched:
            c = stats.get(pair, 0)
            if c > 0:
                heapq.heappush(heap, (-c, pair[0], pair[1]))
            else:
                stats.pop(pair, None)
    return MergeList(tuple(rules), alphabet, eow)


def bpe_encode(word, merges, _ranks=None):
    """Segment ``word`` by replaying ``merges`` in rule order."""
    if not word:
        raise ArgumentError("cannot encode an empty word")
    ranks = merges.ranks if _ranks is None else _ranks
    seq = list(word) + [merges.eow]
    # Lowest-rank pair first is equivalent to replaying rules in order:
    # a merge only creates pairs containing the new code, whose rules rank later.
    while len(seq) > 1:
        best = None
        for pair in _pairs(seq):
            r = ranks.get(pair)
            if r is not None and (best is None or r < best[0]):
                best = (r, pair)
        if best is None:
            break
        seq = _merge_seq(seq, *best[1])
    return seq


def bpe_decode(codes, eow=EOW):
    words = []
    buf = []
    for code in codes:
        if code.endswith(eow):
            word = "".join(buf) + code[: len(code) - len(eow)]
            if not word:
                raise MalformedSequenceError("empty word before end-of-word marker", position=len(words))
            words.append(word)
            buf = []
        else:
            buf.append(code)
    if buf:
        raise MalformedSequenceError(
            f"code stream ends mid-word with dangling suffix {buf!r}", suffix=list(buf)
        )
    return words


def save_merges(merges, path, seed=None):
    alphabet = "".join(sorted(merges.alphabet))
    header = f"{MAGIC} {merges.eow} alphabet={alphabet}"
    if seed is not None:
        header += f" seed={seed}"
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(header + "\n")
        for rule in merges.rules:
            fh.write(f"{rule.left} {rule.right}\n")


def load_merges(path):
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().split("\n")
    head = lines[0].split(" ")
    if not head or head[0] != MAGIC or len(head) < 2:
        raise ArgumentError(f"{path}: not a {MAGIC} merge file")
    eow = head[1]
    meta = dict(f.split("=", 1) for f in head[2:] if "=" in f)
    rules = []
    for lineno, line in enumerate(lines[1:], 2):
        if not line:
            continue
        parts = line.split(" ")
        if len(parts) != 2:
            raise ArgumentError(f"{path}:{lineno}: expected 'left right'")
        rules.append(MergeRule(*parts))
    alphabet = meta.get("alphabet")
    if alphabet is None:
        # older files without the alphabet field: infer it from the rules
        alphabet = {ch for r in rules for code in (r.left, r.right) for ch in code.replace(eow, "")}
    return MergeList(tuple(rules), frozenset(alphabet), eow)


class BPETokenizer(TransformerMixin, BaseEstimator):
    """Subword coder: ``fit`` learns merges, ``transform`` maps sentences to codes.

    Parameters
    ----------
    dict_size : int
        Target number of codes (characters + end-of-word marker + merges).
    eow : str
        End-of-word marker appended to every word.
    max_vocab : int or None
        Only the most frequent words take part in training.
    """

    def __init__(self, dict_size=1000, eow=EOW, max_vocab=None):
        self.dict_size = dict_size
        self.eow = eow
        self.max_vocab = max_vocab

    def fit(self, X, y=None):
        sentences = as_sentences(X)
        self.vocab_ = build_vocab(sentences, self.max_vocab)
        self.merges_ = train_bpe(self.vocab_, self.dict_size, self.eow)
        self._ranks = self.merges_.ranks
        return self

    @classmethod
    def from_merges(cls, merges):
        tok = cls(dict_size=merges.dict_size, eow=merges.eow)
        tok.merges_ = merges
        tok._ranks = merges.ranks
        return tok

    def encode_word(self, word):
        check_is_fitted(self, "merges_")
        return bpe_encode(word, self.merges_, self._ranks)

    def transform(self, X):
        check_is_fitted(self, "merges_")
        cache = {}
        out = []
        for sent in as_sentences(X):
            codes = []
            for w in sent:
                if w not in cache:
                    cache[w] = bpe_encode(w, self.merges_, self._ranks)
                codes.extend(cache[w])
            out.append(codes)
        return out

    def inverse_transform(self, Xt):
        check_is_fitted(self, "merges_")
        return [" ".join(bpe_decode(codes, self.merges_.eow)) for codes in Xt]
