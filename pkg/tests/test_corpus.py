import pytest
from hypothesis import given
from hypothesis import strategies as st

from codemos.corpus import (
    UNK,
    Vocabulary,
    build_vocab,
    count_tokens,
    load_vocab,
    read_corpus,
    save_vocab,
    synthetic_corpus,
    tokenize,
)
from codemos.exceptions import ArgumentError, CorpusDecodeError

words = st.text(alphabet="abcde", min_size=1, max_size=4)
corpora = st.lists(st.lists(words, max_size=6), min_size=1, max_size=8).filter(
    lambda c: any(c)
)


@pytest.mark.parametrize("text, expected", [
    ("a b  c", ["a", "b", "c"]),
    ("", []),
    ("x\ty\nz", ["x", "y", "z"]),
    ("a　b c", ["a", "b", "c"]),
])
def test_tokenize(text, expected):
    assert tokenize(text) == expected


def test_tokenize_rejects_bad_utf8():
    with pytest.raises(CorpusDecodeError) as err:
        tokenize(b"ok \xff")
    assert err.value.offset == 3


def test_build_vocab_examples():
    assert build_vocab(["b a b"], 2).entries == (("b", 2), ("a", 1))
    assert build_vocab(["a b"], 2).entries == (("a", 1), ("b", 1))
    v = build_vocab(["p q r s t"], 3)
    assert len(v) == 3 and sum(v.counts) == 3


def test_build_vocab_errors():
    with pytest.raises(ArgumentError):
        build_vocab([""])
    with pytest.raises(ArgumentError):
        build_vocab(["a"], 0)


def test_vocabulary_lookup():
    v = build_vocab(["a a b"])
    assert v.id("a") == 0 and v.id("zz") == v.unk_id == 2
    assert v.word(v.unk_id) == UNK
    assert "b" in v and "c" not in v


def test_vocabulary_validates_order():
    with pytest.raises(ArgumentError):
        Vocabulary((("a", 1), ("b", 2)))
    with pytest.raises(ArgumentError):
        Vocabulary((("a b", 1),))


@given(corpora, st.randoms(use_true_random=False))
def test_build_vocab_ignores_sentence_order(corpus, rnd):
    shuffled = list(corpus)
    rnd.shuffle(shuffled)
    assert build_vocab(corpus) == build_vocab(shuffled)


@given(corpora)
def test_build_vocab_idempotent(corpus):
    v = build_vocab(corpus)
    # rebuilding from the vocabulary's own expansion gives the same ranking
    expanded = [[w] * c for w, c in v.entries]
    assert build_vocab(expanded) == v


@given(corpora)
def test_counts_sum_to_token_total(corpus):
    assert sum(build_vocab(corpus).counts) == sum(len(s) for s in corpus)


def test_vocab_file_round_trip(tmp_path):
    v = build_vocab(["x y y z z z"])
    save_vocab(v, tmp_path / "v.tsv")
    assert load_vocab(tmp_path / "v.tsv") == v


def test_read_corpus(tmp_path):
    p = tmp_path / "c.txt"
    p.write_bytes("a b\n\nc\n".encode())
    assert read_corpus(p) == [["a", "b"], [], ["c"]]
    p.write_bytes(b"a \xc3")
    with pytest.raises(CorpusDecodeError):
        read_corpus(p)


def test_synthetic_corpus_covers_all_words():
    corpus = synthetic_corpus()
    assert len(count_tokens(corpus)) == 200
    assert synthetic_corpus() == corpus
