from fractions import Fraction

import numpy as np
import pytest

from codemos.bench import (
    BenchSpec,
    compare_coded_vs_flat,
    format_results,
    run_bench,
    tensor_bytes,
)
from codemos.exceptions import ArgumentError
from codemos.mos import softmax


def retry(check, attempts=3):
    """Timing assertions get a few re-runs to ride out host noise."""
    for _ in range(attempts - 1):
        if check():
            return
    assert check()


def test_tensor_bytes_arithmetic():
    b = tensor_bytes(30000, 256, 32, 3)
    assert b["probs"] == 23_040_000
    assert b["logits"] == 23_040_000
    assert b["embedding"] == 30000 * 256 * 8
    assert b["total"] == sum(v for k, v in b.items() if k != "total")


def test_memory_ratio_exactly_one_third():
    spec = BenchSpec(batch=4, hidden=8, sizes=(30,), mixtures=(1,), reps=3)
    c = compare_coded_vs_flat(30000, 10000, 1, spec)
    assert Fraction(c.memory_ratio).limit_denominator(1000) == Fraction(1, 3)
    assert c.memory_ratio == 1 / 3


def test_spec_validation():
    with pytest.raises(ArgumentError):
        BenchSpec(reps=2)
    with pytest.raises(ArgumentError):
        BenchSpec(sizes=())
    with pytest.raises(ArgumentError):
        BenchSpec(mixtures=(0,))
    with pytest.raises(ArgumentError):
        compare_coded_vs_flat(10, 20, 1, BenchSpec())


def test_forward_is_a_mixture_of_softmaxes():
    from codemos.bench import _setup

    spec = BenchSpec(batch=3, hidden=4, sizes=(7,), mixtures=(2,), reps=3)
    ws = _setup(7, 2, spec, 0)
    out = ws.forward().copy()
    ref = sum(ws.pi[:, k, None] * softmax(ws.H[k] @ ws.W.T) for k in range(2))
    np.testing.assert_allclose(out, ref, atol=1e-14)
    np.testing.assert_allclose(out.sum(axis=1), 1.0, atol=1e-12)


def test_one_config_one_line():
    spec = BenchSpec(batch=4, hidden=8, sizes=(100,), mixtures=(1,), reps=3)
    text = format_results(run_bench(spec), spec)
    lines = text.splitlines()
    assert lines[0].startswith("#bench-v1 seed=0")
    assert len([x for x in lines if not x.startswith("#")]) == 1


def test_non_timing_outputs_deterministic():
    spec = BenchSpec(batch=8, hidden=16, sizes=(500, 900), mixtures=(1, 2), reps=3, seed=5)
    a, b = run_bench(spec), run_bench(spec)
    assert [(r.config, r.bytes, r.checksum) for r in a] == [(r.config, r.bytes, r.checksum) for r in b]


def test_threaded_forward_matches_serial():
    a = run_bench(BenchSpec(batch=8, hidden=16, sizes=(300,), mixtures=(2,), reps=3))
    b = run_bench(BenchSpec(batch=8, hidden=16, sizes=(300,), mixtures=(2,), reps=3, workers=3))
    assert a[0].checksum == pytest.approx(b[0].checksum, rel=1e-12)


def test_time_monotone_in_size_and_mixtures():
    spec = BenchSpec(batch=32, hidden=128, sizes=(4000, 12000), mixtures=(1, 2), reps=5)

    def check():
        t = {(r.n_out, r.n_mix): r.median_ms for r in run_bench(spec)}
        return t[4000, 1] <= t[12000, 1] and t[4000, 2] <= t[12000, 2] and \
            t[4000, 1] <= t[4000, 2] and t[12000, 1] <= t[12000, 2]

    retry(check)


def test_mixture_doubling_ratio():
    spec = BenchSpec(batch=32, hidden=256, sizes=(10000,), mixtures=(2, 4), reps=5)

    def check():
        t = {r.n_mix: r.median_ms for r in run_bench(spec)}
        return 1.6 <= t[4] / t[2] <= 2.4

    retry(check)


def test_equal_sizes_same_per_position_cost():
    spec = BenchSpec(batch=32, hidden=256, sizes=(8000,), mixtures=(1,), reps=7)

    def check():
        return 0.9 <= compare_coded_vs_flat(8000, 8000, 1, spec).per_position_ratio <= 1.1

    retry(check)
