"""Wall-time and tensor-memory scaling of (mixture) softmax output layers."""

import statistics
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from threadpoolctl import threadpool_limits

from ._validation import check_positive_int
from .exceptions import ArgumentError, ResourceError

MAGIC = "#bench-v1"
FLOAT_BYTES = 8


@dataclass(frozen=True)
class BenchSpec:
    batch: int = 32
    hidden: int = 256
    sizes: tuple = (10000, 30000)
    mixtures: tuple = (1, 3)
    reps: int = 5
    warmup: int = 1
    seed: int = 0
    workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, "sizes", tuple(self.sizes))
        object.__setattr__(self, "mixtures", tuple(self.mixtures))
        for name in ("batch", "hidden", "reps", "warmup", "workers"):
            check_positive_int(getattr(self, name), name)
        check_positive_int(self.seed, "seed", allow_zero=True)
        if self.reps < 3:
            raise ArgumentError(f"reps must be >= 3, got {self.reps}")
        if not self.sizes or not self.mixtures:
            raise ArgumentError("sizes and mixtures must be nonempty")
        for n in self.sizes:
            check_positive_int(n, "output size")
        for m in self.mixtures:
            check_positive_int(m, "mixture count")


@dataclass(frozen=True)
class BenchResult:
    n_out: int
    n_mix: int
    batch: int
    hidden: int
    median_ms: float
    bytes: int
    spread: float
    checksum: float

    @property
    def config(self):
        return f"n={self.n_out},M={self.n_mix},B={self.batch},d={self.hidden}"


def tensor_bytes(n_out, hidden, batch, n_mix, itemsize=FLOAT_BYTES):
    """Bytes held by the tensors whose size grows with the output dictionary.

    The embedding is shared across mixture components; logits and
    probabilities exist once per component.
    """
    embedding = n_out * hidden * itemsize
    logits = n_mix * batch * n_out * itemsize
    probs = n_mix * batch * n_out * itemsize
    return {"embedding": embedding, "logits": logits, "probs": probs,
            "total": embedding + logits + probs}


class _Workspace:
    """Preallocated logits/output buffers so timed passes do not hit the allocator."""

    def __init__(self, H, W, pi, workers):
        self.H, self.W, self.pi = H, W, pi
        B = H.shape[1]
        step = -(-B // workers)
        self.chunks = [slice(i, min(i + step, B)) for i in range(0, B, step)]
        self.z = np.empty((B, W.shape[0]))
        self.out = np.empty((B, W.shape[0]))
        self.pool = ThreadPoolExecutor(workers) if workers > 1 else None

    def _rows(self, rows):
        H, W, pi = self.H, self.W, self.pi
        z, out = self.z[rows], self.out[rows]
        out.fill(0.0)
        for k in range(H.shape[0]):
            np.matmul(H[k, rows], W.T, out=z)
            z -= z.max(axis=1, keepdims=True)
            np.exp(z, out=z)
            z *= pi[rows, k, None] / z.sum(axis=1, keepdims=True)
            out += z

    def forward(self):
        """Average of ``len(H)`` softmaxes over ``W``; ``H`` is (M, B, d)."""
        if self.pool is None:
            self._rows(self.chunks[0])
        else:
            list(self.pool.map(self._rows, self.chunks))
        return self.out

    def close(self):
        if self.pool is not None:
            self.pool.shutdown()


def _setup(n_out, n_mix, spec, seed):
    rng = np.random.default_rng(seed)
    try:
        W = rng.standard_normal((n_out, spec.hidden)) / np.sqrt(spec.hidden)
        H = rng.standard_normal((n_mix, spec.batch, spec.hidden))
        logits = rng.standard_normal((spec.batch, n_mix))
        pi = np.exp(logits - logits.max(axis=1, keepdims=True))
        pi /= pi.sum(axis=1, keepdims=True)
        return _Workspace(H, W, pi, spec.workers)
    except MemoryError:
        raise ResourceError(f"cannot allocate tensors for n={n_out}, M={n_mix}") from None


def _time(fn, reps, warmup):
    for _ in range(warmup):
        fn()
    times = []
    for _ in range(reps):
        t0 = time.perf_counter()
        fn()
        times.append((time.perf_counter() - t0) * 1e3)
    return times


def run_bench(spec):
    """Measure every (size, mixtures) pair, timing them round-robin per repetition."""
    configs = [(n, m) for n in spec.sizes for m in spec.mixtures]
    spaces = []
    times = [[] for _ in configs]
    try:
        for n, m in configs:
            spaces.append(_setup(n, m, spec, spec.seed))
        with threadpool_limits(limits=1 if spec.workers == 1 else None):
            for _ in range(spec.warmup):
                for ws in spaces:
                    ws.forward()
            for _ in range(spec.reps):
                for ws, acc in zip(spaces, times):
                    acc += _time(ws.forward, 1, 0)
    finally:
        for ws in spaces:
            ws.close()
    return [
        BenchResult(
            n, m, spec.batch, spec.hidden,
            median_ms=statistics.median(t),
            bytes=tensor_bytes(n, spec.hidden, spec.batch, m)["total"],
            spread=max(t) / min(t),
            checksum=float(ws.out.sum()),
        )
        for (n, m), ws, t in zip(configs, spaces, times)
    ]


@dataclass(frozen=True)
class Comparison:
    vocab_size: int
    code_dict_size: int
    n_mix: int
    flat_ms: float
    coded_ms: float
    time_ratio: float           # coded (two positions) / flat
    per_position_ratio: float   # one coded position / flat
    memory_ratio: float         # per-softmax tensor bytes, coded / flat


def compare_coded_vs_flat(vocab_size, code_dict_size, n_mix, spec):
    """Cost of predicting two codes over the code dictionary vs one word over the vocabulary."""
    check_positive_int(vocab_size, "vocab_size")
    check_positive_int(code_dict_size, "code_dict_size")
    if code_dict_size > vocab_size:
        raise ArgumentError("code_dict_size must not exceed vocab_size")
    flat = _setup(vocab_size, n_mix, spec, spec.seed)
    coded = _setup(code_dict_size, n_mix, spec, spec.seed)

    def run_coded():
        coded.forward()
        coded.forward()

    # interleave the two so slow drift on the host hits both medians alike
    flat_t, coded_t = [], []
    try:
        with threadpool_limits(limits=1 if spec.workers == 1 else None):
            for _ in range(spec.warmup):
                flat.forward()
                run_coded()
            for _ in range(spec.reps):
                flat_t += _time(flat.forward, 1, 0)
                coded_t += _time(run_coded, 1, 0)
    finally:
        flat.close()
        coded.close()
    flat_ms, coded_ms = statistics.median(flat_t), statistics.median(coded_t)
    per_flat = tensor_bytes(vocab_size, spec.hidden, spec.batch, 1)
    per_coded = tensor_bytes(code_dict_size, spec.hidden, spec.batch, 1)
    mem = (per_coded["embedding"] + per_coded["logits"]) / (per_flat["embedding"] + per_flat["logits"])
    return Comparison(
        vocab_size, code_dict_size, n_mix, flat_ms, coded_ms,
        coded_ms / flat_ms, coded_ms / (2 * flat_ms), mem,
    )


def format_results(results, spec, comparison=None):
    lines = [f"{MAGIC} seed={spec.seed} reps={spec.reps} warmup={spec.warmup}"]
    for r in results:
        lines.append(f"{r.config}\t{r.median_ms:.3f}\t{r.bytes}\t{r.spread:.3f}")
    if comparison is not None:
        c = comparison
        lines.append(
            f"#compare vocab={c.vocab_size} codes={c.code_dict_size} M={c.n_mix} "
            f"time_ratio={c.time_ratio:.3f} memory_ratio={c.memory_ratio!r}"
        )
    lines.append(f"#summary configs={len(results)} total_bytes={sum(r.bytes for r in results)}")
    return "\n".join(lines) + "\n"
