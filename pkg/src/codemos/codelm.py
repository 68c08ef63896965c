"""Single-layer tanh RNN over code sequences, trained with BPTT and plain SGD.

Each sentence is scored from a zero hidden state with a reserved BOS input
code (index ``n_codes`` in the input embedding, never predicted).
"""

from dataclasses import dataclass, fields

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import check_positive_float, check_positive_int
from .exceptions import ArgumentError, NumericOverflowError, TrainingDivergedError

MAGIC = "#codelm-v1"
INIT_SCALE = 0.08


@dataclass
class CodeLmParams:
    emb: np.ndarray   # (n_codes + 1, d_emb); last row is BOS
    W_xh: np.ndarray  # (d_emb, d_hid)
    W_hh: np.ndarray  # (d_hid, d_hid)
    b_h: np.ndarray   # (d_hid,)
    U: np.ndarray     # (n_codes, d_hid)
    b_o: np.ndarray   # (n_codes,)

    def __post_init__(self):
        for f in fields(self):
            setattr(self, f.name, np.asarray(getattr(self, f.name), dtype=np.float64))
        n, d_hid = self.U.shape
        d_emb = self.emb.shape[1]
        expected = {
            "emb": (n + 1, d_emb), "W_xh": (d_emb, d_hid), "W_hh": (d_hid, d_hid),
            "b_h": (d_hid,), "U": (n, d_hid), "b_o": (n,),
        }
        for name, shape in expected.items():
            if getattr(self, name).shape != shape:
                raise ArgumentError(f"{name} has shape {getattr(self, name).shape}, expected {shape}")

    @property
    def n_codes(self):
        return self.U.shape[0]

    @property
    def bos(self):
        return self.U.shape[0]

    @property
    def d_emb(self):
        return self.emb.shape[1]

    @property
    def d_hid(self):
        return self.U.shape[1]

    def tensors(self):
        return [(f.name, getattr(self, f.name)) for f in fields(self)]

    def copy(self):
        return CodeLmParams(*(t.copy() for _, t in self.tensors()))

    def zeros_like(self):
        return CodeLmParams(*(np.zeros_like(t) for _, t in self.tensors()))

    def __eq__(self, other):
        if not isinstance(other, CodeLmParams):
            return NotImplemented
        return all(np.array_equal(a, b) for (_, a), (_, b) in zip(self.tensors(), other.tensors()))

    __hash__ = None

    # sequence scoring, so a params object can serve as the lm in codetable/assign
    def sequence_log_probs(self, codes):
        return sequence_log_probs(self, codes)


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 0.5
    epochs: int = 10
    batch_size: int = 16
    clip: float = 5.0
    seed: int = 0

    def __post_init__(self):
        check_positive_float(self.lr, "lr", allow_zero=True)
        check_positive_int(self.epochs, "epochs", allow_zero=True)
        check_positive_int(self.batch_size, "batch_size")
        check_positive_float(self.clip, "clip")
        check_positive_int(self.seed, "seed", allow_zero=True)


def init_params(n_codes, d_emb, d_hid, seed=0, scale=INIT_SCALE):
    rng = np.random.default_rng(seed)
    u = lambda *shape: rng.uniform(-scale, scale, size=shape)  # noqa: E731
    return CodeLmParams(
        emb=u(n_codes + 1, d_emb), W_xh=u(d_emb, d_hid), W_hh=u(d_hid, d_hid),
        b_h=u(d_hid), U=u(n_codes, d_hid), b_o=u(n_codes),
    )


def zero_params(n_codes, d_emb, d_hid):
    return init_params(n_codes, d_emb, d_hid, scale=0.0)


def log_softmax(z, axis=-1):
    z = z - z.max(axis=axis, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=axis, keepdims=True))


def lm_step(params, state, code):
    """One recurrence step: returns ``(new_state, log_probs)``."""
    if not 0 <= code <= params.bos:
        raise ArgumentError(f"code {code} outside [0, {params.bos}]")
    h = np.tanh(np.asarray(state) @ params.W_hh + params.emb[code] @ params.W_xh + params.b_h)
    logp = log_softmax(h @ params.U.T + params.b_o)
    if not (np.all(np.isfinite(h)) and np.all(np.isfinite(logp))):
        raise NumericOverflowError("non-finite value in lm_step")
    return h, logp


def sequence_log_probs(params, codes):
    """Predictive log-probabilities at every position of one sentence."""
    codes = np.asarray(codes, dtype=np.int64)
    if len(codes) == 0:
        return np.zeros((0, params.n_codes))
    inputs = np.concatenate([[params.bos], codes[:-1]])
    h = np.zeros(params.d_hid)
    xs = params.emb[inputs] @ params.W_xh + params.b_h
    hs = np.empty((len(codes), params.d_hid))
    for t in range(len(codes)):
        h = np.tanh(h @ params.W_hh + xs[t])
        hs[t] = h
    logp = log_softmax(hs @ params.U.T + params.b_o)
    if not np.all(np.isfinite(logp)):
        raise NumericOverflowError("non-finite log-probabilities")
    return logp


def _pad(batch, bos):
    lengths = [len(s) for s in batch]
    T = max(lengths)
    B = len(batch)
    X = np.full((B, T), bos, dtype=np.int64)
    Y = np.zeros((B, T), dtype=np.int64)
    M = np.zeros((B, T))
    for b, seq in enumerate(batch):
        seq = np.asarray(seq, dtype=np.int64)
        L = len(seq)
        if L == 0:
            continue
        X[b, 1:L] = seq[:-1]
        Y[b, :L] = seq
        M[b, :L] = 1.0
    return X, Y, M


def lm_loss_and_grad(params, batch):
    """Mean per-code NLL over ``batch`` and its gradient (a CodeLmParams)."""
    batch = [s for s in batch]
    if not batch:
        raise ArgumentError("empty batch")
    X, Y, M = _pad(batch, params.bos)
    n_tok = M.sum()
    if n_tok == 0:
        raise ArgumentError("batch holds no codes")
    B, T = X.shape
    H = np.zeros((T + 1, B, params.d_hid))
    P = np.empty((T, B, params.n_codes))
    loss = 0.0
    for t in range(T):
        H[t + 1] = np.tanh(H[t] @ params.W_hh + params.emb[X[:, t]] @ params.W_xh + params.b_h)
        logp = log_softmax(H[t + 1] @ params.U.T + params.b_o)
        loss -= float((logp[np.arange(B), Y[:, t]] * M[:, t]).sum())
        P[t] = np.exp(logp)
    loss /= n_tok
    if not np.isfinite(loss):
        raise NumericOverflowError("non-finite loss")

    g = params.zeros_like()
    dh_next = np.zeros((B, params.d_hid))
    for t in reversed(range(T)):
        dz = P[t]
        dz[np.arange(B), Y[:, t]] -= 1.0
        dz *= (M[:, t] / n_tok)[:, None]
        g.U += dz.T @ H[t + 1]
        g.b_o += dz.sum(axis=0)
        dh = dz @ params.U + dh_next
        da = dh * (1.0 - H[t + 1] ** 2)
        g.W_hh += H[t].T @ da
        x = params.emb[X[:, t]]
        g.W_xh += x.T @ da
        g.b_h += da.sum(axis=0)
        np.add.at(g.emb, X[:, t], da @ params.W_xh.T)
        dh_next = da @ params.W_hh.T
    return loss, g


def train_lm(params, corpus, cfg):
    """Plain SGD with global-norm clipping. Returns ``(params, history)``.

    ``history[e]`` is the code-weighted mean training NLL seen during epoch ``e``.
    """
    corpus = [np.asarray(s, dtype=np.int64) for s in corpus if len(s)]
    if not corpus:
        raise ArgumentError("corpus is empty")
    params = params.copy()
    rng = np.random.default_rng(cfg.seed)
    history = []
    for epoch in range(cfg.epochs):
        order = rng.permutation(len(corpus))
        total, count = 0.0, 0
        for start in range(0, len(order), cfg.batch_size):
            batch = [corpus[i] for i in order[start:start + cfg.batch_size]]
            try:
                loss, grad = lm_loss_and_grad(params, batch)
            except NumericOverflowError:
                raise TrainingDivergedError(epoch, float("nan")) from None
            n = sum(len(s) for s in batch)
            total += loss * n
            count += n
            if cfg.lr == 0:
                continue
            with np.errstate(over="ignore"):
                norm = np.sqrt(sum(float((t ** 2).sum()) for _, t in grad.tensors()))
            if not np.isfinite(norm):
                raise TrainingDivergedError(epoch, loss)
            scale = cfg.lr * min(1.0, cfg.clip / norm) if norm > 0 else cfg.lr
            for (_, p), (_, d) in zip(params.tensors(), grad.tensors()):
                p -= scale * d
        mean = total / count
        if not np.isfinite(mean) or not all(np.all(np.isfinite(t)) for _, t in params.tensors()):
            raise TrainingDivergedError(epoch, mean)
        history.append(mean)
    return params, history


def mean_nll(params, corpus):
    total, count = 0.0, 0
    for codes in corpus:
        if len(codes) == 0:
            continue
        logp = sequence_log_probs(params, codes)
        total -= float(logp[np.arange(len(codes)), codes].sum())
        count += len(codes)
    return total / count if count else 0.0


def save_checkpoint(params, path, seed=None):
    header = f"{MAGIC} {params.n_codes} {params.d_emb} {params.d_hid}"
    if seed is not None:
        header += f" seed={seed}"
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(header + "\n")
        for _, t in params.tensors():
            fh.write(" ".join(repr(float(v)) for v in t.ravel()) + "\n")


def load_checkpoint(path):
    with open(path, encoding="ascii") as fh:
        lines = fh.read().split("\n")
    head = lines[0].split()
    if not head or head[0] != MAGIC:
        raise ArgumentError(f"{path}: not a {MAGIC} checkpoint")
    n, d_emb, d_hid = (int(x) for x in head[1:4])
    shapes = [(n + 1, d_emb), (d_emb, d_hid), (d_hid, d_hid), (d_hid,), (n, d_hid), (n,)]
    tensors = []
    for line, shape in zip(lines[1:], shapes):
        vals = np.array([float(v) for v in line.split()], dtype=np.float64)
        if vals.size != int(np.prod(shape)):
            raise ArgumentError(f"{path}: tensor size mismatch for shape {shape}")
        tensors.append(vals.reshape(shape))
    if len(tensors) != len(shapes):
        raise ArgumentError(f"{path}: truncated checkpoint")
    return CodeLmParams(*tensors)


class CodeRNNLM(BaseEstimator):
    """Estimator wrapper around :func:`train_lm`.

    ``fit`` takes encoded sentences (integer code arrays); ``score`` returns the
    negative mean per-code NLL so that larger is better.
    """

    def __init__(self, n_codes=None, d_emb=16, d_hid=32, lr=0.5, epochs=10,
                 batch_size=16, clip=5.0, random_state=0):
        self.n_codes = n_codes
        self.d_emb = d_emb
        self.d_hid = d_hid
        self.lr = lr
        self.epochs = epochs
        self.batch_size = batch_size
        self.clip = clip
        self.random_state = random_state

    def _config(self):
        return TrainConfig(self.lr, self.epochs, self.batch_size, self.clip, self.random_state)

    def fit(self, X, y=None):
        X = [np.asarray(s, dtype=np.int64) for s in X]
        n = self.n_codes
        if n is None:
            n = int(max(s.max() for s in X if len(s))) + 1
        cfg = self._config()
        self.params_ = init_params(n, self.d_emb, self.d_hid, seed=cfg.seed)
        self.params_, self.history_ = train_lm(self.params_, X, cfg)
        return self

    def sequence_log_probs(self, codes):
        check_is_fitted(self, "params_")
        return sequence_log_probs(self.params_, codes)

    def score(self, X, y=None):
        check_is_fitted(self, "params_")
        return -mean_nll(self.params_, X)
