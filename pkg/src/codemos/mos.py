"""Mixture-of-softmaxes output layer and the softmax-bottleneck experiment.

A single softmax over logits ``H @ W.T`` can only produce log-probability
matrices of rank at most ``d + 1``. A mixture of ``M`` softmaxes sharing ``W``
is not bound by that limit. ``fit_output_layer`` fits either model to a
synthetic high-rank target so the gap can be measured.
"""

from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils import check_random_state
from sklearn.utils.validation import check_array, check_is_fitted

from ._validation import check_finite, check_positive_int
from .exceptions import ArgumentError, NumericOverflowError, TrainingDivergedError

REPORT_MAGIC = "#rank-v1"


def log_softmax(z, axis=-1):
    z = np.asarray(z, dtype=np.float64)
    z = z - z.max(axis=axis, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=axis, keepdims=True))


def softmax(z, axis=-1):
    z = np.asarray(z, dtype=np.float64)
    e = np.exp(z - z.max(axis=axis, keepdims=True))
    return e / e.sum(axis=axis, keepdims=True)


@dataclass
class MosParams:
    W: np.ndarray     # (V_out, d) shared output embedding
    W_h: np.ndarray   # (M, d, d_g) per-component context projection
    w_pi: np.ndarray  # (M, d_g) prior weights

    def __post_init__(self):
        self.W = np.asarray(self.W, dtype=np.float64)
        self.W_h = np.asarray(self.W_h, dtype=np.float64)
        self.w_pi = np.asarray(self.w_pi, dtype=np.float64)
        M, d, d_g = self.W_h.shape
        if M < 1 or self.W.shape[1] != d or self.w_pi.shape != (M, d_g):
            raise ArgumentError(
                f"inconsistent shapes W{self.W.shape} W_h{self.W_h.shape} w_pi{self.w_pi.shape}"
            )

    @property
    def n_mix(self):
        return self.W_h.shape[0]


def softmax_probs(h, W):
    """``softmax(W @ h)`` with max-subtraction."""
    h = check_finite(h, "h")
    W = check_finite(W, "W")
    if W.shape[-1] != h.shape[-1]:
        raise ArgumentError(f"h has dim {h.shape[-1]}, W expects {W.shape[-1]}")
    return softmax(h @ W.T)


def mixture_weights(g, params):
    return softmax(np.asarray(g) @ params.w_pi.T)


def mos_probs(g, params):
    """Prior-weighted average of ``M`` softmaxes sharing ``params.W``."""
    g = check_finite(g, "g")
    if g.shape[-1] != params.w_pi.shape[1]:
        raise ArgumentError(f"g has dim {g.shape[-1]}, params expect {params.w_pi.shape[1]}")
    pi = mixture_weights(g, params)
    out = np.zeros(g.shape[:-1] + (params.W.shape[0],))
    for k in range(params.n_mix):
        h = np.tanh(g @ params.W_h[k].T)
        out += pi[..., k, None] * softmax_probs(h, params.W)
    if not np.all(np.isfinite(out)):
        raise NumericOverflowError("non-finite mixture output")
    return out


# --- fitting -----------------------------------------------------------------

def _mos_log_q(G, W, W_h, w_pi):
    """Return log q (N, V) and the intermediates needed for the gradient."""
    log_pi = log_softmax(G @ w_pi.T)                             # (N, M)
    hs = np.tanh(np.einsum("nd,kxd->knx", G, W_h))              # (M, N, d)
    log_s = log_softmax(hs @ W.T)                                # (M, N, V)
    joint = log_pi.T[:, :, None] + log_s                         # (M, N, V)
    top = joint.max(axis=0)
    log_q = top + np.log(np.exp(joint - top).sum(axis=0))
    return log_q, log_pi, hs, log_s


def mean_kl(log_p, log_q):
    """Mean over rows of KL(p || q)."""
    return float((np.exp(log_p) * (log_p - log_q)).sum(axis=1).mean())


def single_loss_and_grad(log_p, H, W):
    """Mean KL of ``softmax(H W^T)`` and gradients with respect to H and W."""
    N = log_p.shape[0]
    log_q = log_softmax(H @ W.T)
    loss = mean_kl(log_p, log_q)
    dz = (np.exp(log_q) - np.exp(log_p)) / N
    return loss, [dz @ W, dz.T @ H]


def mos_loss_and_grad(log_p, G, W, W_h, w_pi):
    """Mean KL of the mixture and gradients for G, W, W_h, w_pi."""
    N = log_p.shape[0]
    log_q, log_pi, hs, log_s = _mos_log_q(G, W, W_h, w_pi)
    loss = mean_kl(log_p, log_q)
    # r = dL/dq = -p / (N q), kept in log space
    r = -np.exp(log_p - log_q) / N                               # (N, V)
    s = np.exp(log_s)                                            # (M, N, V)
    pi = np.exp(log_pi)                                          # (N, M)
    dpi = np.einsum("nv,knv->nk", r, s)
    dlog_pi = pi * (dpi - (pi * dpi).sum(axis=1, keepdims=True))
    dG = dlog_pi @ w_pi
    dw_pi = dlog_pi.T @ G
    dW = np.zeros_like(W)
    dW_h = np.zeros_like(W_h)
    for k in range(W_h.shape[0]):
        dz = pi[:, k, None] * s[k] * (r - dpi[:, k, None])
        dW += dz.T @ hs[k]
        da = (dz @ W) * (1.0 - hs[k] ** 2)
        dW_h[k] = da.T @ G
        dG += da @ W_h[k]
    return loss, [dG, dW, dW_h, dw_pi]


def synthetic_truth(n_contexts, v_out, rank, seed=0):
    """Log-probabilities ``log_softmax(A @ B)`` with Gaussian A (N x r), B (r x V)."""
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((n_contexts, rank))
    B = rng.standard_normal((rank, v_out))
    return log_softmax(A @ B)


@dataclass
class FitResult:
    model: str
    n_mix: int
    d: int
    kl: float
    log_q: np.ndarray
    params: dict
    history: list = field(default_factory=list)


def fit_output_layer(model, truth, d, contexts=None, n_mix=1, context_dim=None,
                     iters=3000, lr=0.05, seed=0, init_scale=0.5, restarts=1, schedule="cosine"):
    """Fit a single softmax (``model='single'``) or a mixture (``'mos'``) to ``truth``.

    ``truth`` holds log-probability rows. The single model learns ``H`` and
    ``W`` freely, i.e. the factorization ``H W^T``; the mixture learns its
    context vectors ``G`` (initialized from ``contexts`` when given) along with
    all mixture parameters. Optimization is Adam (constant or cosine-decayed
    step) on mean KL(truth || model); with ``restarts > 1`` the best of several
    seeded initializations is kept.
    """
    check_positive_int(restarts, "restarts")
    if schedule not in ("cosine", "constant"):
        raise ArgumentError(f"unknown schedule {schedule!r}; expected 'cosine' or 'constant'")
    best = None
    for r in range(restarts):
        fit = _fit_once(model, truth, d, contexts, n_mix, context_dim, iters, lr, seed + 7919 * r, init_scale, schedule)
        if best is None or fit.kl < best.kl:
            best = fit
    return best


def _fit_once(model, truth, d, contexts, n_mix, context_dim, iters, lr, seed, init_scale, schedule):
    log_p = check_array(truth, dtype=np.float64)
    if not np.allclose(np.exp(log_p).sum(axis=1), 1.0, atol=1e-9):
        raise ArgumentError("truth rows must be normalized log-probabilities")
    check_positive_int(d, "d")
    check_positive_int(iters, "iters", allow_zero=True)
    N, V = log_p.shape
    rng = np.random.default_rng(seed)
    if model == "single":
        params = {"H": rng.normal(0, init_scale, (N, d)), "W": rng.normal(0, init_scale, (V, d))}
        n_mix = 1

        def objective(p):
            return single_loss_and_grad(log_p, p["H"], p["W"])
    elif model == "mos":
        check_positive_int(n_mix, "n_mix")
        d_g = context_dim or d
        G = rng.normal(0, 1.0, (N, d_g)) if contexts is None else np.array(contexts, dtype=np.float64)
        if G.shape != (N, d_g):
            raise ArgumentError(f"contexts must have shape {(N, d_g)}, got {G.shape}")
        params = {
            "G": G,
            "W": rng.normal(0, init_scale, (V, d)),
            # keep W_h @ g near unit scale so tanh starts unsaturated
            "W_h": rng.normal(0, 1.0 / np.sqrt(d_g), (n_mix, d, d_g)),
            "w_pi": rng.normal(0, 1.0 / np.sqrt(d_g), (n_mix, d_g)),
        }

        def objective(p):
            return mos_loss_and_grad(log_p, p["G"], p["W"], p["W_h"], p["w_pi"])
    else:
        raise ArgumentError(f"unknown model {model!r}; expected 'single' or 'mos'")

    names = list(params)
    m = {k: np.zeros_like(v) for k, v in params.items()}
    v2 = {k: np.zeros_like(v) for k, v in params.items()}
    b1, b2, eps = 0.9, 0.999, 1e-8
    history = []
    for t in range(1, iters + 1):
        loss, grads = objective(params)
        if not np.isfinite(loss):
            raise TrainingDivergedError(t, loss)
        history.append(loss)
        step = lr if schedule == "constant" else lr * 0.5 * (1.0 + np.cos(np.pi * (t - 1) / iters))
        for name, g in zip(names, grads):
            m[name] = b1 * m[name] + (1 - b1) * g
            v2[name] = b2 * v2[name] + (1 - b2) * g * g
            mhat = m[name] / (1 - b1 ** t)
            vhat = v2[name] / (1 - b2 ** t)
            params[name] -= step * mhat / (np.sqrt(vhat) + eps)
    loss, _ = objective(params)
    if not np.isfinite(loss):
        raise TrainingDivergedError(iters, loss)
    if model == "single":
        log_q = log_softmax(params["H"] @ params["W"].T)
    else:
        log_q = _mos_log_q(params["G"], params["W"], params["W_h"], params["w_pi"])[0]
    return FitResult(model, n_mix, d, loss, log_q, params, history)


def numerical_rank(matrix, rel_tol=1e-6):
    """Number of singular values above ``rel_tol`` times the largest one."""
    s = np.linalg.svd(np.asarray(matrix, dtype=np.float64), compute_uv=False)
    if s.size == 0 or s[0] == 0:
        return 0
    return int(np.count_nonzero(s > rel_tol * s[0]))


# --- reports -------------------------------------------------------------------

@dataclass(frozen=True)
class BottleneckConfig:
    n_contexts: int = 16
    v_out: int = 16
    d: int = 2
    truth_rank: int = 8
    mixtures: tuple = (4,)
    seeds: tuple = (0,)
    iters: int = 12000
    lr: float = 0.05
    restarts: int = 2
    context_dim: int = None  # defaults to n_contexts: one free context vector per row
    rel_tol: float = 1e-6


@dataclass(frozen=True)
class RankRecord:
    model: str
    n_mix: int
    d: int
    kl: float
    rank: int
    seed: int = 0


def bottleneck_report(cfg):
    """Fit a single softmax and each requested mixture on per-seed synthetic targets."""
    records = []
    for seed in cfg.seeds:
        truth = synthetic_truth(cfg.n_contexts, cfg.v_out, cfg.truth_rank, seed)
        opts = dict(iters=cfg.iters, lr=cfg.lr, seed=seed, restarts=cfg.restarts)
        fits = [fit_output_layer("single", truth, cfg.d, **opts)]
        for m in cfg.mixtures:
            fits.append(fit_output_layer("mos", truth, cfg.d, n_mix=m,
                                         context_dim=cfg.context_dim or cfg.n_contexts, **opts))
        for f in fits:
            records.append(RankRecord(f.model, f.n_mix, f.d, f.kl, numerical_rank(f.log_q, cfg.rel_tol), seed))
    return records


def format_report(records):
    lines = [REPORT_MAGIC]
    seed = None
    for r in records:
        if r.seed != seed:
            seed = r.seed
            lines.append(f"#seed {seed}")
        lines.append(f"{r.model}\t{r.n_mix}\t{r.d}\t{r.kl!r}\t{r.rank}")
    return "\n".join(lines) + "\n"


def parse_report(text):
    lines = text.split("\n")
    if not lines or lines[0].split()[:1] != [REPORT_MAGIC]:
        raise ArgumentError(f"not a {REPORT_MAGIC} report")
    seed = 0
    out = []
    for line in lines[1:]:
        if not line:
            continue
        if line.startswith("#seed "):
            seed = int(line[6:])
            continue
        model, n_mix, d, kl, rank = line.split("\t")
        out.append(RankRecord(model, int(n_mix), int(d), float(kl), int(rank), seed))
    return out


class MixtureOfSoftmaxes(BaseEstimator):
    """Output-layer estimator fitted to a matrix of target log-probabilities.

    ``n_components=None`` selects the plain softmax ``H W^T``; an integer
    selects a mixture with that many components. After ``fit``,
    ``predict_log_proba()`` returns the fitted log-probability matrix.
    """

    def __init__(self, n_components=None, dim=2, context_dim=None, max_iter=3000,
                 learning_rate=0.05, n_restarts=1, schedule="cosine", random_state=0):
        self.n_components = n_components
        self.dim = dim
        self.context_dim = context_dim
        self.max_iter = max_iter
        self.learning_rate = learning_rate
        self.n_restarts = n_restarts
        self.schedule = schedule
        self.random_state = random_state

    def fit(self, X, y=None):
        seed = check_random_state(self.random_state).randint(2**31 - 1) \
            if not isinstance(self.random_state, int) else self.random_state
        model = "single" if self.n_components is None else "mos"
        self.result_ = fit_output_layer(
            model, X, self.dim, n_mix=self.n_components or 1, context_dim=self.context_dim,
            iters=self.max_iter, lr=self.learning_rate, seed=seed,
            restarts=self.n_restarts, schedule=self.schedule,
        )
        self.kl_ = self.result_.kl
        return self

    def predict_log_proba(self, X=None):
        check_is_fitted(self, "result_")
        return self.result_.log_q

    def predict_proba(self, X=None):
        return np.exp(self.predict_log_proba(X))

    def score(self, X, y=None):
        """Negative mean KL(X || fitted)."""
        check_is_fitted(self, "result_")
        return -mean_kl(check_array(X), self.result_.log_q)

    def rank(self, rel_tol=1e-6):
        return numerical_rank(self.predict_log_proba(), rel_tol)
