"""Learning the word-to-cell assignment of a :class:`CodeTable`.

Each round trains the code language model on the corpus encoded with the
current table, turns its predictive distributions into a word x cell cost
matrix, and re-solves the assignment. Costs factorize over the two code
positions, so one forward sweep over the corpus fills the whole matrix.
"""

from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import as_sentences, check_positive_int, check_square
from .codelm import TrainConfig, init_params, train_lm
from .codetable import (
    corpus_log_likelihood,
    decode_sequence,
    encode_corpus,
    encode_ids,
    init_table,
    sentence_ids,
)
from .corpus import build_vocab
from .exceptions import ArgumentError, ContractError, SizeError

EXACT_CAP = 256
TRACE_MAGIC = "#trace-v1"


@dataclass
class CostMatrix:
    """Square assignment cost matrix in nats.

    Row ``i < len(word_ids)`` is word ``word_ids[i]``; later rows are padding.
    Column ``s`` is dense cell ``slots[s]``. ``fixed_cost`` is the NLL of every
    code the assignment cannot change (frequent words and UNK), so that the
    identity objective plus ``fixed_cost`` equals the corpus NLL.
    """

    C: np.ndarray
    word_ids: np.ndarray
    slots: np.ndarray
    fixed_cost: float = 0.0

    @property
    def n(self):
        return self.C.shape[0]

    def identity_perm(self, table):
        """Permutation induced by ``table`` (padding rows take free slots in order)."""
        col_of_cell = {int(c): s for s, c in enumerate(self.slots)}
        perm = np.full(self.n, -1, dtype=np.int64)
        for i, w in enumerate(self.word_ids):
            perm[i] = col_of_cell[table.cell_of(int(w))]
        free = np.setdiff1d(np.arange(self.n), perm[: len(self.word_ids)])
        perm[len(self.word_ids):] = free
        return perm

    def objective(self, perm):
        return float(self.C[np.arange(self.n), perm].sum())


@dataclass
class Assignment:
    perm: np.ndarray
    objective: float
    inspections: int = field(default=0, compare=False)


def build_cost_matrix(lm, table, corpus_ids):
    """Accumulate per-word first- and second-position surprisal over the corpus."""
    if lm.n_codes != table.n_codes:
        raise ContractError(f"lm has {lm.n_codes} codes but the table has {table.n_codes}")
    k, d1, d2 = table.k_freq, table.n_rows, table.n_cols
    ro, co = table.row_offset, table.col_offset
    n_dense = table.vocab_size - k
    row_cost = np.zeros((n_dense, d1))
    col_cost = np.zeros((n_dense, d2))
    fixed = 0.0
    for sent in corpus_ids:
        if not len(sent):
            continue
        codes = encode_ids(table, sent)
        logp = lm.sequence_log_probs(codes)
        pos = 0
        for w in sent:
            if w < k:
                fixed -= logp[pos, w]
                pos += 1
                continue
            if w == table.unk_id:
                fixed -= logp[pos, codes[pos]] + logp[pos + 1, codes[pos + 1]]
            else:
                row_cost[w - k] -= logp[pos, ro:co]
                col_cost[w - k] -= logp[pos + 1, co:]
            pos += 2
    n_slots = d1 * d2 - 1
    slots = np.arange(n_slots)
    C = np.zeros((n_slots, n_slots))
    r, c = np.divmod(slots, d2)
    C[:n_dense] = row_cost[:, r] + col_cost[:, c]
    return CostMatrix(C, np.arange(k, k + n_dense), slots, float(fixed))


def solve_exact(cost, cap=EXACT_CAP):
    """Minimum-cost perfect assignment (shortest augmenting paths, O(n^3))."""
    C = check_square(cost.C if isinstance(cost, CostMatrix) else cost)
    n = C.shape[0]
    if n > cap:
        raise SizeError(f"n={n} exceeds the exact-solver cap {cap}; use solve_greedy")
    if n == 0:
        return Assignment(np.zeros(0, dtype=np.int64), 0.0)
    INF = np.inf
    u = np.zeros(n + 1)
    v = np.zeros(n + 1)
    p = np.zeros(n + 1, dtype=np.int64)  # p[j]: row (1-based) matched to column j
    way = np.zeros(n + 1, dtype=np.int64)
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        minv = np.full(n + 1, INF)
        used = np.zeros(n + 1, dtype=bool)
        while True:
            used[j0] = True
            i0 = p[j0]
            free = ~used
            free[0] = False
            cur = C[i0 - 1] - u[i0] - v[1:]
            better = free[1:] & (cur < minv[1:])
            minv[1:][better] = cur[better]
            way[1:][better] = j0
            cand = np.where(free, minv, INF)
            j1 = int(np.argmin(cand))
            delta = cand[j1]
            u[p[used]] += delta
            v[used] -= delta
            minv[free] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while j0:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
    perm = np.empty(n, dtype=np.int64)
    perm[p[1:] - 1] = np.arange(n)
    return Assignment(perm, float(C[np.arange(n), perm].sum()))


def solve_greedy(cost):
    """Half-approximate maximum-weight matching on weights ``max(C) - C``.

    Follows best-available-neighbour pointers until two vertices pick each
    other (a locally dominant edge), fixes that edge and backtracks. Ties go
    to the smaller (row, col), which makes the edge order total and the result
    equal to the sorted-edge greedy matching. ``inspections`` counts the
    pointer reads made while searching.
    """
    C = check_square(cost.C if isinstance(cost, CostMatrix) else cost)
    n = C.shape[0]
    if n == 0:
        return Assignment(np.zeros(0, dtype=np.int64), 0.0)
    W = C.max() - C
    row_pref = np.argsort(-W, axis=1, kind="stable").tolist()
    col_pref = np.argsort(-W.T, axis=1, kind="stable").tolist()
    # vertices 0..n-1 are rows, n..2n-1 are columns
    prefs = row_pref + col_pref
    ptr = [0] * (2 * n)
    mate = [-1] * (2 * n)
    inspections = 0

    def best(x):
        nonlocal inspections
        pref = prefs[x]
        off = 0 if x >= n else n
        i = ptr[x]
        while mate[pref[i] + off] != -1:
            inspections += 1
            i += 1
        inspections += 1
        ptr[x] = i
        return pref[i] + off

    for start in range(n):
        if mate[start] != -1:
            continue
        path = [start]
        while path:
            top = path[-1]
            if mate[top] != -1:
                path.pop()
                continue
            nxt = best(top)
            if len(path) >= 2 and path[-2] == nxt:
                mate[top], mate[nxt] = nxt, top
                path.pop()
                path.pop()
            else:
                path.append(nxt)
    perm = np.array([mate[r] - n for r in range(n)], dtype=np.int64)
    return Assignment(perm, float(C[np.arange(n), perm].sum()), inspections)


def matching_weight(C, perm):
    """Weight of ``perm`` under the greedy solver's conversion ``max(C) - C``."""
    C = np.asarray(C, dtype=np.float64)
    return float((C.max() - C)[np.arange(C.shape[0]), perm].sum())


def install(table, cost, perm):
    cells = table.cells.copy()
    for i, w in enumerate(cost.word_ids):
        cells[int(w) - table.k_freq] = cost.slots[perm[i]]
    return table.with_cells(cells)


@dataclass(frozen=True)
class RoundTrace:
    round: int
    nll_before: float
    nll_after: float
    ot_before: float
    ot_after: float
    solver: str = "exact"
    accepted: bool = True


def train_hybrid_lightrnn(corpus, vocab, k_freq, n_rows, n_cols, lm_cfg=None, rounds=1,
                          d_emb=16, d_hid=32, exact_cap=EXACT_CAP, solver="auto", lm_params=None):
    """Alternate LM training and assignment updates for ``rounds`` rounds.

    ``corpus`` is a list of token lists. Returns ``(table, lm_params, trace)``.
    A solved plan whose objective exceeds the current one is rejected, so the
    transport objective never increases across an assignment step.
    """
    check_positive_int(rounds, "rounds")
    if solver not in ("auto", "exact", "greedy"):
        raise ArgumentError(f"unknown solver {solver!r}")
    lm_cfg = lm_cfg or TrainConfig()
    table = init_table(vocab, k_freq, n_rows, n_cols)
    ids = sentence_ids(table, corpus)
    if lm_params is None:
        lm_params = init_params(table.n_codes, d_emb, d_hid, seed=lm_cfg.seed)
    trace = []
    for rnd in range(rounds):
        cfg = TrainConfig(lm_cfg.lr, lm_cfg.epochs, lm_cfg.batch_size, lm_cfg.clip, lm_cfg.seed + rnd)
        lm_params, _ = train_lm(lm_params, encode_corpus(table, ids), cfg)
        cost = build_cost_matrix(lm_params, table, ids)
        nll_before = corpus_log_likelihood(table, lm_params, ids)
        ident = cost.identity_perm(table)
        ot_before = cost.objective(ident)
        use = solver
        if use == "auto":
            use = "exact" if cost.n <= exact_cap else "greedy"
        if len(cost.word_ids) == 0:
            sol = Assignment(ident, ot_before)
        elif use == "exact":
            sol = solve_exact(cost, cap=exact_cap)
        else:
            sol = solve_greedy(cost)
        accepted = sol.objective <= ot_before
        if accepted:
            table = install(table, cost, sol.perm)
            ot_after = sol.objective
        else:
            ot_after = ot_before
        nll_after = corpus_log_likelihood(table, lm_params, ids)
        trace.append(RoundTrace(rnd, nll_before, nll_after, ot_before, ot_after, use, accepted))
    return table, lm_params, trace


def save_trace(trace, path, seed=None):
    header = TRACE_MAGIC if seed is None else f"{TRACE_MAGIC} seed={seed}"
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(header + "\n")
        for t in trace:
            fh.write(f"{t.round}\t{t.nll_before!r}\t{t.nll_after!r}\t{t.ot_before!r}\t{t.ot_after!r}\n")


def load_trace(path):
    out = []
    with open(path, encoding="ascii") as fh:
        head = fh.readline().split()
        if not head or head[0] != TRACE_MAGIC:
            raise ArgumentError(f"{path}: not a {TRACE_MAGIC} file")
        for line in fh:
            if line.strip():
                r, *vals = line.rstrip("\n").split("\t")
                out.append(RoundTrace(int(r), *(float(v) for v in vals)))
    return out


class HybridLightRNN(TransformerMixin, BaseEstimator):
    """Learned word coder: frequent words get their own code, the rest a (row, col) pair.

    ``fit`` runs the alternating LM / assignment loop on raw sentences;
    ``transform`` maps sentences to code-id arrays and ``inverse_transform``
    maps them back to space-joined text.
    """

    def __init__(self, k_freq=100, n_rows=32, n_cols=32, max_vocab=None, rounds=3,
                 d_emb=16, d_hid=32, lr=0.5, epochs=5, batch_size=16, clip=5.0,
                 exact_cap=EXACT_CAP, solver="auto", random_state=0):
        self.k_freq = k_freq
        self.n_rows = n_rows
        self.n_cols = n_cols
        self.max_vocab = max_vocab
        self.rounds = rounds
        self.d_emb = d_emb
        self.d_hid = d_hid
        self.lr = lr
        self.epochs = epochs
        self.batch_size = batch_size
        self.clip = clip
        self.exact_cap = exact_cap
        self.solver = solver
        self.random_state = random_state

    def fit(self, X, y=None):
        sentences = as_sentences(X)
        self.vocab_ = build_vocab(sentences, self.max_vocab)
        cfg = TrainConfig(self.lr, self.epochs, self.batch_size, self.clip, self.random_state)
        self.table_, self.lm_params_, self.trace_ = train_hybrid_lightrnn(
            sentences, self.vocab_, self.k_freq, self.n_rows, self.n_cols, cfg, self.rounds,
            self.d_emb, self.d_hid, self.exact_cap, self.solver,
        )
        return self

    def transform(self, X):
        check_is_fitted(self, "table_")
        return encode_corpus(self.table_, sentence_ids(self.table_, as_sentences(X)))

    def inverse_transform(self, Xt):
        check_is_fitted(self, "table_")
        t = self.table_
        words = list(t.words) + ["<unk>"]
        return [" ".join(words[w] for w in decode_sequence(t, codes)) for codes in Xt]
