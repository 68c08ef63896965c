"""Deliberately naive reference implementations used as test oracles."""

import itertools
import math
from collections import Counter

import numpy as np


def bpe_train_naive(word_counts, budget, eow="</w>"):
    """Recount every pair from scratch at every step; no incremental state."""
    segs = {w: list(w) + [eow] for w in word_counts}
    base = len({ch for w in word_counts for ch in w} | {eow})
    rules = []
    while base + len(rules) < budget:
        counts = Counter()
        for w, seq in segs.items():
            for i in range(len(seq) - 1):
                counts[(seq[i], seq[i + 1])] += word_counts[w]
        if not counts:
            break
        top = max(counts.values())
        if top < 2:
            break
        pair = min(p for p, c in counts.items() if c == top)
        rules.append(pair)
        for w in segs:
            segs[w] = merge_naive(segs[w], pair)
    return rules


def merge_naive(seq, pair):
    out = []
    i = 0
    while i < len(seq):
        if i + 1 < len(seq) and (seq[i], seq[i + 1]) == pair:
            out.append(seq[i] + seq[i + 1])
            i += 2
        else:
            out.append(seq[i])
            i += 1
    return out


def bpe_encode_naive(word, rules, eow="</w>"):
    seq = list(word) + [eow]
    for pair in rules:
        seq = merge_naive(seq, pair)
    return seq


def min_assignment_brute(C):
    n = len(C)
    best = math.inf
    for perm in itertools.permutations(range(n)):
        best = min(best, sum(C[i][perm[i]] for i in range(n)))
    return best


def rnn_log_probs_loop(emb, W_xh, W_hh, b_h, U, b_o, codes):
    """Scalar-loop evaluation of the recurrence, independent of numpy matmul."""
    n, d_hid = len(U), len(W_hh)
    d_emb = len(W_xh)
    h = [0.0] * d_hid
    prev = n
    out = []
    for code in codes:
        new = []
        for j in range(d_hid):
            a = b_h[j]
            a += sum(h[i] * W_hh[i][j] for i in range(d_hid))
            a += sum(emb[prev][i] * W_xh[i][j] for i in range(d_emb))
            new.append(math.tanh(a))
        h = new
        logits = [b_o[v] + sum(U[v][j] * h[j] for j in range(d_hid)) for v in range(n)]
        m = max(logits)
        lse = m + math.log(sum(math.exp(z - m) for z in logits))
        out.append([z - lse for z in logits])
        prev = code
    return np.array(out)


def mos_probs_loop(g, W, W_h, w_pi):
    M = len(W_h)
    pri = [sum(w_pi[k][i] * g[i] for i in range(len(g))) for k in range(M)]
    m = max(pri)
    pri = [math.exp(p - m) for p in pri]
    s = sum(pri)
    pri = [p / s for p in pri]
    V = len(W)
    out = [0.0] * V
    for k in range(M):
        h = [math.tanh(sum(W_h[k][j][i] * g[i] for i in range(len(g)))) for j in range(len(W_h[k]))]
        z = [sum(W[v][j] * h[j] for j in range(len(h))) for v in range(V)]
        mz = max(z)
        e = [math.exp(x - mz) for x in z]
        se = sum(e)
        for v in range(V):
            out[v] += pri[k] * e[v] / se
    return np.array(out)
