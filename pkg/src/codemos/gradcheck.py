"""Central finite differences, used to check hand-written gradients."""

import numpy as np


def numeric_grad(loss_fn, arrays, eps=1e-5):
    """Perturb every entry of every array in place; ``loss_fn()`` is re-evaluated."""
    grads = []
    for arr in arrays:
        flat = arr.reshape(-1)
        g = np.zeros(flat.size)
        for i in range(flat.size):
            old = flat[i]
            flat[i] = old + eps
            up = loss_fn()
            flat[i] = old - eps
            down = loss_fn()
            flat[i] = old
            g[i] = (up - down) / (2 * eps)
        grads.append(g.reshape(arr.shape))
    return grads


def max_rel_error(analytic, numeric, floor=1e-8):
    """Largest ``|a - n| / max(|a|, |n|, floor)`` over all entries."""
    worst = 0.0
    for a, n in zip(analytic, numeric):
        a, n = np.asarray(a), np.asarray(n)
        denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)
        worst = max(worst, float(np.max(np.abs(a - n) / denom)))
    return worst
