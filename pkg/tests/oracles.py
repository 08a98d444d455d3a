"""Independent reference implementations used as test oracles.

Written without calling into the library's own formulas so agreement means
something.
"""
from __future__ import annotations

import itertools
import math

import numpy as np


def dense_gcn(h0: np.ndarray, w: np.ndarray, thetas) -> np.ndarray:
    """Per-node loop form of the propagation rule, self term weight 1."""
    n = w.shape[0]
    wf = w + np.eye(n)
    d = np.array([1.0 + sum(w[j, i] for j in range(n)) for i in range(n)])
    h = h0
    for k, th in enumerate(thetas):
        nxt = np.zeros((n, th.shape[1]))
        for i in range(n):
            acc = np.zeros(h.shape[1])
            for j in range(n):
                acc += wf[j, i] / math.sqrt(d[j] * d[i]) * h[j]
            nxt[i] = acc @ th
        h = np.maximum(nxt, 0.0) if k < len(thetas) - 1 else nxt
    return h


def brute_select(belief: np.ndarray, interacted) -> int:
    best, best_i = -1.0, None
    for i in range(belief.shape[0]):
        if i in interacted:
            continue
        u = max(min(x, 1.0 - x) for x in belief[i])
        if u > best:
            best, best_i = u, i
    return best_i


def reward_direct(belief_row, effects, alpha=2.0, beta=1.0, cost=1.0) -> float:
    worst = max(abs(float(r) - float(e)) for r, e in zip(belief_row, effects))
    return alpha * worst + beta * (1.0 if any(effects) else 0.0) - cost


def naive_counts(pred, truth):
    tp = fp = fn = tn = 0
    for p, g in zip(np.asarray(pred).ravel(), np.asarray(truth).ravel()):
        if p and g:
            tp += 1
        elif p:
            fp += 1
        elif g:
            fn += 1
        else:
            tn += 1
    return tp, fp, fn, tn


def naive_mcc(tp, fp, fn, tn) -> float:
    den = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn)
    return 0.0 if den == 0 else (tp * tn - fp * fn) / math.sqrt(den)


def brute_assignment(triggers, responders, centers):
    """Minimum total distance matching by enumerating permutations."""
    triggers, responders = list(triggers), list(responders)
    if not triggers or not responders:
        return []
    small, big, flip = (triggers, responders, False) if len(triggers) <= len(responders) else (responders, triggers, True)
    best, best_pairs = math.inf, None
    for perm in itertools.permutations(big, len(small)):
        cost = sum(np.linalg.norm(centers[a] - centers[b]) for a, b in zip(small, perm))
        if cost < best - 1e-12:
            best = cost
            best_pairs = [(b, a) if flip else (a, b) for a, b in zip(small, perm)]
    return sorted((int(i), int(j)) for i, j in best_pairs)


def relative_error(a: np.ndarray, b: np.ndarray) -> float:
    num = np.linalg.norm(np.ravel(a) - np.ravel(b))
    den = max(np.linalg.norm(np.ravel(a)) + np.linalg.norm(np.ravel(b)), 1e-12)
    return float(num / den)
