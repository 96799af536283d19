"""Compiled index/update primitives and whole-run loops.

The policy classes call the single-step functions; the Monte Carlo engine
calls the loops, which are built from the same single-step functions so both
routes make bit-identical decisions.

Arms and contexts are 0-based here.  Estimate tables are stored arm-major,
``theta[j, i]``, so the all-context update of one arm is contiguous.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit


@njit(cache=True)
def dcb_argmax(theta, counts, n, i, g_range, eps):
    """argmax_j theta[j, i] + G_i sqrt((2 + eps) ln n / m_j); unpulled arms first, lowest index wins."""
    k = counts.shape[0]
    for j in range(k):
        if counts[j] == 0:
            return j
    c = (2.0 + eps) * math.log(n)
    best = 0
    best_val = -np.inf
    for j in range(k):
        v = theta[j, i] + g_range * math.sqrt(c / counts[j])
        if v > best_val:
            best_val = v
            best = j
    return best


@njit(cache=True)
def dcb_update(theta, counts, j, gcol):
    """Fold one observation of arm ``j`` into every context's estimate."""
    m = counts[j]
    row = theta[j]
    for i in range(row.shape[0]):
        row[i] = (row[i] * m + gcol[i]) / (m + 1)
    counts[j] = m + 1


@njit(cache=True)
def ucb_argmax(means, counts, n, eps):
    """argmax_k mean_k + sqrt((2 + eps) ln n / m_k); unpulled arms first, lowest index wins."""
    k = counts.shape[0]
    for j in range(k):
        if counts[j] == 0:
            return j
    c = (2.0 + eps) * math.log(n)
    best = 0
    best_val = -np.inf
    for j in range(k):
        v = means[j] + math.sqrt(c / counts[j])
        if v > best_val:
            best_val = v
            best = j
    return best


@njit(cache=True)
def mean_update(means, counts, j, x):
    m = counts[j]
    means[j] = (means[j] * m + x) / (m + 1)
    counts[j] = m + 1


# ------------------------------------------------------------- full runs
#
# ``ctx[t]`` is a context (or bin) index, ``vidx[t, j]`` the state index of
# arm j at trial t.  ``gtab[j, v, i]`` = g(context_i, value_{j,v}).


@njit(cache=True, nogil=True)
def run_dcb(ctx, vidx, gtab, g_ranges, eps, theta, counts, trial0):
    """Drive a DCB state through the stream; returns chosen arms.

    ``theta``/``counts`` are mutated in place so a caller can continue a
    state; ``trial0`` is the number of trials already folded in.
    """
    t_len = ctx.shape[0]
    arms = np.empty(t_len, dtype=np.int64)
    n = trial0
    for t in range(t_len):
        n += 1
        i = ctx[t]
        j = dcb_argmax(theta, counts, n, i, g_ranges[i], eps)
        dcb_update(theta, counts, j, gtab[j, vidx[t, j]])
        arms[t] = j
    return arms


@njit(cache=True, nogil=True)
def run_ucb1(vidx, vals, eps, means, counts, trial0):
    t_len = vidx.shape[0]
    arms = np.empty(t_len, dtype=np.int64)
    n = trial0
    for t in range(t_len):
        n += 1
        j = ucb_argmax(means, counts, n, eps)
        mean_update(means, counts, j, vals[j, vidx[t, j]])
        arms[t] = j
    return arms


@njit(cache=True, nogil=True)
def run_multi_ucb(ctx, rewards, scales, eps, means, counts, ctx_counts):
    """One UCB1 per context on the observed rewards ``rewards[t, j]``.

    ``means``/``counts`` are ``(M, K)``; ``scales[i]`` multiplies the
    confidence radius (all ones for the plain baseline).
    """
    t_len = ctx.shape[0]
    k = means.shape[1]
    arms = np.empty(t_len, dtype=np.int64)
    for t in range(t_len):
        i = ctx[t]
        ctx_counts[i] += 1
        ni = ctx_counts[i]
        j = -1
        for a in range(k):
            if counts[i, a] == 0:
                j = a
                break
        if j < 0:
            c = (2.0 + eps) * math.log(ni)
            best_val = -np.inf
            for a in range(k):
                v = means[i, a] + scales[i] * math.sqrt(c / counts[i, a])
                if v > best_val:
                    best_val = v
                    j = a
        m = counts[i, j]
        means[i, j] = (means[i, j] * m + rewards[t, j]) / (m + 1)
        counts[i, j] = m + 1
        arms[t] = j
    return arms


@njit(cache=True, nogil=True)
def ucb1_optimal_pulls(u, means_true, eps, checkpoints):
    """Lemma-style check: UCB1(eps) on Bernoulli arms driven by uniforms ``u[t, j]``.

    Returns the number of pulls of the best arm at every checkpoint.
    """
    k = means_true.shape[0]
    best = 0
    for j in range(k):
        if means_true[j] > means_true[best]:
            best = j
    means = np.zeros(k)
    counts = np.zeros(k, dtype=np.int64)
    out = np.zeros(checkpoints.shape[0], dtype=np.int64)
    c = 0
    n_max = checkpoints[-1]
    for t in range(n_max):
        j = ucb_argmax(means, counts, t + 1, eps)
        x = 1.0 if u[t, j] < means_true[j] else 0.0
        mean_update(means, counts, j, x)
        while c < checkpoints.shape[0] and checkpoints[c] == t + 1:
            out[c] = counts[best]
            c += 1
    return out
