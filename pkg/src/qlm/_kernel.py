"""Compiled inner loop for CBOW training over Cholesky factors.

The arithmetic mirrors :func:`qlm.trainer.pair_loss` and
:func:`qlm.trainer.pair_gradients`; tests check the two against each other.
Factors are held unpacked as ``L[V, d, d]`` (upper triangle kept at zero).
"""

import math

import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def _density(L, w, out):
    """out = L_w L_w^T / ||L_w||_F^2; returns the trace ||L_w||_F^2."""
    d = L.shape[1]
    t = 0.0
    for i in range(d):
        for k in range(i + 1):
            t += L[w, i, k] * L[w, i, k]
    inv = 1.0 / t
    for i in range(d):
        for j in range(i + 1):
            acc = 0.0
            for k in range(j + 1):
                acc += L[w, i, k] * L[w, j, k]
            out[i, j] = acc * inv
            out[j, i] = acc * inv
    return t


@njit(cache=True, nogil=True)
def _inner(a, b):
    d = a.shape[0]
    acc = 0.0
    for i in range(d):
        for j in range(d):
            acc += a[i, j] * b[i, j]
    return acc


@njit(cache=True, nogil=True)
def _factor_grad(L, w, G, scale, rho, out):
    """out += scale * tril((2/t) (G L - Tr(G rho) L)) for word w."""
    d = L.shape[1]
    t = _density(L, w, rho)
    g_rho = _inner(G, rho)
    c = 2.0 * scale / t
    for i in range(d):
        for j in range(i + 1):
            acc = 0.0
            for k in range(j, d):
                acc += G[i, k] * L[w, k, j]
            out[i, j] += c * (acc - g_rho * L[w, i, j])


@njit(cache=True, nogil=True)
def sgd_pair(L, center, ctx, negs, alpha, eps, work):
    """One SGD step on a single CBOW pair; returns the pair loss.

    ``work`` is a scratch array of shape ``(n_ctx + n_negs + 6, d, d)``.
    """
    d = L.shape[1]
    n = ctx.shape[0]
    k = negs.shape[0]
    rho_c = work[0]
    tmp = work[1]
    g_c = work[2]
    rho_w = work[3]
    g_w = work[4]
    grads = work[5:]

    rho_c[:, :] = 0.0
    for j in range(n):
        _density(L, ctx[j], tmp)
        rho_c += tmp
    rho_c /= n

    _density(L, center, rho_w)
    s_pos = _inner(rho_c, rho_w)
    loss = -math.log(s_pos + eps)
    inv_pos = 1.0 / (s_pos + eps)
    for a in range(d):
        for b in range(d):
            g_c[a, b] = -rho_w[a, b] * inv_pos

    # center
    for a in range(d):
        for b in range(d):
            g_w[a, b] = -rho_c[a, b] * inv_pos
    grads[0][:, :] = 0.0
    _factor_grad(L, center, g_w, 1.0, tmp, grads[0])

    # negatives
    for q in range(k):
        _density(L, negs[q], rho_w)
        s_neg = _inner(rho_c, rho_w)
        loss -= math.log(1.0 - s_neg + eps)
        inv_neg = 1.0 / (1.0 - s_neg + eps)
        for a in range(d):
            for b in range(d):
                g_c[a, b] += rho_w[a, b] * inv_neg
                g_w[a, b] = rho_c[a, b] * inv_neg
        grads[1 + q][:, :] = 0.0
        _factor_grad(L, negs[q], g_w, 1.0, tmp, grads[1 + q])

    # context words share the averaged gradient
    for j in range(n):
        grads[1 + k + j][:, :] = 0.0
        _factor_grad(L, ctx[j], g_c, 1.0 / n, tmp, grads[1 + k + j])

    # apply only after every gradient has been taken at the old parameters
    _apply(L, center, grads[0], alpha)
    for q in range(k):
        _apply(L, negs[q], grads[1 + q], alpha)
    for j in range(n):
        _apply(L, ctx[j], grads[1 + k + j], alpha)
    return loss


@njit(cache=True, nogil=True)
def _apply(L, w, grad, alpha):
    d = L.shape[1]
    for i in range(d):
        for j in range(i + 1):
            L[w, i, j] -= alpha * grad[i, j]
        if L[w, i, i] < 0.0:
            L[w, i, i] = 0.0


@njit(cache=True, nogil=True)
def train_span(L, seq, negs, alphas, window, eps, start, stop):
    """Train on centers ``seq[start:stop]``; contexts may reach outside the span.

    Returns ``(loss_sum, pairs, bad_position)`` where ``bad_position`` is the
    first position with a non-finite loss, or -1.
    """
    d = L.shape[1]
    n_total = seq.shape[0]
    k = negs.shape[1]
    work = np.zeros((2 * window + k + 6, d, d))
    ctx = np.empty(2 * window, dtype=np.int64)
    loss_sum = 0.0
    pairs = 0
    for i in range(start, stop):
        lo = max(0, i - window)
        hi = min(n_total, i + window + 1)
        n = 0
        for j in range(lo, hi):
            if j != i:
                ctx[n] = seq[j]
                n += 1
        if n == 0:
            continue
        loss = sgd_pair(L, seq[i], ctx[:n], negs[i], alphas[i], eps, work)
        if not math.isfinite(loss):
            return loss_sum, pairs, i
        loss_sum += loss
        pairs += 1
    return loss_sum, pairs, -1
