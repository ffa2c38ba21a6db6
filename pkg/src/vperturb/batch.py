"""Vectorized encoders over a stack of independent problems.

These are the Monte Carlo workhorses: one call encodes thousands of data
vectors, each with its own search matrix. Metrics are accumulated in exactly
the same floating-point order as :mod:`vperturb.encoders`, so the chosen
perturbations are bit-identical to the per-instance reference encoders.

Index arrays returned here (``k``) are positions in the candidate set, not
perturbation values; ``t = values[k]``.
"""

from __future__ import annotations

import math

import numpy as np

from .encoders import Criterion, OpCounter, mmse_regularization
from .linalg import lower_from_r_inverse, qr_decompose_lapack

__all__ = ["build_problems", "tree_search", "qrdm_search", "linear_precoders", "fixed_search_counts", "qrdm_counts"]


def build_problems(h_tx, criterion, sigma_n_sq=0.0, p_total=1.0, qr=qr_decompose_lapack):
    """Search matrices ``L`` and precoders ``P`` for a stack of channels.

    Uses ``H^-1 = Q L`` (ZF) and ``H^T (HH^T + alpha I)^-1 = Q1 L / sqrt(alpha)``
    (MMSE, with ``L = Q2^T``) so no explicit inverse is formed.
    """
    h_tx = np.asarray(h_tx, dtype=float)
    k = h_tx.shape[-1]
    ht = np.swapaxes(h_tx, -1, -2)
    if Criterion(criterion) is Criterion.ZF:
        q, r = qr(ht)
        l = lower_from_r_inverse(r)
        return l, q @ l
    alpha = mmse_regularization(k, sigma_n_sq, p_total)
    if alpha <= 0:
        raise ValueError("MMSE criterion needs sigma_n_sq > 0")
    eye = np.broadcast_to(math.sqrt(alpha) * np.eye(k), h_tx.shape)
    q, _ = qr(np.concatenate([ht, eye], axis=-2))
    l = np.tril(np.swapaxes(q[..., k:, :], -1, -2))
    return l, q[..., :k, :] @ l / math.sqrt(alpha)


def linear_precoders(h, criterion, sigma_n_sq=0.0, p_total=1.0):
    """``H^-1`` or the regularized inverse for a stack of channels."""
    h = np.asarray(h, dtype=float)
    k = h.shape[-1]
    if Criterion(criterion) is Criterion.ZF:
        return np.linalg.inv(h)
    alpha = mmse_regularization(k, sigma_n_sq, p_total)
    gram = h @ np.swapaxes(h, -1, -2) + alpha * np.eye(k)
    return np.swapaxes(np.linalg.solve(gram, h), -1, -2)


def _candidates(s, tau, values):
    return s[:, :, None] + tau * np.asarray(values, dtype=float)[None, None, :]


def _interference(l, v, i):
    u = l[:, i, 0, None] * v[:, :, 0]
    for j in range(1, i):
        u = u + l[:, i, j, None] * v[:, :, j]
    return u


def tree_search(l, s, tau, values, full_levels, compare_before_square=False):
    """FSE-style search: ``full_levels`` full expansions then DFE extension.

    ``full_levels = 0`` is the THP/DFE path, ``full_levels = K`` is the
    exhaustive search.

    Returns
    -------
    k_best : (B, K) int array
    metric : (B,) float array
    leaves : (B, T**full_levels) float array of all retained leaf metrics
    """
    l = np.asarray(l, dtype=float)
    s = np.asarray(s, dtype=float)
    b, kdim = s.shape
    T = len(values)
    vc = _candidates(s, tau, values)
    v = np.empty((b, 1, 0))
    ks = np.empty((b, 1, 0), dtype=np.int64)
    metric = np.zeros((b, 1))
    rows = np.arange(b)[:, None]
    for i in range(kdim):
        nb = v.shape[1]
        diag = l[:, i, i, None, None] * vc[:, i, None, :]
        if i:
            e = _interference(l, v, i)[:, :, None] + diag
        else:
            e = np.broadcast_to(diag, (b, nb, T))
        if i < full_levels:
            sq = e * e
            metric = (metric[:, :, None] + sq if i else sq).reshape(b, nb * T)
            v = np.concatenate([np.repeat(v, T, axis=1),
                                np.broadcast_to(vc[:, i, None, :], (b, nb, T)).reshape(b, nb * T, 1)], axis=2)
            kk = np.broadcast_to(np.arange(T), (b, nb, T)).reshape(b, nb * T, 1)
            ks = np.concatenate([np.repeat(ks, T, axis=1), kk], axis=2)
        else:
            key = np.abs(e) if compare_before_square else e * e
            kstar = np.argmin(key, axis=2)
            estar = np.take_along_axis(e, kstar[:, :, None], axis=2)[:, :, 0]
            sq = estar * estar
            metric = metric + sq if i else sq
            v = np.concatenate([v, vc[rows, i, kstar][:, :, None]], axis=2)
            ks = np.concatenate([ks, kstar[:, :, None]], axis=2)
    best = np.argmin(metric, axis=1)
    return ks[np.arange(b), best], metric[np.arange(b), best], metric


def _smallest(a, m):
    """Indices of the ``m`` smallest entries per row, ordered by (value, index)."""
    n = a.shape[1]
    if m >= n:
        return np.argsort(a, axis=1, kind="stable")
    part = np.argpartition(a, m - 1, axis=1)[:, :m]
    vals = np.take_along_axis(a, part, axis=1)
    kth = vals.max(axis=1)
    # a tie at the cut could have been resolved out of index order
    tied = np.count_nonzero(a <= kth[:, None], axis=1) > m
    order = np.lexsort((part, vals), axis=1)
    keep = np.take_along_axis(part, order, axis=1)
    if np.any(tied):
        keep[tied] = np.argsort(a[tied], axis=1, kind="stable")[:, :m]
    return keep


def qrdm_search(l, s, tau, values, m_breadth):
    """M-algorithm beam search; ties keep (parent order, t ascending)."""
    l = np.asarray(l, dtype=float)
    s = np.asarray(s, dtype=float)
    b, kdim = s.shape
    T = len(values)
    vc = _candidates(s, tau, values)
    v = np.empty((b, 1, 0))
    ks = np.empty((b, 1, 0), dtype=np.int64)
    metric = np.zeros((b, 1))
    rows = np.arange(b)[:, None]
    for i in range(kdim):
        nb = v.shape[1]
        diag = l[:, i, i, None, None] * vc[:, i, None, :]
        e = _interference(l, v, i)[:, :, None] + diag if i else np.broadcast_to(diag, (b, nb, T))
        sq = e * e
        cand = (metric[:, :, None] + sq if i else sq).reshape(b, nb * T)
        keep = _smallest(cand, m_breadth)
        parent = keep // T
        kk = keep % T
        metric = np.take_along_axis(cand, keep, axis=1)
        v = np.concatenate([v[rows, parent], vc[rows, i, kk][:, :, None]], axis=2)
        ks = np.concatenate([ks[rows, parent], kk[:, :, None]], axis=2)
    return ks[:, 0], metric[:, 0], metric


def fixed_search_counts(k, t_count, full_levels, compare_before_square=False, use_precompute=False):
    """Per-instance operation tally of :func:`tree_search` (same model as the reference encoders)."""
    c = OpCounter()
    branches = 1
    term_mults, term_adds = (0, 0) if use_precompute else (2, 1)
    for i in range(k):
        evals = branches * t_count
        c.real_mults += evals * (i + 1) * term_mults
        c.real_adds += evals * ((i + 1) * term_adds + i)
        if i < full_levels:
            c.real_mults += evals
            c.real_adds += evals if i else 0
            branches = evals
        else:
            c.real_mults += branches if compare_before_square else evals
            c.real_adds += branches if i else 0
            c.comparisons += branches * (t_count - 1)
        c.nodes_visited += branches
    c.comparisons += branches - 1
    return c


def qrdm_counts(k, t_count, m_breadth):
    c = OpCounter()
    beam = 1
    for i in range(k):
        evals = beam * t_count
        c.real_mults += evals * (2 * (i + 1) + 1)
        c.real_adds += evals * ((i + 1) + i + (1 if i else 0))
        c.nodes_visited += evals
        beam = min(m_breadth, evals)
    return c

