"""Vector-perturbation precoders with instrumented operation counts.

Every encoder here works on one :class:`PerturbationProblem` and searches the
perturbation tree of ``min ||L (s + tau t)||^2`` over ``t`` in ``A^K``. Level
``i`` of the tree fixes ``t_i``; the incremental metric of a candidate is

    e = L[i,0] v[0] + ... + L[i,i-1] v[i-1] + L[i,i] (s[i] + tau t)

with ``v[j] = s[j] + tau t[j]`` from the branch prefix. The sum is always
formed left to right so that every encoder (and the vectorized twins in
:mod:`vperturb.batch`) produces bit-identical metrics.

Operation counting model (real arithmetic, per incremental metric):

* each product term costs 2 multiplications and 1 addition when computed
  directly, nothing when read from a :class:`PrecomputeTable`;
* summing ``i + 1`` terms costs ``i`` additions;
* squaring costs 1 multiplication, adding to the parent metric 1 addition;
* comparisons are tallied separately.

A visited node is a child that is created and kept in the tree (for a
single-expansion step this is the one DFE child, not its ``T`` trial
candidates); the sphere encoder counts every child whose metric it forms.
"""

from __future__ import annotations

import enum
import functools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import CountersDisabled, SearchSpaceTooLarge
from .linalg import as_real_matrix, lower_from_r_inverse, pseudo_inverse, qr_decompose
from .modem import Constellation, PerturbSet
from .modem import tau as tau_of

__all__ = [
    "Criterion",
    "PerturbationProblem",
    "OpCounter",
    "EncoderResult",
    "PrecomputeTable",
    "mmse_regularization",
    "build_problem",
    "build_precompute_table",
    "encode_lzf",
    "encode_lmmse",
    "encode_thp",
    "encode_exhaustive",
    "encode_sphere",
    "encode_qrdm",
    "encode_fse",
    "count_arithmetic",
    "search_metric",
]

EXHAUSTIVE_LIMIT = 10 ** 7


class Criterion(str, enum.Enum):
    ZF = "zf"
    MMSE = "mmse"


@dataclass
class OpCounter:
    nodes_visited: int = 0
    real_mults: int = 0
    real_adds: int = 0
    comparisons: int = 0


@dataclass(frozen=True)
class PerturbationProblem:
    """One encoding instance.

    ``l`` is the lower-triangular search matrix, ``precode_matrix`` maps the
    perturbed data vector to the (unnormalized) transmit vector.
    """

    l: np.ndarray
    precode_matrix: np.ndarray
    s: np.ndarray
    tau: float
    perturb_set: PerturbSet
    criterion: Criterion = Criterion.ZF
    p_total: float = 1.0
    constellation: Constellation | None = None

    @property
    def k(self) -> int:
        return self.l.shape[0]


@dataclass
class EncoderResult:
    t: np.ndarray
    metric: float
    x: np.ndarray
    gamma: float
    counts: OpCounter | None
    leaf_metrics: np.ndarray | None = None
    precompute_counts: OpCounter | None = None


@dataclass(frozen=True)
class PrecomputeTable:
    """Products ``L[i,j] * (level_d + tau t_k)`` for the lower triangle of L.

    ``data`` has shape ``(U, D, T)`` with ``U = K(K+1)/2``; row ``u`` holds the
    pair ``(i, j)`` with ``u = i(i+1)/2 + j``.
    """

    data: np.ndarray
    levels: np.ndarray
    t_values: np.ndarray
    counts: OpCounter = field(default_factory=OpCounter)

    @staticmethod
    def row(i: int, j: int) -> int:
        return i * (i + 1) // 2 + j

    def entry(self, i: int, j: int, d: int, k: int) -> float:
        return float(self.data[self.row(i, j), d, k])

    @property
    def size(self) -> int:
        return self.data.size


def mmse_regularization(k: int, sigma_n_sq: float, p_total: float) -> float:
    """Regularization ``alpha = K sigma_n^2 / P_T`` of the MMSE precoder."""
    return k * sigma_n_sq / p_total


def build_problem(
    h_at_tx,
    s,
    tau: float,
    perturb_set: PerturbSet,
    criterion: Criterion | str = Criterion.ZF,
    sigma_n_sq: float = 0.0,
    p_total: float = 1.0,
    constellation: Constellation | None = None,
) -> PerturbationProblem:
    """Factor the channel seen by the transmitter into a search problem.

    ZF: ``H^T = QR`` and ``L = (R^-1)^T``, precoder ``H^-1``.
    MMSE: ``[H^T; sqrt(alpha) I] = [Q1; Q2] R`` and ``L = Q2^T``, precoder
    ``H^T (H H^T + alpha I)^-1``.
    """
    h = as_real_matrix(h_at_tx)
    k = h.shape[0]
    if h.shape != (k, k):
        raise ValueError("h_at_tx must be square")
    if sigma_n_sq < 0 or p_total <= 0:
        raise ValueError("need sigma_n_sq >= 0 and p_total > 0")
    criterion = Criterion(criterion)
    s = np.asarray(s, dtype=float)
    if criterion is Criterion.ZF:
        _, r = qr_decompose(h.T)
        l = lower_from_r_inverse(r)
        precode = pseudo_inverse(h)
    else:
        alpha = mmse_regularization(k, sigma_n_sq, p_total)
        if alpha <= 0:
            raise ValueError("MMSE criterion needs sigma_n_sq > 0")
        ext = np.vstack([h.T, math.sqrt(alpha) * np.eye(k)])
        q, _ = qr_decompose(ext)
        l = np.tril(q[k:, :].T)
        precode = pseudo_inverse(h, alpha)
    return PerturbationProblem(l, precode, s, float(tau), perturb_set, criterion, p_total, constellation)


def build_precompute_table(l, c: Constellation, perturb_set: PerturbSet) -> PrecomputeTable:
    """Tabulate every ``L[i,j] (level_d + tau t_k)`` for ``j <= i``.

    Operation counts: ``T - 1`` multiplications for the nonzero ``tau t_k``,
    ``D (T - 1)`` additions for the shifted levels and one multiplication per
    table entry.
    """
    l = as_real_matrix(l)
    k = l.shape[0]
    tau = tau_of(c)
    levels = c.levels
    tv = perturb_set.values
    counts = OpCounter()
    shifts = np.zeros(tv.size)
    nz = tv != 0
    shifts[nz] = tau * tv[nz]
    counts.real_mults += int(nz.sum())
    values = np.empty((levels.size, tv.size))
    values[:, ~nz] = levels[:, None]
    values[:, nz] = levels[:, None] + shifts[None, nz]
    counts.real_adds += int(levels.size * nz.sum())
    rows = [(i, j) for i in range(k) for j in range(i + 1)]
    data = np.empty((len(rows), levels.size, tv.size))
    for u, (i, j) in enumerate(rows):
        data[u] = l[i, j] * values
    counts.real_mults += data.size
    return PrecomputeTable(data, levels, tv, counts)


class _Evaluator:
    """Forms incremental metrics for one problem and tallies their cost."""

    def __init__(self, prob: PerturbationProblem, counter: OpCounter, table: PrecomputeTable | None):
        self.k = prob.k
        self.l = prob.l.tolist()
        self.s = prob.s.tolist()
        self.tau = prob.tau
        self.tv = [int(v) for v in prob.perturb_set.values]
        self.c = counter
        self.table = None
        if table is not None:
            lv = table.levels.tolist()
            try:
                didx = [lv.index(v) for v in self.s]
            except ValueError:
                raise ValueError("data vector has entries outside the table's constellation") from None
            # rows[i][j][k] for this data vector
            self.table = [
                [table.data[PrecomputeTable.row(i, j), didx[j]].tolist() for j in range(i + 1)]
                for i in range(self.k)
            ]

    def term(self, i, j, kk):
        if self.table is not None:
            return self.table[i][j][kk]
        self.c.real_mults += 2
        self.c.real_adds += 1
        return self.l[i][j] * (self.s[j] + self.tau * self.tv[kk])

    def increment(self, i, prefix, kk):
        if i == 0:
            return self.term(0, 0, kk)
        acc = self.term(i, 0, prefix[0])
        for j in range(1, i):
            acc = acc + self.term(i, j, prefix[j])
        self.c.real_adds += i
        return acc + self.term(i, i, kk)


def _finish(prob, ks, metric, counts, leaf_metrics=None, precompute_counts=None):
    t = np.asarray(prob.perturb_set.values)[np.asarray(ks, dtype=int)]
    s_pert = prob.s + prob.tau * t
    xu = prob.precode_matrix @ s_pert
    gamma = float(xu @ xu) / prob.p_total
    x = xu / math.sqrt(gamma) if gamma > 0 else xu
    return EncoderResult(t.astype(int), float(metric), x, gamma, counts, leaf_metrics, precompute_counts)


def search_metric(prob: PerturbationProblem, t) -> float:
    """``||L (s + tau t)||^2`` accumulated in the same order as the encoders."""
    t = np.asarray(t)
    v = (prob.s + prob.tau * t).tolist()
    l = prob.l
    total = 0.0
    for i in range(prob.k):
        e = l[i, 0] * v[0]
        for j in range(1, i + 1):
            e = e + l[i, j] * v[j]
        total = total + e * e
    return float(total)


def _fixed_search(prob, full_levels, compare_before_square, table, count_ops, precompute_counts=None):
    counts = OpCounter()
    ev = _Evaluator(prob, counts, table)
    T = prob.perturb_set.t_count
    branches = [(0.0, [])]
    for i in range(prob.k):
        new = []
        if i < full_levels:
            for metric, ks in branches:
                for kk in range(T):
                    e = ev.increment(i, ks, kk)
                    sq = e * e
                    counts.real_mults += 1
                    if i:
                        sq = metric + sq
                        counts.real_adds += 1
                    new.append((sq, ks + [kk]))
                    counts.nodes_visited += 1
        else:
            for metric, ks in branches:
                best_key = best_e = None
                best_k = 0
                for kk in range(T):
                    e = ev.increment(i, ks, kk)
                    if compare_before_square:
                        key = abs(e)
                    else:
                        key = e * e
                        counts.real_mults += 1
                    if best_key is None:
                        best_key, best_e, best_k = key, e, kk
                        continue
                    counts.comparisons += 1
                    if key < best_key:
                        best_key, best_e, best_k = key, e, kk
                if compare_before_square:
                    sq = best_e * best_e
                    counts.real_mults += 1
                else:
                    sq = best_key
                if i:
                    sq = metric + sq
                    counts.real_adds += 1
                new.append((sq, ks + [best_k]))
                counts.nodes_visited += 1
        branches = new
    best = 0
    for n in range(1, len(branches)):
        counts.comparisons += 1
        if branches[n][0] < branches[best][0]:
            best = n
    leaves = np.array([m for m, _ in branches])
    metric, ks = branches[best]
    return _finish(prob, ks, metric, counts if count_ops else None, leaves, precompute_counts)


def _resolve_table(prob, use_precompute, table):
    if table is None and use_precompute:
        if prob.constellation is None:
            raise ValueError("use_precompute needs the problem's constellation")
        table = build_precompute_table(prob.l, prob.constellation, prob.perturb_set)
    return table


def encode_thp(prob: PerturbationProblem, *, compare_before_square=False, use_precompute=False,
               table=None, count_ops=True) -> EncoderResult:
    """Successive (DFE) choice of each ``t_i``: one branch, no full expansion."""
    table = _resolve_table(prob, use_precompute, table)
    return _fixed_search(prob, 0, compare_before_square, table, count_ops,
                         table.counts if table is not None else None)


def encode_fse(prob: PerturbationProblem, p: int = 1, *, use_precompute=False,
               compare_before_square=False, table=None, count_ops=True) -> EncoderResult:
    """Fixed-complexity sphere encoder.

    The first ``p`` levels are expanded to all ``T`` children (``T^p``
    branches), every later level extends each branch by its DFE child only.
    The leaf with the smallest accumulated metric wins; ``leaf_metrics`` on
    the result holds all ``T^p`` final metrics.
    """
    if not 1 <= p <= prob.k:
        raise ValueError(f"p must be in [1, K={prob.k}], got {p}")
    table = _resolve_table(prob, use_precompute, table)
    return _fixed_search(prob, p, compare_before_square, table, count_ops,
                         table.counts if table is not None else None)


def encode_qrdm(prob: PerturbationProblem, m_breadth: int | None = None, *, count_ops=True) -> EncoderResult:
    """Breadth-first M-algorithm; ``m_breadth`` defaults to ``T``."""
    T = prob.perturb_set.t_count
    m = T if m_breadth is None else int(m_breadth)
    if m < 1:
        raise ValueError("m_breadth must be >= 1")
    counts = OpCounter()
    ev = _Evaluator(prob, counts, None)

    def cmp(a, b):
        counts.comparisons += 1
        return (a[0] > b[0]) - (a[0] < b[0])

    beam = [(0.0, [])]
    for i in range(prob.k):
        cand = []
        for metric, ks in beam:
            for kk in range(T):
                e = ev.increment(i, ks, kk)
                sq = e * e
                counts.real_mults += 1
                if i:
                    sq = metric + sq
                    counts.real_adds += 1
                cand.append((sq, ks + [kk]))
                counts.nodes_visited += 1
        # stable sort keeps (parent order, t ascending) among equal metrics
        cand.sort(key=functools.cmp_to_key(cmp))
        beam = cand[:m]
    metric, ks = beam[0]
    return _finish(prob, ks, metric, counts if count_ops else None,
                   np.array([b[0] for b in beam]))


def encode_sphere(prob: PerturbationProblem, initial_radius: float = math.inf, *, count_ops=True) -> EncoderResult:
    """Depth-first sphere encoder with Schnorr-Euchner child ordering.

    Children are visited in order of accumulated metric and the radius
    shrinks to every improved leaf. With the default infinite initial radius
    the first descent is the DFE path, so a solution always exists.
    """
    counts = OpCounter()
    ev = _Evaluator(prob, counts, None)
    T = prob.perturb_set.t_count
    K = prob.k
    best = [initial_radius, None]

    def visit(i, metric, ks):
        children = []
        for kk in range(T):
            e = ev.increment(i, ks, kk)
            sq = e * e
            counts.real_mults += 1
            if i:
                sq = metric + sq
                counts.real_adds += 1
            children.append((sq, kk))
            counts.nodes_visited += 1
        children.sort()
        counts.comparisons += T - 1
        for m, kk in children:
            counts.comparisons += 1
            if m > best[0]:
                break
            path = ks + [kk]
            if i == K - 1:
                if best[1] is None or m < best[0] or (m == best[0] and path < best[1]):
                    best[0], best[1] = m, path
            else:
                visit(i + 1, m, path)

    visit(0, 0.0, [])
    if best[1] is None:
        raise ValueError("initial radius excludes every candidate")
    return _finish(prob, best[1], best[0], counts if count_ops else None)


def encode_exhaustive(prob: PerturbationProblem, *, count_ops=True) -> EncoderResult:
    """Brute force over all ``T^K`` vectors; ties go to the smallest ``t``."""
    T = prob.perturb_set.t_count
    K = prob.k
    if T ** K > EXHAUSTIVE_LIMIT:
        raise SearchSpaceTooLarge(f"T^K = {T}^{K} exceeds {EXHAUSTIVE_LIMIT}")
    counts = OpCounter()
    tv = prob.perturb_set.values.astype(float)
    l = prob.l
    v_cand = prob.s[:, None] + prob.tau * tv[None, :]  # (K, T)
    v = np.empty((1, 0))
    metric = np.zeros(1)
    for i in range(K):
        n = v.shape[0]
        if i:
            u = l[i, 0] * v[:, 0]
            for j in range(1, i):
                u = u + l[i, j] * v[:, j]
            e = u[:, None] + l[i, i] * v_cand[i][None, :]
            metric = (metric[:, None] + e * e).ravel()
        else:
            e = l[0, 0] * v_cand[0]
            metric = e * e
        v = np.concatenate([np.repeat(v, T, axis=0), np.tile(v_cand[i], n)[:, None]], axis=1)
        nodes = n * T
        counts.nodes_visited += nodes
        counts.real_mults += nodes * (2 * (i + 1) + 1)
        counts.real_adds += nodes * ((i + 1) + i + (1 if i else 0))
    best = int(np.argmin(metric))
    counts.comparisons += metric.size - 1
    ks = np.unravel_index(best, (T,) * K)
    return _finish(prob, list(ks), metric[best], counts if count_ops else None)


def encode_lzf(h, s, p_total: float):
    """Linear zero forcing: ``x = H^-1 s / sqrt(gamma)``, ``gamma = Tr((HH^T)^-1)/P_T``."""
    p = pseudo_inverse(h)
    gamma = float(np.sum(p * p)) / p_total
    return p @ np.asarray(s, dtype=float) / math.sqrt(gamma), gamma


def encode_lmmse(h, s, sigma_n_sq: float, p_total: float):
    """Regularized inversion, normalized to the same expected power as LZF."""
    h = as_real_matrix(h)
    alpha = mmse_regularization(h.shape[0], sigma_n_sq, p_total)
    p = pseudo_inverse(h, alpha)
    gamma = float(np.sum(p * p)) / p_total
    return p @ np.asarray(s, dtype=float) / math.sqrt(gamma), gamma


def count_arithmetic(run: EncoderResult, phase: str = "tree_search", n_f: int = 1):
    """Return ``(mults, adds)`` tallied by an encoder run.

    ``phase="precompute"`` gives the table-building cost amortized over
    ``n_f`` transmissions sharing the channel.
    """
    if phase == "tree_search":
        if run.counts is None:
            raise CountersDisabled("run was made with count_ops=False")
        return run.counts.real_mults, run.counts.real_adds
    if phase == "precompute":
        if run.precompute_counts is None:
            raise CountersDisabled("run did not use a precompute table")
        c = run.precompute_counts
        if n_f == 1:
            return c.real_mults, c.real_adds
        return c.real_mults / n_f, c.real_adds / n_f
    raise ValueError(f"unknown phase {phase!r}")
