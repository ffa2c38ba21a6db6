"""Closed-form complexity counts and the imperfect-CSI error bound.

Node counts are exact Python integers; ratios and amortized arithmetic
counts are :class:`fractions.Fraction` so that reported percentages are
exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import InapplicableExpansion, Overflow
from .linalg import frobenius_norm_sq, pseudo_inverse, singular_values

__all__ = [
    "ComplexityProfile",
    "se_worst_case_nodes",
    "qrdme_nodes",
    "fse_nodes",
    "rho",
    "precompute_arithmetic",
    "tree_search_arithmetic",
    "arithmetic_totals",
    "node_count_table",
    "csi_error_bound",
    "neumann_inverse",
    "neumann_first_order_check",
    "csi_bound_sweep",
]

INT64_MAX = 2 ** 63 - 1


@dataclass(frozen=True)
class ComplexityProfile:
    encoder_kind: str
    k: int
    t: int
    nodes: int
    p: int | None = None
    m: int | None = None
    mults: int | None = None
    adds: int | None = None


def _check(k, t):
    if k < 1:
        raise ValueError("K must be >= 1")
    if t < 1:
        raise ValueError("T must be >= 1")


def se_worst_case_nodes(k: int, t: int) -> int:
    """Full tree size ``sum_{i=1}^K T^i``.

    Raises :class:`Overflow` when the count does not fit a signed 64-bit int.
    """
    _check(k, t)
    if t < 2:
        raise ValueError("T must be >= 2")
    total, power = 0, 1
    for _ in range(k):
        power *= t
        total += power
        if total > INT64_MAX:
            raise Overflow(f"C_SE({k}, {t}) exceeds the 64-bit range")
    return total


def qrdme_nodes(k: int, t: int, m: int | None = None) -> int:
    """Metric computations of the M-algorithm; ``m`` defaults to ``T``.

    For ``M = T`` this is ``T + (K - 1) T^2``.
    """
    _check(k, t)
    m = t if m is None else m
    total, beam = 0, 1
    for _ in range(k):
        total += beam * t
        beam = min(m, beam * t)
    return total


def fse_nodes(k: int, t: int, p: int = 1) -> int:
    """``sum_{i=1}^p T^i + (K - p) T^p``; ``K T`` for ``p = 1``."""
    _check(k, t)
    if not 1 <= p <= k:
        raise ValueError(f"p must be in [1, {k}]")
    return sum(t ** i for i in range(1, p + 1)) + (k - p) * t ** p


def rho(k: int, t: int) -> Fraction:
    """Node-count ratio of FSE (p = 1) to the M-algorithm with ``M = T``."""
    return Fraction(fse_nodes(k, t, 1), qrdme_nodes(k, t))


def precompute_arithmetic(k: int, t: int, d: int, n_f: int = 1) -> tuple[Fraction, Fraction]:
    """Table cost per transmission: ``((DTK(K+1) + 2T - 2) / 2N_f, D(T-1)/N_f)``."""
    if n_f < 1:
        raise ValueError("N_f must be >= 1")
    return Fraction(d * t * k * (k + 1) + 2 * t - 2, 2 * n_f), Fraction(d * (t - 1), n_f)


def tree_search_arithmetic(k: int, t: int) -> tuple[int, int]:
    """FSE (p = 1) tree-search cost with both reduction techniques."""
    return k * t, t * t * k * (k - 1) // 2 + t - 1


def arithmetic_totals(k: int, t: int, d: int, n_f: int = 1) -> tuple[Fraction, Fraction]:
    pm, pa = precompute_arithmetic(k, t, d, n_f)
    tm, ta = tree_search_arithmetic(k, t)
    return pm + tm, pa + ta


def node_count_table(systems=((4, 8), (8, 16))) -> list[dict]:
    """Node counts of the M-algorithm (T = 9), FSE-p1 (T = 9) and FSE-p2 (T = 3)."""
    rows = []
    for n, k in systems:
        rows.append({
            "system": f"{n}x{n}",
            "K": k,
            "qrdme_T9": qrdme_nodes(k, 9),
            "fse_p1_T9": fse_nodes(k, 9, 1),
            "fse_p2_T3": fse_nodes(k, 3, 2),
        })
    return rows


def csi_error_bound(h, b) -> tuple[float, float]:
    """Return ``(bound, actual)`` for the first-order precoder error.

    ``actual = ||H^-1 B H^-1||_F^2`` and
    ``bound = (sum 1/sigma_i(H)^2)^2 * sum sigma_i(B)^2``.
    """
    h = np.asarray(h, dtype=float)
    b = np.asarray(b, dtype=float)
    h_inv = pseudo_inverse(h)
    sh = singular_values(h)
    sb = singular_values(b)
    bound = float(np.sum(1.0 / sh ** 2) ** 2 * np.sum(sb ** 2))
    actual = frobenius_norm_sq(h_inv @ b @ h_inv)
    return bound, actual


def _spectral_norm(m, iters):
    v = np.ones(m.shape[1]) / np.sqrt(m.shape[1])
    est = 0.0
    for _ in range(iters):
        w = m.T @ (m @ v)
        nrm = np.linalg.norm(w)
        if nrm == 0.0:
            return 0.0
        v = w / nrm
        new = np.sqrt(nrm)
        if abs(new - est) <= 1e-12 * new:
            return float(new)
        est = new
    return float(est)


def neumann_inverse(h, b, order: int) -> np.ndarray:
    """Truncated series ``sum_{i=0}^{order} (-H^-1 B)^i H^-1``."""
    h_inv = pseudo_inverse(np.asarray(h, dtype=float))
    g = -h_inv @ np.asarray(b, dtype=float)
    term = h_inv.copy()
    total = h_inv.copy()
    for _ in range(order):
        term = g @ term
        total += term
    return total


def neumann_first_order_check(h, b, order_cap: int = 200) -> float:
    """``||(H + B)^-1 - (H^-1 - H^-1 B H^-1)||_F``.

    ``order_cap`` bounds the power iteration that estimates the spectral norm
    of ``H^-1 B``; the expansion is rejected when that estimate reaches 1.
    """
    h = np.asarray(h, dtype=float)
    b = np.asarray(b, dtype=float)
    h_inv = pseudo_inverse(h)
    g = h_inv @ b
    if _spectral_norm(g, order_cap) >= 1.0:
        raise InapplicableExpansion("spectral norm of H^-1 B is not below 1")
    if not np.any(b):
        return 0.0
    exact = pseudo_inverse(h + b)
    approx = h_inv - g @ h_inv
    return float(np.sqrt(frobenius_norm_sq(exact - approx)))


def csi_bound_sweep(n_antennas: int, pairs: int, rng: np.random.Generator, zeta_db: float = 25.0,
                    halvings: int = 4) -> dict:
    """Check the error bound and the quadratic Neumann residual on random pairs.

    Each pair is a Rayleigh channel (real image, ``2N x 2N``) and an error
    matrix at CSI quality ``zeta_db``. Pairs whose ``H^-1 B`` is too large
    for the series are counted in ``skipped`` and left out of the shrink
    statistics.

    Returns
    -------
    dict
        ``violations`` (pairs with ``actual > bound``), ``max_ratio`` of
        ``actual / bound`` and ``min_shrink``, the smallest residual ratio
        seen between consecutive halvings of ``B``. ``min_shrink_small``
        restricts the latter to pairs with ``||H^-1 B||_2 <= 1/3``, where the
        scalar series ``x^2 / (1 + x)`` already guarantees a ratio of 3.5.
    """
    from .channel import draw_complex_gaussian, inject_csi_error, real_decompose

    violations = skipped = 0
    max_ratio = 0.0
    min_shrink = min_small = math.inf
    n_small = 0
    for _ in range(pairs):
        h = real_decompose(draw_complex_gaussian((n_antennas, n_antennas), rng))
        b = inject_csi_error(h, zeta_db, rng)[1].b
        bound, actual = csi_error_bound(h, b)
        violations += actual > bound
        max_ratio = max(max_ratio, actual / bound)
        try:
            res = [neumann_first_order_check(h, b / 2.0 ** j) for j in range(halvings + 1)]
        except InapplicableExpansion:
            skipped += 1
            continue
        shrink = min(a / c for a, c in zip(res, res[1:]))
        min_shrink = min(min_shrink, shrink)
        if _spectral_norm(pseudo_inverse(h) @ b, 200) <= 1.0 / 3.0:
            n_small += 1
            min_small = min(min_small, shrink)
    return {
        "n_antennas": n_antennas,
        "pairs": pairs,
        "violations": int(violations),
        "max_ratio": max_ratio,
        "min_shrink": min_shrink,
        "min_shrink_small": min_small,
        "small_pairs": n_small,
        "skipped": skipped,
    }
