"""Per-real-dimension PAM constellations, Gray mapping and the modulo receiver.

QPSK is two independent 2-PAM rails with levels ``{-1, +1}``; larger square
QAM orders reuse the same machinery with more levels per rail.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import LengthMismatch

__all__ = [
    "Constellation",
    "PerturbSet",
    "qpsk",
    "square_qam",
    "tau",
    "map_bits",
    "demap",
    "modulo_reduce",
]


@dataclass(frozen=True)
class Constellation:
    """Uniformly spaced real levels, symmetric about zero."""

    real_points: tuple[float, ...]

    def __post_init__(self):
        pts = np.asarray(self.real_points, dtype=float)
        if pts.size < 2:
            raise ValueError("need at least two levels")
        d = np.diff(pts)
        if np.any(d <= 0) or not np.allclose(d, d[0]):
            raise ValueError("levels must be increasing and uniformly spaced")
        if not np.allclose(pts, -pts[::-1]):
            raise ValueError("levels must be symmetric about zero")
        if pts.size & (pts.size - 1):
            raise ValueError("number of levels must be a power of two")

    @property
    def levels(self) -> np.ndarray:
        return np.asarray(self.real_points, dtype=float)

    @property
    def delta(self) -> float:
        return float(self.real_points[1] - self.real_points[0])

    @property
    def c_max_abs(self) -> float:
        return float(np.max(np.abs(self.levels)))

    @property
    def bits_per_real_dim(self) -> int:
        return len(self.real_points).bit_length() - 1

    @property
    def size(self) -> int:
        """Number of real levels (``D``)."""
        return len(self.real_points)

    @property
    def mean_energy(self) -> float:
        """Mean energy per real dimension for equiprobable levels."""
        return float(np.mean(self.levels ** 2))


@dataclass(frozen=True)
class PerturbSet:
    """Symmetric integer candidate set ``[-a, ..., a]``."""

    a: int

    def __post_init__(self):
        if int(self.a) != self.a or self.a < 0:
            raise ValueError("a must be a nonnegative integer")

    @classmethod
    def from_size(cls, t_count: int) -> "PerturbSet":
        if t_count < 1 or t_count % 2 == 0:
            raise ValueError(f"T must be odd and >= 1, got {t_count}")
        return cls((t_count - 1) // 2)

    @property
    def values(self) -> np.ndarray:
        return np.arange(-self.a, self.a + 1)

    @property
    def t_count(self) -> int:
        return 2 * self.a + 1


def qpsk() -> Constellation:
    return Constellation((-1.0, 1.0))


def square_qam(order: int) -> Constellation:
    """Unnormalized square QAM rail, levels ``-(D-1), ..., -1, 1, ..., D-1``."""
    d = int(round(order ** 0.5))
    if d * d != order or d < 2:
        raise ValueError(f"{order}-QAM is not a square constellation")
    return Constellation(tuple(float(v) for v in range(-(d - 1), d, 2)))


def tau(c: Constellation) -> float:
    return 2.0 * (c.c_max_abs + c.delta / 2.0)


def _gray(n):
    return n ^ (n >> 1)


def _gray_inverse(g):
    n = np.array(g, copy=True)
    shift = g >> 1
    while np.any(shift):
        n ^= shift
        shift >>= 1
    return n


def map_bits(bits, c: Constellation, k: int | None = None) -> np.ndarray:
    """Gray-map bits to real levels, ``bits_per_real_dim`` bits per entry.

    The last axis of ``bits`` is consumed; MSB first within each entry.
    """
    bits = np.asarray(bits).astype(np.int64)
    b = c.bits_per_real_dim
    n = bits.shape[-1]
    if n % b or (k is not None and n != k * b):
        raise LengthMismatch(f"{n} bits do not fill real dimensions of {b} bits each")
    groups = bits.reshape(bits.shape[:-1] + (n // b, b))
    weights = 1 << np.arange(b - 1, -1, -1)
    idx = _gray_inverse(groups @ weights)
    return c.levels[idx]


def demap(s_hat, c: Constellation) -> np.ndarray:
    """Hard-decision slicer: nearest level per entry, ties to the lower level."""
    s_hat = np.asarray(s_hat, dtype=float)
    u = (s_hat - c.real_points[0]) / c.delta
    idx = np.clip(np.ceil(u - 0.5), 0, c.size - 1).astype(np.int64)
    g = _gray(idx)
    b = c.bits_per_real_dim
    shifts = np.arange(b - 1, -1, -1)
    out = (g[..., None] >> shifts) & 1
    return out.reshape(s_hat.shape[:-1] + (s_hat.shape[-1] * b,)).astype(np.int8)


def modulo_reduce(y, tau: float) -> np.ndarray:
    """Fold every entry into ``[-tau/2, tau/2)``."""
    if tau <= 0:
        raise ValueError("tau must be positive")
    y = np.asarray(y, dtype=float)
    return y - tau * np.floor((y + tau / 2.0) / tau)
