"""Rayleigh flat-fading channels in complex and real-lattice form.

The real image of an ``N x N`` complex matrix ``H`` is the ``2N x 2N`` block
matrix ``[[Re H, -Im H], [Im H, Re H]]``; user ``i`` owns real rows ``i`` and
``N + i``. All randomness comes from an explicit :class:`numpy.random.Generator`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateChannel
from .linalg import as_complex_matrix, frobenius_norm_sq

__all__ = [
    "ChannelRealization",
    "CsiError",
    "draw_channel",
    "draw_complex_gaussian",
    "real_decompose",
    "inject_csi_error",
    "add_noise",
]


@dataclass(frozen=True)
class ChannelRealization:
    h_complex: np.ndarray
    h_real: np.ndarray

    @property
    def n_users(self) -> int:
        return self.h_complex.shape[-1]

    @property
    def k(self) -> int:
        return self.h_real.shape[-1]


@dataclass(frozen=True)
class CsiError:
    b: np.ndarray
    zeta_db: float


def draw_complex_gaussian(shape, rng: np.random.Generator) -> np.ndarray:
    """i.i.d. CN(0, 1) entries: real and imaginary parts each of variance 1/2."""
    z = rng.standard_normal(tuple(shape) + (2,)) * math.sqrt(0.5)
    return z[..., 0] + 1j * z[..., 1]


def draw_channel(n: int, rng: np.random.Generator, count: int | None = None) -> ChannelRealization:
    """Draw one ``n x n`` Rayleigh channel, or a stack of ``count`` of them."""
    if n < 1:
        raise ValueError("n must be >= 1")
    shape = (n, n) if count is None else (count, n, n)
    h = draw_complex_gaussian(shape, rng)
    return ChannelRealization(h, real_decompose(h))


def real_decompose(h) -> np.ndarray:
    """Map complex ``H`` (or a stack) to ``[[Re H, -Im H], [Im H, Re H]]``."""
    h = as_complex_matrix(h)
    re, im = h.real, h.imag
    top = np.concatenate([re, -im], axis=-1)
    bottom = np.concatenate([im, re], axis=-1)
    return np.concatenate([top, bottom], axis=-2)


def inject_csi_error(h, zeta_db: float, rng: np.random.Generator):
    """Return ``(H + B, CsiError)`` with ``||H||_F^2 / ||B||_F^2 = 10^(zeta/10)``.

    ``B`` is the real image of a complex Gaussian matrix, rescaled per
    realization so the ratio is met exactly. ``zeta_db = inf`` means perfect
    CSI. A stack of channels gets one independent ``B`` per matrix.
    """
    h = np.asarray(h, dtype=float)
    if math.isnan(zeta_db) or zeta_db == -math.inf:
        raise ValueError("zeta_db must be finite or +inf")
    k = h.shape[-1]
    if k % 2 or h.shape[-2] != k:
        raise ValueError("expected a square real channel of even dimension")
    if zeta_db == math.inf:
        return h.copy(), CsiError(np.zeros_like(h), zeta_db)
    h_pow = np.sum(h * h, axis=(-2, -1))
    if np.any(h_pow == 0.0):
        raise DegenerateChannel("||H||_F = 0, zeta is undefined")
    b = real_decompose(draw_complex_gaussian(h.shape[:-2] + (k // 2, k // 2), rng))
    b_pow = np.sum(b * b, axis=(-2, -1))
    scale = np.sqrt(h_pow / (b_pow * 10.0 ** (zeta_db / 10.0)))
    b = b * np.asarray(scale)[..., None, None]
    return h + b, CsiError(b, zeta_db)


def add_noise(y, sigma_n_sq: float, rng: np.random.Generator) -> np.ndarray:
    """Add real Gaussian noise of variance ``sigma_n_sq / 2`` per real entry.

    ``sigma_n_sq`` is the variance per complex dimension.
    """
    if sigma_n_sq < 0:
        raise ValueError("sigma_n_sq must be nonnegative")
    y = np.asarray(y, dtype=float)
    if sigma_n_sq == 0:
        return y.copy()
    return y + rng.standard_normal(y.shape) * math.sqrt(sigma_n_sq / 2.0)


def zeta_of(h, b) -> float:
    """Measured CSI quality ``10 log10(||H||^2 / ||B||^2)`` in dB."""
    return 10.0 * math.log10(frobenius_norm_sq(h) / frobenius_norm_sq(b))
