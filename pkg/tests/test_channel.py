import math

import numpy as np
import pytest

from vperturb.channel import add_noise, draw_channel, inject_csi_error, real_decompose
from vperturb.errors import DegenerateChannel


def test_draw_channel_shapes():
    ch = draw_channel(2, np.random.default_rng(0))
    assert ch.h_complex.shape == (2, 2)
    assert ch.h_real.shape == (4, 4)
    assert ch.n_users == 2 and ch.k == 4
    np.testing.assert_array_equal(ch.h_real, real_decompose(ch.h_complex))


def test_draw_channel_is_deterministic():
    a = draw_channel(4, np.random.default_rng(42))
    b = draw_channel(4, np.random.default_rng(42))
    np.testing.assert_array_equal(a.h_complex, b.h_complex)


def test_draw_channel_unit_variance():
    h = draw_channel(1, np.random.default_rng(1), count=100_000).h_complex
    assert abs(np.mean(np.abs(h) ** 2) - 1.0) < 0.02
    assert abs(np.var(h.real) - 0.5) < 0.01


def test_draw_channel_rejects_zero():
    with pytest.raises(ValueError):
        draw_channel(0, np.random.default_rng(0))


def test_real_decompose_scalar():
    np.testing.assert_array_equal(real_decompose([[3 + 2j]]), [[3, -2], [2, 3]])
    np.testing.assert_array_equal(real_decompose(np.eye(2)), np.eye(4))


def test_real_decompose_homomorphism():
    rng = np.random.default_rng(2)
    for _ in range(50):
        n = int(rng.integers(1, 6))
        a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        b = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        np.testing.assert_allclose(real_decompose(a @ b), real_decompose(a) @ real_decompose(b), atol=1e-12)
        np.testing.assert_allclose(real_decompose(a.conj().T), real_decompose(a).T, atol=1e-12)
        assert math.isclose(np.sum(real_decompose(a) ** 2), 2 * np.sum(np.abs(a) ** 2), rel_tol=1e-12)


def test_csi_error_perfect_sentinel():
    h = draw_channel(2, np.random.default_rng(0)).h_real
    h_hat, err = inject_csi_error(h, math.inf, np.random.default_rng(0))
    np.testing.assert_array_equal(h_hat, h)
    assert not np.any(err.b)


@pytest.mark.parametrize("zeta", [0.0, 10.0, 25.0, 40.0])
def test_csi_error_hits_zeta_exactly(zeta):
    rng = np.random.default_rng(3)
    h = draw_channel(4, rng, count=20).h_real
    h_hat, err = inject_csi_error(h, zeta, rng)
    got = 10 * np.log10(np.sum(h ** 2, axis=(1, 2)) / np.sum(err.b ** 2, axis=(1, 2)))
    np.testing.assert_allclose(got, zeta, atol=1e-9)
    np.testing.assert_allclose(h_hat, h + err.b)


def test_csi_error_worked_example():
    # ||H||_F^2 = 8 at zeta = 25 dB gives ||B||_F^2 = 8 * 10^-2.5
    h = np.eye(8)
    _, err = inject_csi_error(h, 25.0, np.random.default_rng(4))
    assert math.isclose(np.sum(err.b ** 2), 8 * 10 ** -2.5, rel_tol=1e-12)
    assert math.isclose(np.sum(err.b ** 2), 0.0253, rel_tol=1e-2)


def test_csi_error_degenerate_and_invalid():
    with pytest.raises(DegenerateChannel):
        inject_csi_error(np.zeros((4, 4)), 10.0, np.random.default_rng(0))
    with pytest.raises(ValueError):
        inject_csi_error(np.eye(4), math.nan, np.random.default_rng(0))


def test_add_noise():
    y = np.arange(4.0)
    np.testing.assert_array_equal(add_noise(y, 0.0, np.random.default_rng(0)), y)
    n = add_noise(np.zeros(1_000_000), 1.0, np.random.default_rng(5))
    assert abs(np.var(n) - 0.5) < 0.005
    a = add_noise(y, 0.3, np.random.default_rng(8))
    b = add_noise(y, 0.3, np.random.default_rng(8))
    np.testing.assert_array_equal(a, b)
    with pytest.raises(ValueError):
        add_noise(y, -1.0, np.random.default_rng(0))
