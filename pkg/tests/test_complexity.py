import math
from fractions import Fraction

import numpy as np
import pytest

from vperturb.channel import draw_channel, inject_csi_error
from vperturb.complexity import (
    arithmetic_totals,
    csi_bound_sweep,
    csi_error_bound,
    fse_nodes,
    neumann_first_order_check,
    neumann_inverse,
    node_count_table,
    precompute_arithmetic,
    qrdme_nodes,
    rho,
    se_worst_case_nodes,
    tree_search_arithmetic,
)
from vperturb.encoders import build_problem, encode_fse, encode_qrdm, encode_sphere
from vperturb.errors import InapplicableExpansion, Overflow
from vperturb.modem import PerturbSet, map_bits, qpsk, tau


@pytest.mark.parametrize("k, t, expected", [(1, 5, 5), (2, 3, 12), (8, 7, 6725600)])
def test_se_worst_case(k, t, expected):
    assert se_worst_case_nodes(k, t) == expected
    assert se_worst_case_nodes(k, t) == (t ** (k + 1) - t) // (t - 1)


def test_se_worst_case_overflow_and_domain():
    assert se_worst_case_nodes(16, 9) == (9 ** 17 - 9) // 8
    with pytest.raises(Overflow):
        se_worst_case_nodes(32, 9)
    with pytest.raises(ValueError):
        se_worst_case_nodes(4, 1)
    with pytest.raises(ValueError):
        se_worst_case_nodes(0, 3)


@pytest.mark.parametrize("k, t, expected", [(8, 9, 576), (16, 9, 1224), (1, 7, 7)])
def test_qrdme_nodes(k, t, expected):
    assert qrdme_nodes(k, t) == expected
    assert qrdme_nodes(k, t) == t + (k - 1) * t * t


@pytest.mark.parametrize("k, t, p, expected", [(8, 9, 1, 72), (8, 3, 2, 66), (16, 3, 2, 138), (16, 9, 1, 144)])
def test_fse_nodes(k, t, p, expected):
    assert fse_nodes(k, t, p) == expected


def test_fse_nodes_domain():
    with pytest.raises(ValueError):
        fse_nodes(4, 3, 0)
    with pytest.raises(ValueError):
        fse_nodes(4, 3, 5)


def test_rho_values():
    assert rho(8, 7) == Fraction(16, 100)
    assert rho(8, 9) == Fraction(1, 8)
    assert Fraction(fse_nodes(8, 3, 2), qrdme_nodes(8, 9)) == Fraction(66, 576)
    assert round(66 / 576, 4) == 0.1146
    assert abs(float(rho(10 ** 6, 9)) - 1 / 9) < 1e-6


def test_rho_identity():
    for k in range(1, 20):
        for t in (3, 5, 7, 9):
            assert rho(k, t) == Fraction(fse_nodes(k, t, 1), qrdme_nodes(k, t))


def test_arithmetic_closed_forms():
    assert precompute_arithmetic(8, 9, 2) == (656, 16)
    assert tree_search_arithmetic(8, 9) == (72, 2276)
    assert arithmetic_totals(8, 9, 2) == (728, 2292)
    mults, _ = arithmetic_totals(8, 9, 2, n_f=10 ** 9)
    assert abs(float(mults) - 72) < 1e-6
    with pytest.raises(ValueError):
        precompute_arithmetic(8, 9, 2, 0)


def test_node_count_table():
    assert node_count_table() == [
        {"system": "4x4", "K": 8, "qrdme_T9": 576, "fse_p1_T9": 72, "fse_p2_T3": 66},
        {"system": "8x8", "K": 16, "qrdme_T9": 1224, "fse_p1_T9": 144, "fse_p2_T3": 138},
    ]


def _problem(rng, k, t):
    h = draw_channel(k // 2, rng).h_real
    s = map_bits(rng.integers(0, 2, k), qpsk())
    return build_problem(h, s, tau(qpsk()), PerturbSet.from_size(t), "mmse", 0.5, k)


@pytest.mark.parametrize("k", [4, 8, 16])
@pytest.mark.parametrize("t", [3, 5, 7, 9])
def test_formulas_match_instrumented_nodes(k, t):
    prob = _problem(np.random.default_rng(k * t), k, t)
    assert encode_qrdm(prob).counts.nodes_visited == qrdme_nodes(k, t)
    for p in (1, 2):
        assert encode_fse(prob, p=p).counts.nodes_visited == fse_nodes(k, t, p)


def test_sphere_nodes_below_worst_case():
    rng = np.random.default_rng(1)
    for _ in range(50):
        prob = _problem(rng, 4, 5)
        assert encode_sphere(prob).counts.nodes_visited <= se_worst_case_nodes(4, 5)


def test_csi_bound_examples():
    rng = np.random.default_rng(2)
    b = rng.standard_normal((4, 4))
    bound, actual = csi_error_bound(np.eye(4), b)
    fro = np.sum(b * b)
    assert math.isclose(bound, 16 * fro, rel_tol=1e-12)
    assert math.isclose(actual, fro, rel_tol=1e-12)
    assert csi_error_bound(np.eye(4), np.zeros((4, 4))) == (0.0, 0.0)


def test_csi_bound_holds_on_random_pairs():
    rng = np.random.default_rng(3)
    for _ in range(200):
        h = draw_channel(2, rng).h_real
        _, err = inject_csi_error(h, float(rng.uniform(0, 30)), rng)
        bound, actual = csi_error_bound(h, err.b)
        assert actual <= bound


def test_neumann_examples():
    assert neumann_first_order_check(np.eye(3), np.zeros((3, 3))) == 0.0
    for eps in (0.1, 0.01):
        got = neumann_first_order_check(np.eye(4), eps * np.eye(4))
        assert math.isclose(got, eps ** 2 / (1 + eps) * 2, rel_tol=1e-9)
    with pytest.raises(InapplicableExpansion):
        neumann_first_order_check(np.eye(2), 2 * np.eye(2))


def test_neumann_series_converges_to_inverse():
    rng = np.random.default_rng(4)
    h = np.eye(4) + 0.1 * rng.standard_normal((4, 4))
    b = 0.05 * rng.standard_normal((4, 4))
    np.testing.assert_allclose(neumann_inverse(h, b, 60), np.linalg.inv(h + b), atol=1e-12)


def test_neumann_residual_is_quadratic_for_small_error():
    rng = np.random.default_rng(5)
    h = draw_channel(2, rng).h_real
    b = 1e-3 * rng.standard_normal((4, 4))
    res = [neumann_first_order_check(h, b / 2 ** j) for j in range(5)]
    ratios = [a / c for a, c in zip(res, res[1:])]
    assert all(3.5 <= r <= 4.5 for r in ratios)


def test_csi_bound_sweep_small():
    out = csi_bound_sweep(2, 30, np.random.default_rng(6))
    assert out["violations"] == 0
    assert out["pairs"] == 30
    assert out["skipped"] + out["small_pairs"] <= 30
