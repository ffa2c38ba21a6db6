"""The vectorized encoders must reproduce the per-instance encoders exactly."""

import numpy as np
import pytest

from vperturb import batch
from vperturb.channel import draw_complex_gaussian, real_decompose
from vperturb.encoders import (
    PerturbationProblem,
    build_problem,
    encode_exhaustive,
    encode_fse,
    encode_qrdm,
    encode_thp,
    mmse_regularization,
)
from vperturb.modem import PerturbSet, map_bits, qpsk, tau

QPSK = qpsk()
TAU = tau(QPSK)


def stack(rng, n, count, criterion, sigma_n_sq=0.4):
    h = real_decompose(draw_complex_gaussian((count, n, n), rng))
    s = map_bits(rng.integers(0, 2, (count, 2 * n)), QPSK)
    l, p = batch.build_problems(h, criterion, sigma_n_sq, 2 * n)
    return h, s, l, p


@pytest.mark.parametrize("criterion", ["zf", "mmse"])
def test_build_problems_matches_scalar(criterion):
    rng = np.random.default_rng(0)
    h, s, l, p = stack(rng, 4, 40, criterion)
    for i in range(40):
        prob = build_problem(h[i], s[i], TAU, PerturbSet.from_size(3), criterion, 0.4, 8.0)
        np.testing.assert_allclose(l[i], prob.l, atol=1e-10)
        np.testing.assert_allclose(p[i], prob.precode_matrix, atol=1e-10)


def test_linear_precoders():
    rng = np.random.default_rng(1)
    h = real_decompose(draw_complex_gaussian((10, 2, 2), rng))
    np.testing.assert_allclose(batch.linear_precoders(h, "zf") @ h, np.broadcast_to(np.eye(4), h.shape), atol=1e-9)
    alpha = mmse_regularization(4, 0.5, 4.0)
    pm = batch.linear_precoders(h, "mmse", 0.5, 4.0)
    for i in range(10):
        np.testing.assert_allclose(pm[i], h[i].T @ np.linalg.inv(h[i] @ h[i].T + alpha * np.eye(4)), atol=1e-12)


@pytest.mark.parametrize(
    "n, t, full",
    [(2, 3, 0), (2, 3, 1), (2, 3, 2), (2, 3, 4), (4, 9, 0), (4, 9, 1), (4, 3, 2), (8, 3, 2)],
)
@pytest.mark.parametrize("cbs", [False, True])
def test_tree_search_is_bit_identical(n, t, full, cbs):
    rng = np.random.default_rng(n * 100 + t * 10 + full)
    _, s, l, p = stack(rng, n, 60, "mmse")
    ps = PerturbSet.from_size(t)
    kb, mb, leaves = batch.tree_search(l, s, TAU, ps.values, full, cbs)
    assert leaves.shape == (60, t ** full)
    for i in range(60):
        prob = PerturbationProblem(l[i], p[i], s[i], TAU, ps)
        if full == 2 * n:
            ref = encode_exhaustive(prob)
        elif full == 0:
            ref = encode_thp(prob, compare_before_square=cbs)
        else:
            ref = encode_fse(prob, full, compare_before_square=cbs)
        np.testing.assert_array_equal(ps.values[kb[i]], ref.t)
        assert mb[i] == ref.metric
        if ref.leaf_metrics is not None and full:
            np.testing.assert_array_equal(leaves[i], ref.leaf_metrics)


@pytest.mark.parametrize("n, t, m", [(2, 3, 1), (2, 3, 3), (2, 3, 81), (4, 9, 9), (4, 5, 2), (8, 9, 9)])
def test_qrdm_search_is_bit_identical(n, t, m):
    rng = np.random.default_rng(n + t + m)
    _, s, l, p = stack(rng, n, 60, "zf")
    ps = PerturbSet.from_size(t)
    kb, mb, _ = batch.qrdm_search(l, s, TAU, ps.values, m)
    for i in range(60):
        ref = encode_qrdm(PerturbationProblem(l[i], p[i], s[i], TAU, ps), m)
        np.testing.assert_array_equal(ps.values[kb[i]], ref.t)
        assert mb[i] == ref.metric


def test_qrdm_search_with_tied_metrics():
    # an identity channel with s = 0 ties many candidates at each level
    ps = PerturbSet.from_size(3)
    l = np.broadcast_to(np.eye(4), (5, 4, 4)).copy()
    s = np.zeros((5, 4))
    kb, mb, _ = batch.qrdm_search(l, s, TAU, ps.values, 2)
    ref = encode_qrdm(PerturbationProblem(l[0], np.eye(4), s[0], TAU, ps), 2)
    for i in range(5):
        np.testing.assert_array_equal(ps.values[kb[i]], ref.t)


def test_smallest_matches_stable_argsort():
    rng = np.random.default_rng(2)
    for a in (rng.integers(0, 4, (500, 27)).astype(float), rng.random((500, 81))):
        for m in (1, 3, 9, 27):
            np.testing.assert_array_equal(batch._smallest(a, m), np.argsort(a, axis=1, kind="stable")[:, :m])


@pytest.mark.parametrize("k, t, full, cbs, pre", [(8, 9, 1, True, True), (8, 3, 2, False, False),
                                                   (4, 3, 0, True, False), (6, 5, 1, False, True)])
def test_count_tables_match_instrumented(k, t, full, cbs, pre):
    rng = np.random.default_rng(3)
    h = real_decompose(draw_complex_gaussian((k // 2, k // 2), rng))
    s = map_bits(rng.integers(0, 2, k), QPSK)
    prob = build_problem(h, s, TAU, PerturbSet.from_size(t), "mmse", 0.5, k, QPSK)
    enc = (lambda pr: encode_thp(pr, compare_before_square=cbs, use_precompute=pre)) if full == 0 else \
        (lambda pr: encode_fse(pr, full, compare_before_square=cbs, use_precompute=pre))
    got = enc(prob).counts
    c = batch.fixed_search_counts(k, t, full, cbs, pre)
    assert (c.nodes_visited, c.real_mults, c.real_adds) == (got.nodes_visited, got.real_mults, got.real_adds)


def test_qrdm_count_table_matches_instrumented():
    rng = np.random.default_rng(4)
    for k, t, m in [(8, 9, 9), (4, 3, 2), (6, 5, 1)]:
        h = real_decompose(draw_complex_gaussian((k // 2, k // 2), rng))
        prob = build_problem(h, map_bits(rng.integers(0, 2, k), QPSK), TAU, PerturbSet.from_size(t), "zf")
        got = encode_qrdm(prob, m).counts
        c = batch.qrdm_counts(k, t, m)
        assert (c.nodes_visited, c.real_mults, c.real_adds) == (got.nodes_visited, got.real_mults, got.real_adds)
