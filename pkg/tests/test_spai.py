import numpy as np
import pytest
import scipy.sparse as sp

from mdprec.sparse import extract_graph
from mdprec.spai import (SpaiConfig, build_spai, graph_power, postfilter, prefilter,
                         spai_minimize, spai_smooth)


def graph_of(dense):
    return extract_graph(sp.csr_matrix(np.asarray(dense, dtype=float)))


def random_block_diagonal(rng, blocks, size):
    mats = [rng.standard_normal((size, size)) + size * np.eye(size) for _ in range(blocks)]
    return sp.block_diag(mats, format="csr")


# --- prefilter -------------------------------------------------------------

def test_prefilter_identity_keeps_diagonal_only():
    g = prefilter(sp.identity(3, format="csr").tocsr(), 0.5)
    assert g.nnz == 3
    assert np.array_equal(g.toarray(), np.eye(3))


def test_prefilter_symmetric_scaling():
    # scaled off-diagonal magnitude 0.1/sqrt(4*4) = 0.025 <= 0.1 -> dropped
    a = sp.csr_matrix(np.array([[4.0, 0.1], [0.1, 4.0]]))
    g = prefilter(a, 0.1)
    assert np.array_equal(g.toarray(), np.eye(2))


def test_prefilter_unit_fallback_for_zero_diagonal():
    # d_i falls back to 1, scaled magnitude 2 > 1 -> kept; diagonal by i==j
    a = sp.csr_matrix(np.array([[0.0, 2.0], [2.0, 0.0]]))
    g = prefilter(a, 1.0)
    assert np.array_equal(g.toarray(), np.ones((2, 2)))


def test_prefilter_output_bounded_by_pattern_union_diagonal():
    rng = np.random.default_rng(0)
    a = sp.random(30, 30, density=0.2, random_state=rng, format="csr")
    g = prefilter(a, 0.05)
    allowed = (extract_graph(a) + sp.identity(30, format="csr")).toarray() > 0
    got = g.toarray() > 0
    assert np.all(got <= allowed)
    assert np.all(np.diag(got))


# --- graph_power -----------------------------------------------------------

def bfs_reach(adj_dense, ell):
    """Oracle: nodes reachable within ell edges (paths of length 1..ell)."""
    n = adj_dense.shape[0]
    reach = adj_dense.astype(bool)
    acc = reach.copy()
    for _ in range(ell - 1):
        reach = reach @ adj_dense.astype(bool)
        acc |= reach
    return acc


def test_graph_power_ell1_is_identity_copy():
    g = graph_of([[1, 1, 0], [1, 1, 1], [0, 1, 1]])
    out = graph_power(g, 1)
    assert (out != g).nnz == 0


def test_graph_power_path_adds_corners():
    g = graph_of([[1, 1, 0], [1, 1, 1], [0, 1, 1]])
    out = graph_power(g, 2)
    assert np.array_equal(out.toarray() > 0, np.ones((3, 3), dtype=bool))


def test_graph_power_block_diagonal_stays():
    blk = np.ones((3, 3))
    g = graph_of(np.block([[blk, np.zeros((3, 3))], [np.zeros((3, 3)), blk]]))
    for ell in (2, 3, 4):
        out = graph_power(g, ell)
        assert np.array_equal(out.toarray() > 0, g.toarray() > 0)


def test_graph_power_matches_bfs_oracle_and_monotone():
    rng = np.random.default_rng(1)
    for n in (20, 80, 200):
        dense = (rng.random((n, n)) < 3.0 / n) | np.eye(n, dtype=bool)
        g = graph_of(dense.astype(float))
        prev = None
        for ell in (1, 2, 3):
            out = graph_power(g, ell).toarray() > 0
            assert np.array_equal(out, bfs_reach(dense, ell))
            if prev is not None:
                assert np.all(prev <= out)  # monotone in ell
            prev = out


# --- spai_minimize ---------------------------------------------------------

def full_pattern(n):
    return extract_graph(sp.csr_matrix(np.ones((n, n))))


def test_spai_minimize_diagonal():
    res = spai_minimize(sp.csr_matrix(np.diag([2.0, 4.0])), full_pattern(2))
    assert np.array_equal(res.approx_inverse.toarray(), np.diag([0.5, 0.25]))
    assert res.residual_fro == 0.0


def test_spai_minimize_dense_exact():
    rng = np.random.default_rng(2)
    a = rng.standard_normal((2, 2)) + 3 * np.eye(2)
    res = spai_minimize(sp.csr_matrix(a), full_pattern(2))
    assert np.abs(res.approx_inverse.toarray() - np.linalg.inv(a)).max() <= 1e-14


def test_spai_minimize_block_diagonal_recovery():
    rng = np.random.default_rng(3)
    a = random_block_diagonal(rng, 6, 8)
    res = spai_minimize(a, extract_graph(a))
    inv = np.linalg.inv(a.toarray())
    rel = np.linalg.norm(res.approx_inverse.toarray() - inv) / np.linalg.norm(inv)
    assert rel <= 1e-10


def normal_equations_oracle(a_dense, pattern, k):
    """Pattern-restricted least squares via dense normal equations."""
    rows = np.flatnonzero(pattern[:, k])
    sub = a_dense[:, rows]
    g = sub.T @ sub
    rhs = sub.T @ np.eye(a_dense.shape[0])[:, k]
    return rows, np.linalg.solve(g, rhs)


def test_spai_minimize_matches_normal_equations_oracle():
    for seed in range(100):
        rng = np.random.default_rng(seed)
        blocks = int(rng.integers(2, 5))
        size = int(rng.integers(2, 13))
        a = random_block_diagonal(rng, blocks, size)
        if a.shape[0] > 50:
            a = random_block_diagonal(rng, 2, 10)
        pattern = extract_graph(a)
        res = spai_minimize(a, pattern)
        a_dense = a.toarray()
        pat_dense = pattern.toarray() > 0
        m_hat = res.approx_inverse.toarray()
        for k in range(0, a.shape[0], max(1, a.shape[0] // 7)):
            rows, z = normal_equations_oracle(a_dense, pat_dense, k)
            assert np.abs(m_hat[rows, k] - z).max() <= 1e-10 * max(1.0, np.abs(z).max())


def test_spai_minimize_empty_column_errors():
    a = sp.csr_matrix(np.diag([1.0, 2.0]))
    pattern = sp.csr_matrix((np.ones(1), np.array([0]), np.array([0, 1, 1])), shape=(2, 2))
    with pytest.raises(ValueError, match="column 1"):
        spai_minimize(a, pattern)


def test_spai_minimize_rank_deficient_errors():
    # stored zeros make the local system rank zero for column 1
    a = sp.csr_matrix((np.array([1.0, 0.0]), np.array([0, 1]), np.array([0, 1, 2])),
                      shape=(2, 2))
    pattern = extract_graph(sp.identity(2, format="csr"))
    with pytest.raises(ValueError, match="column 1"):
        spai_minimize(a, pattern)


def test_spai_minimize_pivoted_fallback_solves_singular_local():
    # singular but rank-1 local problems take the pivoted-QR fallback
    a = sp.csr_matrix(np.array([[1.0, 0.0], [0.0, 0.0]]))
    res = spai_minimize(a, full_pattern(2))
    assert res.approx_inverse[0, 0] == 1.0
    assert np.isfinite(res.approx_inverse.toarray()).all()


# --- postfilter ------------------------------------------------------------

def test_postfilter_examples():
    d = sp.csr_matrix(np.diag([1.0, 2.0]))
    out = postfilter(d, 0.5)
    assert np.array_equal(out.toarray(), d.toarray())

    a = sp.csr_matrix(np.array([[1.0, 1e-9], [1e-9, 1.0]]))
    out = postfilter(a, 1e-8)
    assert out.nnz == 2 and np.array_equal(out.toarray(), np.eye(2))

    rng = np.random.default_rng(4)
    b = sp.random(10, 10, density=0.4, random_state=rng, format="csr")
    out = postfilter(b, 0.0)
    assert out.nnz == b.nnz  # nothing strictly below zero


# --- build_spai ------------------------------------------------------------

def test_build_spai_identity():
    res = build_spai(sp.identity(5, format="csr").tocsr(), SpaiConfig())
    assert np.array_equal(res.approx_inverse.toarray(), np.eye(5))


def test_build_spai_huge_sigma_collapses_to_diagonal():
    rng = np.random.default_rng(5)
    a = sp.csr_matrix(np.diag(rng.uniform(1, 2, size=6)))
    a = (a + sp.random(6, 6, density=0.2, random_state=rng)).tocsr()
    sigma = 1e3 * np.abs(a.toarray()).max()
    res = build_spai(a, SpaiConfig(sigma=sigma, ell=1))
    out = res.approx_inverse.toarray()
    assert np.count_nonzero(out - np.diag(np.diag(out))) == 0

    d = sp.csr_matrix(np.diag([2.0, 5.0]))
    res = build_spai(d, SpaiConfig(sigma=1e3 * 5.0, ell=1))
    assert np.allclose(res.approx_inverse.toarray(), np.diag([0.5, 0.2]))


def test_build_spai_block_diagonal_exact():
    rng = np.random.default_rng(6)
    a = random_block_diagonal(rng, 10, 12)
    res = build_spai(a, SpaiConfig(sigma=1e-8, ell=2))
    inv = np.linalg.inv(a.toarray())
    rel = np.linalg.norm(res.approx_inverse.toarray() - inv) / np.linalg.norm(inv)
    assert rel <= 1e-10


def test_build_spai_prefilter_disabled_uses_raw_graph():
    rng = np.random.default_rng(7)
    a = random_block_diagonal(rng, 3, 4)
    res = build_spai(a, SpaiConfig(sigma=10.0, ell=1, enable_prefilter=False,
                                   enable_postfilter=False))
    assert res.filtered_graph_nnz == a.nnz


def test_build_spai_residual_monotone_in_ell():
    rng = np.random.default_rng(8)
    n = 40
    a = (sp.random(n, n, density=0.1, random_state=rng) + sp.diags(rng.uniform(2, 3, n))).tocsr()
    prev = np.inf
    for ell in (1, 2, 3):
        res = build_spai(a, SpaiConfig(sigma=1e-12, ell=ell, enable_postfilter=False))
        assert res.residual_fro <= prev + 1e-12
        prev = res.residual_fro


def test_build_spai_full_pattern_matches_dense_inverse():
    rng = np.random.default_rng(9)
    n = 60
    a = sp.csr_matrix(rng.standard_normal((n, n)) + n * np.eye(n))
    res = spai_minimize(a, full_pattern(n))
    inv = np.linalg.inv(a.toarray())
    assert np.linalg.norm(res.approx_inverse.toarray() - inv) / np.linalg.norm(inv) <= 1e-10


def test_build_spai_pattern_cap():
    rng = np.random.default_rng(10)
    a = random_block_diagonal(rng, 2, 6)
    res = build_spai(a, SpaiConfig(sigma=1e-12, ell=2, max_pattern_nnz_per_column=3,
                                   enable_postfilter=False))
    counts = np.diff(res.approx_inverse.tocsc().indptr)
    assert counts.max() <= 3
    assert np.all(res.approx_inverse.diagonal() != 0.0)


def test_spai_stats_record():
    res = build_spai(sp.identity(4, format="csr").tocsr(), SpaiConfig())
    rec = res.stats(sigma=1e-8, ell=2, rel_error_fro=0.0)
    assert set(rec) == {"sigma", "ell", "nnz_filtered", "nnz_pattern", "nnz_result",
                        "residual_fro", "rel_error_fro"}


# --- spai_smooth -----------------------------------------------------------

def test_smooth_exact_inverse_one_step():
    rng = np.random.default_rng(11)
    a_dense = rng.standard_normal((8, 8)) + 8 * np.eye(8)
    a = sp.csr_matrix(a_dense)
    ainv = sp.csr_matrix(np.linalg.inv(a_dense))
    b = rng.standard_normal(8)
    for x0 in (np.zeros(8), rng.standard_normal(8)):
        x = spai_smooth(a, ainv, b, x0, 1)
        assert np.abs(x - np.linalg.solve(a_dense, b)).max() <= 1e-12


def test_smooth_fixed_point():
    rng = np.random.default_rng(12)
    a = sp.csr_matrix(rng.standard_normal((5, 5)) + 5 * np.eye(5))
    x0 = rng.standard_normal(5)
    b = a @ x0
    for m in (1, 3):
        x = spai_smooth(a, sp.csr_matrix(np.eye(5)), b, x0, m)
        assert np.abs(x - x0).max() <= 1e-13


def test_smooth_hand_recurrence():
    # x1 = 0.25, x2 = 0.25 + 0.25*(1 - 2*0.25) = 0.375
    a = sp.csr_matrix(np.array([[2.0]]))
    ainv = sp.csr_matrix(np.array([[0.25]]))
    x = spai_smooth(a, ainv, np.array([1.0]), np.array([0.0]), 2)
    assert x[0] == pytest.approx(0.375, abs=1e-15)


def test_smooth_literal_literal_fixed_residual_mode():
    # the fixed-residual variant holds r fixed: x_m = m * ainv * b from x0 = 0
    a = sp.csr_matrix(np.array([[2.0]]))
    ainv = sp.csr_matrix(np.array([[0.25]]))
    x = spai_smooth(a, ainv, np.array([1.0]), np.array([0.0]), 3, literal_fixed_residual=True)
    assert x[0] == pytest.approx(0.75, abs=1e-15)
