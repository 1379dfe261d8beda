import numpy as np
import pytest
import scipy.sparse as sp

from mdprec.amg import (AmgConfig, AmgHierarchy, _Level, aggregate, build_hierarchy,
                        galerkin, smooth_prolongator, strength_graph,
                        tentative_prolongator, vcycle)
from mdprec.sparse import extract_graph, transpose


def path_graph(n):
    a = sp.diags([np.ones(n - 1), 2 * np.ones(n), np.ones(n - 1)], [-1, 0, 1], format="csr")
    return strength_graph(a, 0.0)


def lap1d(n):
    return sp.diags([-np.ones(n - 1), 2 * np.ones(n), -np.ones(n - 1)], [-1, 0, 1], format="csr")


def lap3d(m):
    eye = sp.identity(m)
    l = sp.diags([-np.ones(m - 1), 2 * np.ones(m), -np.ones(m - 1)], [-1, 0, 1])
    return (sp.kron(sp.kron(l, eye), eye) + sp.kron(sp.kron(eye, l), eye)
            + sp.kron(sp.kron(eye, eye), l)).tocsr()


def aggregation_oracle(g):
    """Independent greedy oracle: phase-1 roots in natural order, then
    attach leftovers to the aggregate of their smallest assigned neighbor."""
    n = g.shape[0]
    agg = -np.ones(n, dtype=int)
    count = 0
    neigh = [g.indices[g.indptr[i]:g.indptr[i + 1]] for i in range(n)]
    for i in range(n):
        if agg[i] == -1 and all(agg[j] == -1 for j in neigh[i]):
            for j in neigh[i]:
                agg[j] = count
            agg[i] = count
            count += 1
    for i in range(n):
        if agg[i] == -1:
            assigned = [j for j in neigh[i] if agg[j] != -1]
            if assigned:
                agg[i] = agg[min(assigned)]
            else:
                agg[i] = count
                count += 1
    return agg


def test_aggregate_disconnected_singletons():
    g = strength_graph(sp.identity(5, format="csr").tocsr(), 0.0)
    assert np.array_equal(aggregate(g), np.arange(5))


def test_aggregate_complete_graph_single():
    g = strength_graph(sp.csr_matrix(np.ones((5, 5))), 0.0)
    assert np.array_equal(aggregate(g), np.zeros(5, dtype=int))


def test_aggregate_path9_matches_oracle():
    g = path_graph(9)
    agg = aggregate(g)
    oracle = aggregation_oracle(g)
    assert np.array_equal(agg, oracle)
    # frozen from the oracle: {0,1}, {2,3,4}, {5,6,7} with 8 attached to 7's
    assert np.array_equal(agg, [0, 0, 1, 1, 1, 2, 2, 2, 2])
    assert agg.max() + 1 == 3


def test_aggregate_matches_oracle_random():
    rng = np.random.default_rng(0)
    for _ in range(20):
        n = int(rng.integers(5, 60))
        dense = (rng.random((n, n)) < 2.5 / n)
        dense = dense | dense.T | np.eye(n, dtype=bool)
        g = extract_graph(sp.csr_matrix(dense.astype(float)))
        agg = aggregate(g)
        assert np.array_equal(agg, aggregation_oracle(g))
        assert agg.min() >= 0  # every node assigned
        assert len(np.unique(agg)) == agg.max() + 1  # no empty aggregates


def test_aggregate_connectivity():
    rng = np.random.default_rng(1)
    n = 40
    dense = (rng.random((n, n)) < 3.0 / n)
    dense = dense | dense.T | np.eye(n, dtype=bool)
    g = extract_graph(sp.csr_matrix(dense.astype(float)))
    agg = aggregate(g)
    for a in range(agg.max() + 1):
        members = set(np.flatnonzero(agg == a))
        # BFS within the aggregate from one member must reach all members
        start = next(iter(members))
        seen = {start}
        queue = [start]
        while queue:
            i = queue.pop()
            for j in g.indices[g.indptr[i]:g.indptr[i + 1]]:
                if j in members and j not in seen:
                    seen.add(j)
                    queue.append(j)
        assert seen == members


def test_tentative_constant_nullspace():
    agg = np.array([0, 0, 0, 1, 1, 1])
    p, coarse = tentative_prolongator(agg, np.ones((6, 1)))
    assert np.allclose(p.toarray()[:3, 0], 1 / np.sqrt(3))
    assert np.allclose(p.toarray()[3:, 1], 1 / np.sqrt(3))
    assert np.allclose(p @ coarse, np.ones((6, 1)))


def test_tentative_singleton_permutation():
    agg = np.array([1, 0, 2])
    p, _ = tentative_prolongator(agg, np.ones((3, 1)))
    assert np.array_equal(np.abs(p.toarray()) > 0, np.eye(3)[:, [1, 0, 2]] > 0)
    assert np.allclose(np.abs(p.data), 1.0)


def test_tentative_orthonormal_columns():
    rng = np.random.default_rng(2)
    agg = rng.integers(0, 5, size=30)
    agg[:5] = np.arange(5)
    ns = rng.standard_normal((30, 2))
    p, coarse = tentative_prolongator(agg, ns)
    gram = (p.T @ p).toarray()
    assert np.abs(gram - np.eye(10)).max() <= 1e-14
    assert np.abs(p @ coarse - ns).max() <= 1e-12


def test_tentative_rank_deficiency_error():
    agg = np.array([0, 0])
    ns = np.array([[1.0, 1.0], [1.0, 1.0]])  # linearly dependent columns
    with pytest.raises(ValueError, match="aggregate 0"):
        tentative_prolongator(agg, ns)


def test_smooth_prolongator_omega_zero_bitwise():
    agg = np.array([0, 0, 1, 1])
    p, _ = tentative_prolongator(agg, np.ones((4, 1)))
    a = lap1d(4)
    out = smooth_prolongator(a, p, 0.0)
    assert np.array_equal(out.data, p.data)
    assert np.array_equal(out.indices, p.indices)


def test_smooth_prolongator_identity_matrix():
    agg = np.array([0, 0, 1, 1])
    p, _ = tentative_prolongator(agg, np.ones((4, 1)))
    omega = 4.0 / 3.0
    out = smooth_prolongator(sp.identity(4, format="csr").tocsr(), p, omega)
    assert np.abs(out.toarray() - (1 - omega) * p.toarray()).max() <= 1e-12


def test_smooth_prolongator_pattern_containment():
    rng = np.random.default_rng(3)
    a = lap3d(5)
    agg = aggregate(strength_graph(a, 0.0))
    p, _ = tentative_prolongator(agg, np.ones((a.shape[0], 1)))
    out = smooth_prolongator(a, p, 4.0 / 3.0)
    allowed = ((extract_graph(a) @ extract_graph(p)) + extract_graph(p)).toarray() > 0
    assert np.all((out.toarray() != 0) <= allowed)


def test_smooth_prolongator_zero_diagonal_errors():
    a = sp.csr_matrix(np.array([[0.0, 1.0], [1.0, 0.0]]))
    p = sp.csr_matrix(np.ones((2, 1)))
    with pytest.raises(ValueError, match="diagonal"):
        smooth_prolongator(a, p, 1.0)


def test_galerkin_identity_and_nullspace():
    a = lap1d(6)
    eye = sp.identity(6, format="csr")
    assert np.abs((galerkin(a, eye) - a).toarray()).max() == 0.0
    ones = sp.csr_matrix(np.ones((6, 1)))
    neumann = a.copy().tolil()
    neumann[0, 0] = 1.0
    neumann[5, 5] = 1.0
    coarse = galerkin(sp.csr_matrix(neumann), ones)
    assert abs(coarse.toarray()[0, 0]) <= 1e-14


def test_galerkin_dense_oracle():
    for seed in range(50):
        rng = np.random.default_rng(seed)
        a = sp.random(30, 30, density=0.3, random_state=rng, format="csr")
        p = sp.random(30, 5, density=0.4, random_state=rng, format="csr")
        got = galerkin(a, p).toarray()
        ref = p.toarray().T @ a.toarray() @ p.toarray()
        assert np.abs(got - ref).max() <= 1e-12 * max(1.0, np.abs(ref).max())


def test_galerkin_symmetry_preserved():
    a = lap3d(6)
    for kind in ("plain", "smoothed"):
        cfg = AmgConfig(max_coarse_size=20, transfer_kind=kind, smoother_kind="jacobi")
        h = build_hierarchy(a, cfg)
        for lvl in h.levels[1:]:
            asym = (lvl.a - transpose(lvl.a)).toarray()
            assert np.abs(asym).max() <= 1e-12 * np.abs(lvl.a.toarray()).max()


def test_build_hierarchy_small_input_single_level():
    a = lap1d(8)
    h = build_hierarchy(a, AmgConfig(max_coarse_size=10, smoother_kind="jacobi"))
    assert h.n_levels == 1
    x = vcycle(h, np.ones(8), np.zeros(8))
    assert np.abs(a @ x - 1.0).max() <= 1e-12


def test_build_hierarchy_3d_decreasing_sizes():
    a = lap3d(16)
    h = build_hierarchy(a, AmgConfig(max_coarse_size=500, smoother_kind="jacobi"))
    sizes = h.level_sizes()
    assert h.n_levels >= 2
    assert all(sizes[i] > sizes[i + 1] for i in range(len(sizes) - 1))
    assert sizes[-1] <= 500 or h.stagnated


def test_build_hierarchy_r_equals_p_transpose_bitwise():
    a = lap3d(8)
    h = build_hierarchy(a, AmgConfig(max_coarse_size=20, smoother_kind="jacobi"))
    for lvl in h.levels[:-1]:
        rt = transpose(lvl.p)
        assert np.array_equal(lvl.r.data, rt.data)
        assert np.array_equal(lvl.r.indices, rt.indices)
        assert np.array_equal(lvl.r.indptr, rt.indptr)


def test_build_hierarchy_constants_reproduced_plain():
    a = lap3d(8)
    cfg = AmgConfig(max_coarse_size=20, transfer_kind="plain", smoother_kind="jacobi",
                    nullspace_dim=1)
    h = build_hierarchy(a, cfg)
    assert h.n_levels >= 2
    vec = h.levels[-1].nullspace[:, 0]
    for lvl in reversed(h.levels[:-1]):
        vec = lvl.p @ vec
    assert np.abs(vec - 1.0).max() <= 1e-12


def test_vcycle_two_level_identity_prolongator_exact():
    a = lap1d(12)
    cfg = AmgConfig(max_coarse_size=1, max_levels=2, smoother_kind="jacobi")
    fine = _Level(a, cfg)
    fine.p = sp.identity(12, format="csr").tocsr()
    fine.r = fine.p.copy()
    fine.prepare_smoother(cfg)
    coarse = _Level(a, cfg)
    import scipy.linalg
    h = AmgHierarchy(levels=[fine, coarse], coarse_lu=scipy.linalg.lu_factor(a.toarray()),
                     config=cfg)
    b = np.arange(1.0, 13.0)
    x = vcycle(h, b, np.zeros(12))
    assert np.abs(a @ x - b).max() <= 1e-11


def test_vcycle_zero_residual_fixed_point():
    a = lap3d(6)
    h = build_hierarchy(a, AmgConfig(max_coarse_size=30, smoother_kind="gauss_seidel"))
    rng = np.random.default_rng(4)
    x0 = rng.standard_normal(a.shape[0])
    b = a @ x0
    x = vcycle(h, b, x0)
    assert np.abs(x - x0).max() <= 1e-13 * max(1.0, np.abs(x0).max())


def test_vcycle_contraction_1d():
    a = lap1d(64)
    h = build_hierarchy(a, AmgConfig(max_coarse_size=8, transfer_kind="smoothed",
                                     smoother_kind="ilut"))
    rng = np.random.default_rng(5)
    e = rng.standard_normal(64)
    e1 = vcycle(h, np.zeros(64), e)
    assert np.linalg.norm(e1) / np.linalg.norm(e) <= 0.2


def test_vcycle_linearity():
    a = lap3d(6)
    h = build_hierarchy(a, AmgConfig(max_coarse_size=30, smoother_kind="ilut"))
    rng = np.random.default_rng(6)
    n = a.shape[0]
    x1, x2 = rng.standard_normal(n), rng.standard_normal(n)
    al, be = 1.7, -0.4
    lhs = vcycle(h, np.zeros(n), al * x1 + be * x2)
    rhs = al * vcycle(h, np.zeros(n), x1) + be * vcycle(h, np.zeros(n), x2)
    assert np.abs(lhs - rhs).max() <= 1e-12 * max(1.0, np.abs(lhs).max())


def test_hierarchy_summary_schema():
    a = lap3d(8)
    h = build_hierarchy(a, AmgConfig(max_coarse_size=30, smoother_kind="jacobi"))
    doc = h.summary()
    assert set(doc) == {"levels", "operator_complexity", "stagnated"}
    assert all(set(lvl) == {"rows", "nnz", "operator_complexity_contribution"}
               for lvl in doc["levels"])
    assert doc["operator_complexity"] >= 1.0


def test_vector_problem_hierarchy():
    a = sp.kron(lap1d(30), sp.identity(3)).tocsr()
    cfg = AmgConfig(max_coarse_size=9, nullspace_dim=3, smoother_kind="gauss_seidel")
    h = build_hierarchy(a, cfg)
    assert h.n_levels >= 2
    rng = np.random.default_rng(8)
    b = rng.standard_normal(90)
    x = np.zeros(90)
    import scipy.sparse.linalg as spla
    ref = spla.spsolve(a.tocsc(), b)
    for _ in range(30):
        x = vcycle(h, b, x)
    assert np.linalg.norm(x - ref) <= 1e-8 * np.linalg.norm(ref)
