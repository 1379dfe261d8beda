"""Aggregation-based algebraic multigrid for the Schur complement block.

Coarse spaces come from greedy root aggregation of the (symmetrized,
strength-filtered) matrix graph. The tentative prolongator carries the
near-nullspace exactly via per-aggregate QR; transfers are either plain
(piecewise constant basis) or smoothed with one damped Jacobi step
applied to the tentative operator. Coarse operators are Galerkin
products, level smoothers are damped Jacobi, Gauss-Seidel, or ILUT, and
the coarsest level is solved with a dense LU factorization.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg

from .ilut import ilut_factor, gauss_seidel_sweep
from .sparse import transpose


@dataclass
class AmgConfig:
    transfer_kind: str = "smoothed"  # "plain" | "smoothed"
    prolongator_damping: float = 4.0 / 3.0
    max_coarse_size: int = 1000
    max_levels: int = 10
    smoother_kind: str = "ilut"  # "jacobi" | "gauss_seidel" | "ilut"
    smoother_sweeps: int = 1
    jacobi_damping: float = 2.0 / 3.0
    ilut_fill: float = 1.0
    ilut_drop: float = 1e-4
    nullspace_dim: int = 1
    strength_theta: float = 0.0
    # recorded for report parity only; inter-process overlap is a no-op here
    smoother_overlap: int = 1

    def __post_init__(self):
        if self.max_coarse_size < 1:
            raise ValueError("max_coarse_size must be >= 1")
        if self.max_levels < 2:
            raise ValueError("max_levels must be >= 2")
        if self.ilut_fill < 0 or self.ilut_drop < 0:
            raise ValueError("ilut fill/drop must be >= 0")
        if not (0.0 < self.prolongator_damping <= 2.0):
            raise ValueError("prolongator damping must be in (0, 2]")
        if self.transfer_kind not in ("plain", "smoothed"):
            raise ValueError(f"unknown transfer kind {self.transfer_kind!r}")
        if self.smoother_kind not in ("jacobi", "gauss_seidel", "ilut"):
            raise ValueError(f"unknown smoother kind {self.smoother_kind!r}")


def strength_graph(a, theta=0.0):
    """Symmetrized pattern of entries with |a_ij| > theta*sqrt(|a_ii a_jj|)."""
    d = np.abs(a.diagonal())
    rows = np.repeat(np.arange(a.shape[0]), np.diff(a.indptr))
    thresh = theta * np.sqrt(d[rows] * d[a.indices])
    keep = np.abs(a.data) > thresh
    g = sp.csr_matrix(
        (np.ones(int(keep.sum())),
         a.indices[keep],
         np.concatenate([[0], np.cumsum(np.bincount(rows[keep], minlength=a.shape[0]))])),
        shape=a.shape,
    )
    g = (g + g.T).tocsr()
    g.sort_indices()
    g.data[:] = 1.0
    return g


def aggregate(g):
    """Greedy root aggregation of a symmetric pattern.

    Phase 1 sweeps nodes in natural order; a node whose closed
    neighborhood is entirely unaggregated becomes a root and absorbs it.
    Leftovers attach to the aggregate of their smallest-id aggregated
    neighbor; isolated leftovers become singletons. Returns an
    aggregate-id vector with ids in 0..n_agg-1.
    """
    n = g.shape[0]
    indptr, indices = g.indptr, g.indices
    agg = np.full(n, -1, dtype=np.int64)
    n_agg = 0
    for i in range(n):
        if agg[i] != -1:
            continue
        nbrs = indices[indptr[i]:indptr[i + 1]]
        if np.all(agg[nbrs] == -1):
            agg[nbrs] = n_agg
            agg[i] = n_agg
            n_agg += 1
    for i in range(n):
        if agg[i] != -1:
            continue
        nbrs = indices[indptr[i]:indptr[i + 1]]
        assigned = nbrs[agg[nbrs] != -1]
        if len(assigned):
            agg[i] = agg[assigned.min()]
        else:
            agg[i] = n_agg
            n_agg += 1
    return agg


def tentative_prolongator(agg, nullspace):
    """Aggregate-local QR of the near-nullspace.

    Returns (P, coarse_nullspace) where P has orthonormal columns per
    aggregate (k columns per aggregate for a rank-k nullspace) and the
    stacked local R factors form the coarse near-nullspace.
    """
    nullspace = np.atleast_2d(np.asarray(nullspace, dtype=np.float64))
    if nullspace.shape[0] == 1 and nullspace.shape[1] == len(agg):
        nullspace = nullspace.T
    n, k = nullspace.shape
    n_agg = int(agg.max()) + 1 if len(agg) else 0
    order = np.argsort(agg, kind="stable")
    bounds = np.concatenate([[0], np.cumsum(np.bincount(agg, minlength=n_agg))])
    rows_out = []
    cols_out = []
    vals_out = []
    coarse_ns = np.zeros((n_agg * k, k))
    for a in range(n_agg):
        members = order[bounds[a]:bounds[a + 1]]
        local = nullspace[members, :]
        q, r = np.linalg.qr(local)
        flip = np.where(np.diag(r) < 0, -1.0, 1.0)  # positive R diagonal
        q = q * flip
        r = r * flip[:, None]
        rd = np.abs(np.diag(r))
        if len(rd) < k or rd.min() <= k * np.finfo(float).eps * max(rd.max(), 1.0):
            raise ValueError(f"rank-deficient nullspace inside aggregate {a}")
        rows_out.append(np.repeat(members, k))
        cols_out.append(np.tile(np.arange(a * k, a * k + k), len(members)))
        vals_out.append(q.ravel())
        coarse_ns[a * k:(a + 1) * k, :] = r
    p = sp.csr_matrix(
        (np.concatenate(vals_out), (np.concatenate(rows_out), np.concatenate(cols_out))),
        shape=(n, n_agg * k),
    )
    p.sort_indices()
    return p, coarse_ns


def estimate_spectral_radius(op_matvec, n, iters=20, seed=0):
    """Power-iteration estimate of the dominant eigenvalue magnitude."""
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(n)
    v /= np.linalg.norm(v)
    lam = 1.0
    for _ in range(iters):
        w = op_matvec(v)
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0
        lam = nw
        v = w / nw
    return float(lam)


def smooth_prolongator(a, p_tent, omega):
    """One damped Jacobi step on the tentative prolongator.

    P = (I - (omega/lambda_hat) D^{-1} A) P_tent with lambda_hat a
    power-iteration estimate of rho(D^{-1} A).
    """
    d = a.diagonal()
    if np.any(d == 0.0):
        raise ValueError("smooth_prolongator: zero diagonal entry in A")
    if omega == 0.0:
        return p_tent.copy()
    dinv = 1.0 / d
    dinv_a = sp.diags(dinv) @ a
    lam = estimate_spectral_radius(lambda v: dinv_a @ v, a.shape[0])
    if lam == 0.0:
        lam = 1.0
    p = p_tent - (omega / lam) * (dinv_a @ p_tent)
    p = p.tocsr()
    p.sort_indices()
    return p


def galerkin(a, p):
    """Coarse operator P^T A P."""
    if a.shape[1] != p.shape[0]:
        raise ValueError("galerkin: dimension mismatch")
    ac = (transpose(p) @ (a @ p)).tocsr()
    ac.sort_indices()
    return ac


class _Level:
    __slots__ = ("a", "p", "r", "smoother_kind", "ilut", "dinv", "sweeps",
                 "jacobi_damping", "nullspace")

    def __init__(self, a, cfg):
        self.a = a
        self.p = None
        self.r = None
        self.smoother_kind = cfg.smoother_kind
        self.sweeps = cfg.smoother_sweeps
        self.jacobi_damping = cfg.jacobi_damping
        self.ilut = None
        self.dinv = None
        self.nullspace = None

    def prepare_smoother(self, cfg):
        if self.smoother_kind == "ilut":
            self.ilut = ilut_factor(self.a, cfg.ilut_fill, cfg.ilut_drop)
        else:
            d = self.a.diagonal()
            if np.any(d == 0.0):
                raise ValueError("level smoother: zero diagonal")
            self.dinv = 1.0 / d

    def smooth(self, x, b):
        a = self.a
        for _ in range(self.sweeps):
            if self.smoother_kind == "jacobi":
                x = x + self.jacobi_damping * (self.dinv * (b - a @ x))
            elif self.smoother_kind == "gauss_seidel":
                gauss_seidel_sweep(a.indptr, a.indices, a.data, x, b, True)
            else:
                x = x + self.ilut.solve(b - a @ x)
        return x


_DENSE_COARSE_LIMIT = 8000


@dataclass
class AmgHierarchy:
    levels: list = field(default_factory=list)
    coarse_lu: tuple | None = None
    coarse_splu: object = None
    config: AmgConfig | None = None
    stagnated: bool = False

    @property
    def n_levels(self):
        return len(self.levels)

    def level_sizes(self):
        return [lvl.a.shape[0] for lvl in self.levels]

    def operator_complexity(self):
        nnz0 = self.levels[0].a.nnz
        return float(sum(lvl.a.nnz for lvl in self.levels)) / float(nnz0) if nnz0 else 1.0

    def summary(self):
        """JSON-ready per-level summary with operator complexity."""
        nnz0 = max(self.levels[0].a.nnz, 1)
        return {
            "levels": [
                {
                    "rows": int(lvl.a.shape[0]),
                    "nnz": int(lvl.a.nnz),
                    "operator_complexity_contribution": lvl.a.nnz / nnz0,
                }
                for lvl in self.levels
            ],
            "operator_complexity": self.operator_complexity(),
            "stagnated": self.stagnated,
        }


def build_hierarchy(a, cfg, nullspace=None):
    """Coarsen repeatedly until the operator fits the coarse solver.

    aggregate -> tentative prolongator -> optional prolongator smoothing
    -> Galerkin product, until the level size drops to max_coarse_size or
    max_levels is reached; stagnating coarsening (no size reduction)
    stops early and is flagged on the hierarchy.
    """
    if a.shape[0] != a.shape[1]:
        raise ValueError("build_hierarchy expects a square matrix")
    a = a.tocsr()
    a.sort_indices()
    if nullspace is None:
        nullspace = default_nullspace(a.shape[0], cfg.nullspace_dim)
    h = AmgHierarchy(config=cfg)
    current = a
    ns = np.asarray(nullspace, dtype=np.float64)
    if ns.ndim == 1:
        ns = ns[:, None]
    while True:
        level = _Level(current, cfg)
        level.nullspace = ns
        h.levels.append(level)
        if current.shape[0] <= cfg.max_coarse_size or len(h.levels) >= cfg.max_levels:
            break
        g = strength_graph(current, cfg.strength_theta)
        # vector problems aggregate node-blocks so each aggregate carries
        # all interleaved components (keeps the local nullspace full rank)
        d = ns.shape[1]
        if d > 1 and current.shape[0] % d == 0:
            agg = np.repeat(aggregate(_condense_blocks(g, d)), d)
        else:
            agg = aggregate(g)
        n_agg = int(agg.max()) + 1
        if n_agg >= 0.95 * current.shape[0]:
            # (near-)stagnating coarsening: keep this level as the coarsest
            h.stagnated = True
            break
        p_tent, coarse_ns = tentative_prolongator(agg, ns)
        if cfg.transfer_kind == "smoothed":
            p = smooth_prolongator(current, p_tent, cfg.prolongator_damping)
        else:
            p = p_tent
        level.p = p
        level.r = transpose(p)
        current = galerkin(current, p)
        ns = coarse_ns
    for lvl in h.levels[:-1]:
        lvl.prepare_smoother(cfg)
    coarse_n = h.levels[-1].a.shape[0]
    if coarse_n <= max(cfg.max_coarse_size, _DENSE_COARSE_LIMIT):
        h.coarse_lu = scipy.linalg.lu_factor(h.levels[-1].a.toarray())
    else:
        # stagnated coarsening left an oversized level: factor it sparsely
        h.coarse_splu = sp.linalg.splu(h.levels[-1].a.tocsc())
    return h


def _condense_blocks(g, d):
    """Collapse a dof pattern with interleaved d-dof nodes to a node pattern."""
    n_nodes = g.shape[0] // d
    rows = np.repeat(np.arange(g.shape[0]), np.diff(g.indptr)) // d
    cols = g.indices // d
    node_g = sp.coo_matrix(
        (np.ones(len(rows)), (rows, cols)), shape=(n_nodes, n_nodes)
    ).tocsr()
    node_g.sum_duplicates()
    node_g.sort_indices()
    node_g.data[:] = 1.0
    return node_g


def default_nullspace(n, dim):
    """Constant vector per interleaved scalar component."""
    if n % dim != 0:
        raise ValueError(f"nullspace dim {dim} does not divide system size {n}")
    ns = np.zeros((n, dim))
    for c in range(dim):
        ns[c::dim, c] = 1.0
    return ns


def vcycle(h, b, x0):
    """One V(s,s) cycle through the hierarchy; returns the updated iterate."""
    b = np.asarray(b, dtype=np.float64)
    x0 = np.asarray(x0, dtype=np.float64)
    if len(b) != h.levels[0].a.shape[0] or len(x0) != len(b):
        raise ValueError("vcycle: size mismatch")
    return _vcycle_level(h, 0, b, x0.copy())


def _vcycle_level(h, li, b, x):
    if li == h.n_levels - 1:
        if h.coarse_lu is not None:
            return scipy.linalg.lu_solve(h.coarse_lu, b)
        return h.coarse_splu.solve(b)
    lvl = h.levels[li]
    x = lvl.smooth(x, b)
    r = b - lvl.a @ x
    xc = _vcycle_level(h, li + 1, lvl.r @ r, np.zeros(lvl.p.shape[1]))
    x = x + lvl.p @ xc
    x = lvl.smooth(x, b)
    return x
