"""Sparse matrix kernels and the 2x2 block system container.

All matrices in this package are ``scipy.sparse.csr_matrix`` with float64
values and canonical structure: nondecreasing row offsets, strictly
increasing column indices within each row, no duplicate entries. Stored
explicit zeros are legal and deliberately retained where possible -- they
carry pattern information used by the approximate-inverse filters.

Sparsity graphs (patterns) are represented as CSR matrices whose data is
all ones; see :func:`extract_graph`.
"""

import numpy as np
import scipy.sparse as sp


def validate_csr(m, name="matrix"):
    """Check CSR structural invariants, raising ValueError on violation.

    Verifies: offsets nondecreasing and consistent with the index/value
    array lengths, column indices strictly increasing within each row,
    all indices inside [0, n_cols).
    """
    if not sp.issparse(m) or m.format != "csr":
        raise ValueError(f"{name}: expected a CSR matrix, got {type(m)}")
    n_rows, n_cols = m.shape
    indptr, indices = m.indptr, m.indices
    if len(indptr) != n_rows + 1 or indptr[0] != 0 or indptr[-1] != len(indices):
        raise ValueError(f"{name}: malformed row offsets")
    if np.any(np.diff(indptr) < 0):
        raise ValueError(f"{name}: row offsets must be nondecreasing")
    if len(indices) != len(m.data):
        raise ValueError(f"{name}: index/value length mismatch")
    if len(indices) and (indices.min() < 0 or indices.max() >= n_cols):
        raise ValueError(f"{name}: column index out of range")
    # strictly increasing columns inside each row (also rules out duplicates)
    interior = np.diff(indices) <= 0
    row_starts = indptr[1:-1] - 1  # positions where a new row begins
    interior[row_starts[(row_starts >= 0) & (row_starts < len(interior))]] = False
    if np.any(interior):
        raise ValueError(f"{name}: column indices not strictly increasing within a row")
    return m


def as_canonical_csr(m):
    """Convert to CSR with sorted indices and summed duplicates.

    Explicit zeros already stored in the input are kept.
    """
    m = sp.csr_matrix(m, dtype=np.float64)
    m.sum_duplicates()
    m.sort_indices()
    return m


def spmv(m, x):
    """Sparse matrix-vector product y = M x."""
    x = np.asarray(x, dtype=np.float64)
    if m.shape[1] != x.shape[0]:
        raise ValueError(f"spmv: dimension mismatch {m.shape} @ {x.shape}")
    return m @ x


def spgemm(a, b):
    """Sparse matrix-matrix product C = A B with sorted, deduplicated rows.

    Entries whose value cancels to zero during accumulation may be dropped
    by the underlying kernel.
    """
    if a.shape[1] != b.shape[0]:
        raise ValueError(f"spgemm: dimension mismatch {a.shape} @ {b.shape}")
    c = (a @ b).tocsr()
    c.sort_indices()
    return c


def transpose(m):
    """Exact transpose, returned in canonical CSR form."""
    t = m.T.tocsr()
    t.sort_indices()
    return t


def add_scaled(a, alpha, b):
    """A + alpha*B on the union pattern, cancelled entries kept as stored zeros.

    scipy's sparse addition prunes entries that cancel; this kernel keeps
    the full pattern union so downstream pattern-based filters see
    deterministic graphs.
    """
    if a.shape != b.shape:
        raise ValueError(f"add_scaled: shape mismatch {a.shape} vs {b.shape}")
    n_rows, n_cols = a.shape
    # union pattern via indicator sum (1+1=2 never cancels)
    pa = sp.csr_matrix((np.ones(a.nnz), a.indices.copy(), a.indptr.copy()), shape=a.shape)
    pb = sp.csr_matrix((np.ones(b.nnz), b.indices.copy(), b.indptr.copy()), shape=b.shape)
    u = (pa + pb).tocsr()
    u.sort_indices()
    vals = np.zeros(u.nnz)
    ukeys = _flat_keys(u, n_cols)
    for m, scale in ((a, 1.0), (b, float(alpha))):
        if m.nnz:
            pos = np.searchsorted(ukeys, _flat_keys(m, n_cols))
            np.add.at(vals, pos, scale * m.data)
    out = sp.csr_matrix((vals, u.indices, u.indptr), shape=a.shape)
    return out


def _flat_keys(m, n_cols):
    rows = np.repeat(np.arange(m.shape[0], dtype=np.int64), np.diff(m.indptr))
    return rows * np.int64(n_cols) + m.indices.astype(np.int64)


def matrix_norms(m):
    """Frobenius, 1- and infinity-norms of a sparse matrix.

    Stored zeros contribute nothing; returns a dict with keys
    ``frobenius``, ``one_norm``, ``inf_norm``.
    """
    if m.nnz == 0:
        return {"frobenius": 0.0, "one_norm": 0.0, "inf_norm": 0.0}
    d = np.abs(m.data)
    fro = float(np.sqrt(np.sum(m.data * m.data)))
    col_sums = np.zeros(m.shape[1])
    np.add.at(col_sums, m.indices, d)
    rows = np.repeat(np.arange(m.shape[0]), np.diff(m.indptr))
    row_sums = np.zeros(m.shape[0])
    np.add.at(row_sums, rows, d)
    return {
        "frobenius": fro,
        "one_norm": float(col_sums.max(initial=0.0)),
        "inf_norm": float(row_sums.max(initial=0.0)),
    }


def extract_graph(m):
    """Boolean sparsity pattern of stored entries (stored zeros included).

    Returned as a CSR matrix with unit data, the package-wide graph
    representation.
    """
    g = sp.csr_matrix(
        (np.ones(m.nnz), m.indices.copy(), m.indptr.copy()), shape=m.shape
    )
    return g


def graph_union(g1, g2):
    """Union of two patterns, data reset to ones."""
    u = (g1 + g2).tocsr()
    u.sort_indices()
    u.data[:] = 1.0
    return u


def identity_graph(n):
    return sp.identity(n, format="csr")


class BlockSystem:
    """2x2 block system [[A, B1t], [B2, C]] with block right-hand sides.

    ``a`` is the fiber (beam) block, block-diagonal per fiber with
    boundaries ``beam_block_boundaries`` (offsets into 0..M, first 0,
    last M). ``c`` is the bulk (solid) block.
    """

    def __init__(self, a, b1t, b2, c, rhs_beam, rhs_solid, beam_block_boundaries):
        self.a = as_canonical_csr(a)
        self.b1t = as_canonical_csr(b1t)
        self.b2 = as_canonical_csr(b2)
        self.c = as_canonical_csr(c)
        self.rhs_beam = np.asarray(rhs_beam, dtype=np.float64)
        self.rhs_solid = np.asarray(rhs_solid, dtype=np.float64)
        self.beam_block_boundaries = np.asarray(beam_block_boundaries, dtype=np.int64)
        self.validate()

    @property
    def n_beam(self):
        return self.a.shape[0]

    @property
    def n_solid(self):
        return self.c.shape[0]

    def validate(self):
        m, n = self.n_beam, self.n_solid
        if self.a.shape != (m, m):
            raise ValueError("beam block must be square")
        if self.c.shape != (n, n):
            raise ValueError("solid block must be square")
        if self.b1t.shape != (m, n) or self.b2.shape != (n, m):
            raise ValueError(
                f"coupling block shapes inconsistent: b1t {self.b1t.shape}, b2 {self.b2.shape}"
            )
        if self.rhs_beam.shape != (m,) or self.rhs_solid.shape != (n,):
            raise ValueError("right-hand side lengths inconsistent with blocks")
        for name, mat in (("a", self.a), ("b1t", self.b1t), ("b2", self.b2), ("c", self.c)):
            validate_csr(mat, name)
        b = self.beam_block_boundaries
        if len(b) < 1 or b[0] != 0 or b[-1] != m or np.any(np.diff(b) <= 0):
            raise ValueError("beam_block_boundaries must be strictly increasing from 0 to M")
        self._check_block_diagonal()

    def _check_block_diagonal(self):
        """Beam block must have no entries outside its per-fiber blocks."""
        b = self.beam_block_boundaries
        block_of = np.searchsorted(b, np.arange(self.n_beam), side="right") - 1
        rows = np.repeat(np.arange(self.n_beam), np.diff(self.a.indptr))
        bad = block_of[rows] != block_of[self.a.indices]
        if np.any(bad):
            k = int(np.argmax(bad))
            raise ValueError(
                f"beam block entry ({rows[k]}, {self.a.indices[k]}) crosses a fiber block boundary"
            )

    def apply(self, x_beam, x_solid):
        """Block operator product: (A x_b + B1t x_s, B2 x_b + C x_s)."""
        if len(x_beam) != self.n_beam or len(x_solid) != self.n_solid:
            raise ValueError("block operator: partition sizes do not match")
        y_beam = self.a @ x_beam + self.b1t @ x_solid
        y_solid = self.b2 @ x_beam + self.c @ x_solid
        return y_beam, y_solid

    def residual(self, x_beam, x_solid):
        y_beam, y_solid = self.apply(x_beam, x_solid)
        return self.rhs_beam - y_beam, self.rhs_solid - y_solid

    def monolithic(self):
        """Assemble the full system matrix [[A, B1t], [B2, C]] as one CSR."""
        m = sp.bmat([[self.a, self.b1t], [self.b2, self.c]], format="csr")
        m.sort_indices()
        return m

    def monolithic_rhs(self):
        return np.concatenate([self.rhs_beam, self.rhs_solid])

    def split(self, x):
        return x[: self.n_beam], x[self.n_beam:]


def block_operator_apply(system, x_beam, x_solid):
    """Functional alias for :meth:`BlockSystem.apply`."""
    return system.apply(x_beam, x_solid)
