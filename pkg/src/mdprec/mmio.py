"""Matrix Market coordinate I/O with bit-exact round trips.

Writes ``matrix coordinate real general`` files with 1-based indices and
entries sorted row-major. Values are printed with Python's shortest
round-trip decimal representation (``repr`` of a float), so
read(write(m)) reproduces the stored values bit for bit. An optional
hex-float mode writes ``float.hex()`` strings, which the reader also
accepts.
"""

import numpy as np
import scipy.sparse as sp

_HEADER = "%%MatrixMarket matrix coordinate real general"


def write_matrix(path, m, hex_floats=False):
    """Write a sparse matrix in Matrix Market coordinate format."""
    m = sp.csr_matrix(m, dtype=np.float64)
    m.sum_duplicates()
    m.sort_indices()
    rows = np.repeat(np.arange(m.shape[0]), np.diff(m.indptr))
    fmt = (lambda v: float(v).hex()) if hex_floats else (lambda v: repr(float(v)))
    with open(path, "w") as f:
        f.write(_HEADER + "\n")
        f.write(f"{m.shape[0]} {m.shape[1]} {m.nnz}\n")
        for i, j, v in zip(rows, m.indices, m.data):
            f.write(f"{i + 1} {j + 1} {fmt(v)}\n")


def read_matrix(path):
    """Read a Matrix Market coordinate file written by :func:`write_matrix`.

    Stored zeros are preserved; duplicate entries are rejected.
    """
    with open(path) as f:
        header = f.readline().strip()
        if not header.startswith("%%MatrixMarket"):
            raise ValueError(f"{path}: missing MatrixMarket banner")
        parts = header.split()
        if parts[1:4] != ["matrix", "coordinate", "real"] or parts[4] not in ("general",):
            raise ValueError(f"{path}: unsupported MatrixMarket type {header!r}")
        line = f.readline()
        while line.startswith("%"):
            line = f.readline()
        dims = line.split()
        if len(dims) != 3:
            raise ValueError(f"{path}: malformed size line {line!r}")
        n_rows, n_cols, nnz = (int(x) for x in dims)
        rows = np.empty(nnz, dtype=np.int64)
        cols = np.empty(nnz, dtype=np.int64)
        vals = np.empty(nnz, dtype=np.float64)
        k = 0
        for line in f:
            line = line.strip()
            if not line or line.startswith("%"):
                continue
            i, j, v = line.split()
            if k >= nnz:
                raise ValueError(f"{path}: more entries than declared ({nnz})")
            rows[k] = int(i) - 1
            cols[k] = int(j) - 1
            vals[k] = float.fromhex(v) if v.startswith(("0x", "-0x")) else float(v)
            k += 1
    if k != nnz:
        raise ValueError(f"{path}: expected {nnz} entries, found {k}")
    if nnz and (rows.min() < 0 or rows.max() >= n_rows or cols.min() < 0 or cols.max() >= n_cols):
        raise ValueError(f"{path}: index out of declared range")
    order = np.lexsort((cols, rows))
    rows, cols, vals = rows[order], cols[order], vals[order]
    if nnz > 1 and np.any((np.diff(rows) == 0) & (np.diff(cols) == 0)):
        raise ValueError(f"{path}: duplicate coordinate entries")
    indptr = np.zeros(n_rows + 1, dtype=np.int64)
    np.add.at(indptr, rows + 1, 1)
    np.cumsum(indptr, out=indptr)
    return sp.csr_matrix((vals, cols, indptr), shape=(n_rows, n_cols))


def write_vector(path, v, hex_floats=False):
    """Write a dense vector, one shortest-round-trip value per line."""
    fmt = (lambda x: float(x).hex()) if hex_floats else (lambda x: repr(float(x)))
    with open(path, "w") as f:
        f.write(f"{len(v)}\n")
        for x in np.asarray(v, dtype=np.float64):
            f.write(fmt(x) + "\n")


def read_vector(path):
    with open(path) as f:
        n = int(f.readline())
        vals = np.empty(n, dtype=np.float64)
        for k in range(n):
            s = f.readline().strip()
            vals[k] = float.fromhex(s) if s.startswith(("0x", "-0x")) else float(s)
    return vals
