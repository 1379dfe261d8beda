"""Sparse kernels and Matrix Market round trips.

Walks through the CSR utility layer: exact products, union-pattern
addition (cancelled entries stay as stored zeros), norms, graphs, and
the bit-exact Matrix Market writer/reader.
"""

import tempfile

import numpy as np
import scipy.sparse as sp

from mdprec import add_scaled, extract_graph, matrix_norms, spgemm, spmv, transpose
from mdprec import mmio

rng = np.random.default_rng(0)

print("== products ==")
a = sp.random(6, 6, density=0.4, random_state=rng, format="csr")
x = rng.standard_normal(6)
print("spmv matches dense:", np.allclose(spmv(a, x), a.toarray() @ x))
b = sp.random(6, 6, density=0.4, random_state=rng, format="csr")
c = spgemm(a, b)
print("spgemm matches dense:", np.allclose(c.toarray(), a.toarray() @ b.toarray()))
print("transpose involution is bitwise:",
      np.array_equal(transpose(transpose(a)).data, a.data))

print("\n== union-pattern addition ==")
z = add_scaled(a, -1.0, a)
print(f"A + (-1)A keeps {z.nnz} stored zeros (pattern preserved)")
print("norms of A:", {k: round(v, 3) for k, v in matrix_norms(a).items()})

print("\n== graphs ==")
g = extract_graph(a)
print(f"graph of A: {g.nnz} stored positions (zeros included)")

print("\n== Matrix Market round trip ==")
a.data[0] = 1.0 / 3.0  # a value that needs all 17 digits
with tempfile.TemporaryDirectory() as d:
    mmio.write_matrix(f"{d}/a.mtx", a)
    back = mmio.read_matrix(f"{d}/a.mtx")
    print("decimal round trip bitwise:", np.array_equal(back.data, a.data))
    mmio.write_matrix(f"{d}/a_hex.mtx", a, hex_floats=True)
    back = mmio.read_matrix(f"{d}/a_hex.mtx")
    print("hex-float round trip bitwise:", np.array_equal(back.data, a.data))
