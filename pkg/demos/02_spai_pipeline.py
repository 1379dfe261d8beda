"""The sparse approximate inverse pipeline, stage by stage.

Builds the fiber block of a generated coupled system and runs
pre-filtering, pattern enrichment, Frobenius-norm minimization and
post-filtering separately, then sweeps the two user parameters (drop
tolerance sigma, refinement level ell) the way the parameter study
does. One-element fibers give dense 12x12 sub-blocks whose inverse
pattern the enrichment recovers exactly.
"""

import numpy as np

from mdprec import GenConfig, SpaiConfig, build_spai, generate, graph_power, prefilter, spai_minimize
from mdprec.spai import postfilter

system, _ = generate(GenConfig(
    solid_grid=(12, 12, 12), dofs_per_node=1, fiber_count=25,
    elements_per_fiber=2, beam_modulus=10.0, penalty_pos=10.0, seed=1))
a = system.a
print(f"fiber block: {a.shape[0]} dofs, {a.nnz} stored entries")

print("\n== stages ==")
g = prefilter(a, 1e-8)
print(f"pre-filter (sigma=1e-8):    {g.nnz} pattern entries")
enriched = graph_power(g, 2)
print(f"enrichment (ell=2):         {enriched.nnz} pattern entries")
res = spai_minimize(a, enriched)
print(f"minimization residual:      ||A*M - I||_F = {res.residual_fro:.3e}")
filtered = postfilter(res.approx_inverse, 1e-8)
print(f"post-filter:                {res.approx_inverse.nnz} -> {filtered.nnz} entries")

print("\n== parameter sweep ==")
a_inv = np.linalg.inv(a.toarray())
print(f"{'sigma':>8} {'ell':>4} {'nnz_filt':>9} {'nnz_pat':>8} {'rel_error':>10}")
for sigma in (1e-10, 1e-8):
    for ell in (1, 2, 3):
        out = build_spai(a, SpaiConfig(sigma=sigma, ell=ell))
        rel = np.linalg.norm(out.approx_inverse.toarray() - a_inv) / np.linalg.norm(a_inv)
        print(f"{sigma:8.0e} {ell:4d} {out.filtered_graph_nnz:9d} "
              f"{out.pattern_nnz:8d} {rel:10.2e}")
print("\nhigher ell widens the allowed pattern and the error drops to")
print("rounding level once the true inverse pattern is covered.")
