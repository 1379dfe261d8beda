"""Penalty-induced ill-conditioning of the coupled system.

Sweeps the positional penalty over three decades on a fixed geometry
and reports extreme eigenvalues and 1-norm condition estimates: the
smallest eigenvalue is anchored by the weak bulk modes and stays put,
while the largest grows with the penalty, so conditioning degrades
linearly with it.
"""

from mdprec import GenConfig, generate, lambda_extremes

print(f"{'eps':>8} {'lambda_min':>12} {'lambda_max':>12} {'ratio':>12} {'cond_1':>12}")
for eps in (1.0, 10.0, 100.0, 1000.0):
    cfg = GenConfig(solid_grid=(12, 12, 12), dofs_per_node=1, fiber_count=30,
                    elements_per_fiber=1, beam_modulus=10.0, penalty_pos=eps, seed=5)
    system, _ = generate(cfg)
    spectrum = lambda_extremes(system.monolithic())
    print(f"{eps:8.0f} {spectrum.lambda_min:12.4e} {spectrum.lambda_max:12.4e} "
          f"{spectrum.ratio:12.4e} {spectrum.one_norm_condition:12.4e}")

print("\nlambda_min is flat, lambda_max tracks the penalty: the block")
print("preconditioner has to absorb an arbitrarily bad condition number.")
