"""
Convergence of the multi-term scheme
====================================

A manufactured solution u = (t^3 + 1) sin(pi x) sin(pi y) gives exact errors.
First h is refined at a small fixed tau, then tau is refined with h tied to
tau^(q/2), where q is the scheme's temporal order.
"""

from fracflow import reference
from fracflow.harness import compare_with_reference, rows_to_csv, spatial_study, temporal_study
from fracflow.problem import example1_problem

problem = example1_problem(gammas=(1.8, 1.6), alphas=(0.8, 0.6), betas=(0.8, 0.6))
print("temporal order q =", problem.temporal_order)

# %%
# Spatial ladder. Orders sit near 2.
rows = spatial_study(problem, [1 / 4, 1 / 8, 1 / 16, 1 / 32], tau=1 / 1000)
print(rows_to_csv(rows))

# %%
# Temporal ladder. The cell count is round(1 / tau^(q/2)), and the row
# records the actual h.
rows = temporal_study(problem, reference.TEMPORAL_TAU)
print(rows_to_csv(rows))

# %%
# Compare with the published numbers for this case. Every row must be
# within 15%.
for r in compare_with_reference(rows, reference.TEMPORAL[0], "time", order_window=0.2):
    print(f"{r.property_id:16} {r.parameters['row']:6} {'ok' if r.passed else 'MISS'}  {r.note}")
