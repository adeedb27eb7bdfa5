"""
The heat equation as a special case, and the two linear solvers
===============================================================

With every fractional term dropped and b2 = 0, the scheme is Crank-Nicolson.
The decaying mode exp(-2 pi^2 t) sin(pi x) sin(pi y) makes the second-order
convergence visible. The same system is then solved both ways.
"""

import math
import time

import numpy as np

from fracflow.grid import UniformGrid2D
from fracflow.harness import solution_errors
from fracflow.problem import MultiTermProblem, example1_problem, heat_equation_problem
from fracflow.scheme import assemble_matrix, run
from fracflow.solvers import cg_solve, factor, solve

heat = heat_equation_problem(T=0.1)
prev = None
for M in (8, 16, 32, 64):
    err = solution_errors(run(heat, UniformGrid2D.unit_square(M, M, T=heat.T)))[1]
    note = "" if prev is None else f"  order {math.log2(prev / err):.3f}"
    print(f"M = N = {M}: max error {err:.3e}{note}")
    prev = err

# %%
# The 4x4 system on a 3x3-cell mesh with h = tau = 1: diagonal 3, and
# neighbours -1/2.
tiny = assemble_matrix(MultiTermProblem(Lx=3.0, Ly=3.0), UniformGrid2D(3.0, 3.0, 3, 3, T=1.0, N=1))
print(tiny.matrix.toarray())

# %%
# Banded Cholesky against conjugate gradients on a 63x63-interior system
# from the multi-term model.
mat = assemble_matrix(example1_problem(), UniformGrid2D.unit_square(64, 1000))
b = np.random.default_rng(1).standard_normal(mat.dimension)
t0 = time.perf_counter()
fac = factor(mat.banded())
x_direct = solve(fac, b)
t1 = time.perf_counter()
x_cg = cg_solve(mat.matrix, b)
t2 = time.perf_counter()
print(f"direct {t1 - t0:.3f}s  cg {t2 - t1:.3f}s  "
      f"relative difference {np.linalg.norm(x_direct - x_cg) / np.linalg.norm(x_direct):.1e}")
print("dominance margin", mat.dominance_margin(), "symmetric", mat.is_symmetric())
