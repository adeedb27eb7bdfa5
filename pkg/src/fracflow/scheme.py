"""Implicit half-step finite difference scheme for :class:`MultiTermProblem`.

At every step ``n`` the scheme is centred at ``t_{n-1/2}``: the sub-one
Caputo terms use the half-step weights ``c_k``, the super-one terms use the
L1-type weights on the increments ``nabla_t U^k`` and the integer-order
terms are Crank-Nicolson averages. Writing the unknown part on the left,

    r1 U^n - s (delta_x^2 + delta_y^2) U^n = rhs^n,
    s = b3/2 + sum_r d_r mu3_r c_0^(beta_r) / tau,

so the matrix only depends on whether ``n = 1`` (``c_0 = a_0``) or
``n >= 2`` (``c_0 = a_0 + b_1``). The right-hand side carries the full
history; it is recomputed from the stored fields at ``O(n)`` cost per node.
"""

from __future__ import annotations

import enum
import math
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from fracflow.grid import GridField, UniformGrid2D, laplacian_array
from fracflow.kernels import SubOneKernel, super_one_weights
from fracflow.problem import MultiTermProblem
from fracflow.solvers import (
    BandedFactorization,
    BandedSymmetricSystem,
    NonConvergenceError,
    cg_solve,
    factor,
    solve,
)

__all__ = [
    "Regime",
    "RunRecord",
    "SchemeMatrix",
    "SchemeScalars",
    "StepError",
    "StepStats",
    "assemble_matrix",
    "assemble_rhs",
    "initialize",
    "run",
    "step",
]


class Regime(enum.Enum):
    FIRST = "first-step"
    GENERAL = "general"

    @classmethod
    def for_step(cls, n: int) -> Regime:
        return cls.FIRST if n == 1 else cls.GENERAL


class StepError(RuntimeError):
    def __init__(self, step: int, message: str) -> None:
        super().__init__(f"step {step}: {message}")
        self.step = step


# {{{ scalars and matrix


def _c0(alpha: float, regime: Regime) -> float:
    kernel = SubOneKernel(alpha, capacity=4)
    return float(kernel.weights(1 if regime is Regime.FIRST else 2)[0])


@dataclass(frozen=True)
class SchemeScalars:
    tau: float
    hx: float
    hy: float
    mu1: tuple[float, ...]  # tau^(1-gamma_l) / Gamma(3-gamma_l)
    mu2: tuple[float, ...]  # tau^(1-alpha_m) / Gamma(2-alpha_m)
    mu3: tuple[float, ...]  # tau^(1-beta_r) / Gamma(2-beta_r)
    r1: dict
    r2: dict
    r3: dict
    r4: float
    r5: float

    @classmethod
    def from_problem(cls, problem: MultiTermProblem, grid: UniformGrid2D) -> SchemeScalars:
        tau, hx, hy = grid.tau, grid.hx, grid.hy
        mu1 = tuple(tau ** (1 - g) / math.gamma(3 - g) for g in problem.gammas)
        mu2 = tuple(tau ** (1 - a) / math.gamma(2 - a) for a in problem.alphas)
        mu3 = tuple(tau ** (1 - b) / math.gamma(2 - b) for b in problem.betas)
        inertia = (sum(t.coef * m for t, m in zip(problem.superone_terms, mu1))
                   + problem.b1) / tau

        r1, r2, r3 = {}, {}, {}
        for regime in Regime:
            sub = sum(t.coef * m * _c0(t.order, regime)
                      for t, m in zip(problem.subone_terms, mu2)) / tau
            diff = problem.b3 / 2 + sum(t.coef * m * _c0(t.order, regime)
                                        for t, m in zip(problem.laplacian_memory_terms, mu3)) / tau
            r1[regime] = inertia + sub + problem.b2 / 2
            r2[regime] = diff / hx**2
            r3[regime] = diff / hy**2
        return cls(tau, hx, hy, mu1, mu2, mu3, r1, r2, r3,
                   r4=inertia - problem.b2 / 2, r5=problem.b3 / 2)

    def diffusion(self, regime: Regime) -> float:
        """Coefficient ``s`` of the implicit discrete Laplacian."""
        return self.r2[regime] * self.hx**2


@dataclass(frozen=True)
class SchemeMatrix:
    """Block-tridiagonal operator on interior nodes, x-major ordering.

    Unknown ``(i, j)``, ``1 <= i <= Mx-1``, ``1 <= j <= My-1`` sits at
    position ``(i-1)(My-1) + (j-1)``.
    """

    grid: UniformGrid2D
    regime: Regime
    r1: float
    r2: float
    r3: float
    matrix: sp.csr_matrix

    @property
    def dimension(self) -> int:
        return self.matrix.shape[0]

    def is_symmetric(self) -> bool:
        return (self.matrix != self.matrix.T).nnz == 0

    def dominance_margin(self) -> float:
        """``min_i (|A_ii| - sum_{j != i} |A_ij|)``."""
        A = abs(self.matrix)
        diag = A.diagonal()
        off = np.asarray(A.sum(axis=1)).ravel() - diag
        return float(np.min(diag - off))

    def check(self) -> None:
        if not self.is_symmetric():
            raise AssertionError("scheme matrix is not symmetric")
        if not np.all(self.matrix.diagonal() > 0):
            raise AssertionError("scheme matrix has a non-positive diagonal")
        if not self.dominance_margin() > 0:
            raise AssertionError("scheme matrix is not strictly diagonally dominant")

    def banded(self) -> BandedSymmetricSystem:
        return BandedSymmetricSystem.from_matrix(self.matrix, self.grid.My - 1)


def _second_difference(m: int) -> sp.csr_matrix:
    return sp.diags([-np.ones(m - 1), 2 * np.ones(m), -np.ones(m - 1)], [-1, 0, 1], format="csr")


def assemble_matrix(problem: MultiTermProblem, grid: UniformGrid2D,
                    regime: Regime = Regime.GENERAL,
                    scalars: SchemeScalars | None = None) -> SchemeMatrix:
    if scalars is None:
        scalars = SchemeScalars.from_problem(problem, grid)
    mx, my = grid.interior_shape
    r1, r2, r3 = scalars.r1[regime], scalars.r2[regime], scalars.r3[regime]
    A = (r1 * sp.identity(mx * my, format="csr")
         + r2 * sp.kron(_second_difference(mx), sp.identity(my), format="csr")
         + r3 * sp.kron(sp.identity(mx), _second_difference(my), format="csr"))
    A = A.tocsr()
    A.sort_indices()
    result = SchemeMatrix(grid, regime, r1, r2, r3, A)
    result.check()
    return result


# }}}

# {{{ run record


@dataclass
class StepStats:
    n: int
    residual: float  # ||A x - b||_inf / ||b||_inf
    seconds: float


@dataclass
class RunRecord:
    """History of a run: ``U[k]`` and ``dU[k] = (U[k] - U[k-1]) / tau``.

    ``dU[0]`` is unused and left at zero. Arrays are preallocated for the
    whole run; ``n`` is the last completed step.
    """

    problem: MultiTermProblem
    grid: UniformGrid2D
    U: np.ndarray
    dU: np.ndarray
    phi: np.ndarray
    n: int = 0
    solver: str = "direct"
    rel_tol: float = 1e-12
    stats: list[StepStats] = field(default_factory=list)
    _scalars: SchemeScalars | None = field(default=None, repr=False)
    _matrices: dict = field(default_factory=dict, repr=False)
    _factors: dict = field(default_factory=dict, repr=False)
    _kernels: dict = field(default_factory=dict, repr=False)
    _source_cache: dict = field(default_factory=dict, repr=False)

    @property
    def scalars(self) -> SchemeScalars:
        if self._scalars is None:
            self._scalars = SchemeScalars.from_problem(self.problem, self.grid)
        return self._scalars

    def field(self, k: int) -> GridField:
        return GridField(self.grid, self.U[k])

    def increment(self, k: int) -> GridField:
        return GridField(self.grid, self.dU[k])

    def time(self, k: int) -> float:
        return k * self.grid.tau

    def matrix(self, regime: Regime) -> SchemeMatrix:
        if regime not in self._matrices:
            self._matrices[regime] = assemble_matrix(self.problem, self.grid, regime,
                                                     self.scalars)
        return self._matrices[regime]

    def factorization(self, regime: Regime) -> BandedFactorization:
        if regime not in self._factors:
            self._factors[regime] = factor(self.matrix(regime).banded())
        return self._factors[regime]

    def sub_one_kernel(self, order: float) -> SubOneKernel:
        if order not in self._kernels:
            self._kernels[order] = SubOneKernel(order, capacity=self.grid.N + 2)
        return self._kernels[order]

    def source(self, k: int) -> np.ndarray:
        if k not in self._source_cache:
            X, Y = self.grid.mesh()
            value = np.broadcast_to(self.problem.source(X, Y, self.time(k)), self.grid.shape)
            # only the two most recent levels are ever needed
            for old in [j for j in self._source_cache if j < k - 1]:
                del self._source_cache[old]
            self._source_cache[k] = np.array(value, dtype=np.float64)
        return self._source_cache[k]


def initialize(problem: MultiTermProblem, grid: UniformGrid2D, solver: str = "direct",
               rel_tol: float = 1e-12) -> RunRecord:
    """Sample ``U^0`` and ``phi`` on the grid; boundary nodes of ``U^0`` take
    the Dirichlet data at ``t = 0``."""
    if solver not in ("direct", "cg"):
        raise ValueError(f"unknown solver {solver!r}")
    if not problem.b1 > 0 or not problem.b3 > 0:
        raise ValueError("b1 and b3 must be positive")
    X, Y = grid.mesh()
    U = np.zeros((grid.N + 1,) + grid.shape)
    dU = np.zeros_like(U)
    U[0] = np.broadcast_to(problem.initial_value(X, Y), grid.shape)
    problem.boundary.fill(U[0], grid.x, grid.y, 0.0)
    phi = np.array(np.broadcast_to(problem.initial_rate(X, Y), grid.shape), dtype=np.float64)
    return RunRecord(problem, grid, U, dU, phi, solver=solver, rel_tol=rel_tol)


# }}}

# {{{ right-hand side


def _history_weights(record: RunRecord, n: int):
    """Weights applied to ``U^0..U^{n-1}`` (plain and under the Laplacian)
    and to ``dU^1..dU^{n-1}``, plus the coefficient of ``phi``."""
    problem, sc = record.problem, record.scalars
    tau = sc.tau
    wU = np.zeros(n)
    wL = np.zeros(n)
    wD = np.zeros(n)  # wD[0] unused
    wphi = 0.0

    def subone_pattern(order: float) -> np.ndarray:
        # coefficient of U^k in sum_{k=1}^{n-1} (c_{n-k-1} - c_{n-k}) U^k + c_{n-1} U^0
        c = record.sub_one_kernel(order).weights(n)
        w = np.empty(n)
        w[0] = c[n - 1]
        k = np.arange(1, n)
        w[1:] = c[n - k - 1] - c[n - k]
        return w

    for term, mu in zip(problem.subone_terms, sc.mu2):
        wU += term.coef * mu / tau * subone_pattern(term.order)
    for term, mu in zip(problem.laplacian_memory_terms, sc.mu3):
        wL -= term.coef * mu / tau * subone_pattern(term.order)
    for term, mu in zip(problem.superone_terms, sc.mu1):
        a = np.asarray(super_one_weights(term.order, n + 1).weights)
        k = np.arange(1, n)
        wD[1:] += term.coef * mu * (a[n - k - 1] - a[n - k])
        wphi += term.coef * mu * a[n - 1]

    wU[n - 1] += sc.r4
    wL[n - 1] += sc.r5
    return wU, wL, wD, wphi


def _lifting(record: RunRecord, n: int) -> np.ndarray:
    """``s * Lap`` applied to the level-``n`` boundary values (interior zero)."""
    grid = record.grid
    B = np.zeros(grid.shape)
    record.problem.boundary.fill(B, grid.x, grid.y, record.time(n))
    s = record.scalars.diffusion(Regime.for_step(n))
    return s * laplacian_array(B, grid.hx, grid.hy)


def assemble_rhs(record: RunRecord, n: int, return_terms: bool = False):
    """Right-hand side at step ``n`` on interior nodes, shape ``(Mx-1, My-1)``.

    With ``return_terms=True`` a dict of the individual contributions is
    returned instead; their sum equals the default result.
    """
    if n < 1 or record.n < n - 1:
        raise ValueError(f"step {n} needs history up to {n - 1}, record holds {record.n}")
    grid, problem = record.grid, record.problem
    hx, hy = grid.hx, grid.hy
    fsrc = 0.5 * (record.source(n) + record.source(n - 1))[1:-1, 1:-1]

    if return_terms:
        return _rhs_terms(record, n, fsrc)

    wU, wL, wD, wphi = _history_weights(record, n)
    P = grid.shape[0] * grid.shape[1]
    Uh = record.U[:n].reshape(n, P)
    plain = (wU @ Uh).reshape(grid.shape)
    lap = (wL @ Uh).reshape(grid.shape)
    total = plain[1:-1, 1:-1] + laplacian_array(lap, hx, hy)
    if n > 1 and problem.superone_terms:
        inc = (wD[1:] @ record.dU[1:n].reshape(n - 1, P)).reshape(grid.shape)
        total += inc[1:-1, 1:-1]
    if wphi:
        total += wphi * record.phi[1:-1, 1:-1]
    total += fsrc
    if not problem.boundary.is_homogeneous:
        total += _lifting(record, n)
    return total


def _rhs_terms(record: RunRecord, n: int, fsrc: np.ndarray) -> dict:
    grid, problem, sc = record.grid, record.problem, record.scalars
    hx, hy, tau = grid.hx, grid.hy, sc.tau
    U, dU = record.U, record.dU
    inner = (slice(1, -1), slice(1, -1))

    def lap(v):
        return laplacian_array(v, hx, hy)

    terms = {"previous": sc.r4 * U[n - 1][inner]}

    gamma_mem = np.zeros(grid.interior_shape)
    for term, mu in zip(problem.superone_terms, sc.mu1):
        a = np.asarray(super_one_weights(term.order, n + 1).weights)
        acc = a[n - 1] * record.phi[inner]
        for k in range(1, n):
            acc = acc + (a[n - k - 1] - a[n - k]) * dU[k][inner]
        gamma_mem += term.coef * mu * acc
    terms["superone_memory"] = gamma_mem

    alpha_mem = np.zeros(grid.interior_shape)
    for term, mu in zip(problem.subone_terms, sc.mu2):
        c = record.sub_one_kernel(term.order).weights(n)
        acc = c[n - 1] * U[0][inner]
        for k in range(1, n):
            acc = acc + (c[n - k - 1] - c[n - k]) * U[k][inner]
        alpha_mem += term.coef * mu / tau * acc
    terms["subone_memory"] = alpha_mem

    terms["previous_laplacian"] = sc.r5 * lap(U[n - 1])

    beta_mem = np.zeros(grid.interior_shape)
    for term, mu in zip(problem.laplacian_memory_terms, sc.mu3):
        c = record.sub_one_kernel(term.order).weights(n)
        acc = c[n - 1] * lap(U[0])
        for k in range(1, n):
            acc = acc + (c[n - k - 1] - c[n - k]) * lap(U[k])
        beta_mem -= term.coef * mu / tau * acc
    terms["laplacian_memory"] = beta_mem

    terms["source"] = fsrc
    terms["lifting"] = (_lifting(record, n) if not problem.boundary.is_homogeneous
                        else np.zeros(grid.interior_shape))
    return terms


# }}}

# {{{ time stepping


def step(record: RunRecord, n: int | None = None) -> GridField:
    """Advance ``record`` from step ``n - 1`` to ``n`` and return ``U^n``."""
    if n is None:
        n = record.n + 1
    if n != record.n + 1:
        raise ValueError(f"record is at step {record.n}; cannot compute step {n}")
    if n > record.grid.N:
        raise ValueError(f"step {n} beyond the final step {record.grid.N}")
    grid = record.grid
    start = time.perf_counter()
    regime = Regime.for_step(n)
    try:
        rhs = assemble_rhs(record, n).ravel()
        if record.solver == "direct":
            x = solve(record.factorization(regime), rhs)
        else:
            x = cg_solve(record.matrix(regime).matrix, rhs, rel_tol=record.rel_tol)
    except (np.linalg.LinAlgError, NonConvergenceError, FloatingPointError) as exc:
        raise StepError(n, str(exc)) from exc

    A = record.matrix(regime).matrix
    bnorm = float(np.max(np.abs(rhs))) if rhs.size else 0.0
    resid = float(np.max(np.abs(A @ x - rhs))) / bnorm if bnorm > 0 else 0.0
    if record.solver == "direct" and resid > 1e-9:
        raise StepError(n, f"direct solve residual {resid:.3e} too large")
    if not np.all(np.isfinite(x)):
        raise StepError(n, "solution contains non-finite values")

    Un = record.U[n]
    Un[1:-1, 1:-1] = x.reshape(grid.interior_shape)
    record.problem.boundary.fill(Un, grid.x, grid.y, record.time(n))
    record.dU[n] = (Un - record.U[n - 1]) / grid.tau
    record.n = n
    record.stats.append(StepStats(n, resid, time.perf_counter() - start))
    return record.field(n)


def run(problem: MultiTermProblem, grid: UniformGrid2D, solver: str = "direct",
        rel_tol: float = 1e-12) -> RunRecord:
    """Integrate ``problem`` over all ``grid.N`` steps."""
    record = initialize(problem, grid, solver=solver, rel_tol=rel_tol)
    for n in range(1, grid.N + 1):
        step(record, n)
    return record


# }}}
