"""Uniform tensor-product mesh, grid fields and discrete operators."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from fracflow.kernels import FracOrder, OrderKind, SubOneKernel, super_one_weights

__all__ = [
    "GridField",
    "GridMismatchError",
    "UniformGrid2D",
    "caputo_halfstep",
    "caputo_superone_halfstep",
    "h1_seminorm",
    "inner_product",
    "l2_norm",
    "laplacian_5pt",
    "linf_norm",
    "nabla_t",
    "weighted_h1_norm",
]


class GridMismatchError(ValueError):
    pass


@dataclass(frozen=True)
class UniformGrid2D:
    """Mesh ``x_i = i hx``, ``y_j = j hy`` on ``[0, Lx] x [0, Ly]`` with
    ``N`` uniform time steps on ``[0, T]``."""

    Lx: float
    Ly: float
    Mx: int
    My: int
    T: float = 1.0
    N: int = 1

    def __post_init__(self) -> None:
        if self.Mx < 2 or self.My < 2:
            raise ValueError(f"need at least 2 cells per direction, got {self.Mx}x{self.My}")
        if self.N < 1:
            raise ValueError(f"need at least one time step, got N={self.N}")
        for name in ("Lx", "Ly", "T"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be positive, got {value}")

    @classmethod
    def unit_square(cls, M: int, N: int, T: float = 1.0) -> UniformGrid2D:
        return cls(1.0, 1.0, M, M, T, N)

    @property
    def hx(self) -> float:
        return self.Lx / self.Mx

    @property
    def hy(self) -> float:
        return self.Ly / self.My

    @property
    def tau(self) -> float:
        return self.T / self.N

    @property
    def shape(self) -> tuple[int, int]:
        return (self.Mx + 1, self.My + 1)

    @property
    def interior_shape(self) -> tuple[int, int]:
        return (self.Mx - 1, self.My - 1)

    @property
    def x(self) -> np.ndarray:
        return np.arange(self.Mx + 1) * self.hx

    @property
    def y(self) -> np.ndarray:
        return np.arange(self.My + 1) * self.hy

    def t(self, n: int) -> float:
        return n * self.tau

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        """Node coordinates with ``indexing="ij"``."""
        return np.meshgrid(self.x, self.y, indexing="ij")

    def same_space(self, other: UniformGrid2D) -> bool:
        return (self.Lx, self.Ly, self.Mx, self.My) == (other.Lx, other.Ly, other.Mx, other.My)


@dataclass
class GridField:
    """Node values ``values[i, j]`` for ``0 <= i <= Mx``, ``0 <= j <= My``."""

    grid: UniformGrid2D
    values: np.ndarray

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != self.grid.shape:
            raise GridMismatchError(
                f"field shape {self.values.shape} does not match grid {self.grid.shape}")

    @classmethod
    def zeros(cls, grid: UniformGrid2D) -> GridField:
        return cls(grid, np.zeros(grid.shape))

    @classmethod
    def from_function(cls, grid: UniformGrid2D, func, *args) -> GridField:
        X, Y = grid.mesh()
        return cls(grid, np.broadcast_to(func(X, Y, *args), grid.shape).copy())

    @property
    def interior(self) -> np.ndarray:
        return self.values[1:-1, 1:-1]

    def with_zero_boundary(self) -> GridField:
        v = np.zeros_like(self.values)
        v[1:-1, 1:-1] = self.interior
        return GridField(self.grid, v)


def _check_same(*fields: GridField) -> UniformGrid2D:
    grid = fields[0].grid
    for f in fields[1:]:
        if not grid.same_space(f.grid):
            raise GridMismatchError("fields live on different grids")
    return grid


# {{{ spatial operators


def laplacian_array(u: np.ndarray, hx: float, hy: float) -> np.ndarray:
    """Five-point Laplacian of a boundary-inclusive array, interior only."""
    c = u[1:-1, 1:-1]
    return ((u[:-2, 1:-1] - 2.0 * c + u[2:, 1:-1]) / hx**2
            + (u[1:-1, :-2] - 2.0 * c + u[1:-1, 2:]) / hy**2)


def laplacian_5pt(f: GridField) -> GridField:
    """``(delta_x^2 + delta_y^2) f`` on interior nodes; zero on the boundary."""
    out = np.zeros_like(f.values)
    out[1:-1, 1:-1] = laplacian_array(f.values, f.grid.hx, f.grid.hy)
    return GridField(f.grid, out)


def nabla_t(current: GridField, previous: GridField, tau: float) -> GridField:
    """Backward difference quotient ``(current - previous) / tau``."""
    grid = _check_same(current, previous)
    return GridField(grid, (current.values - previous.values) / tau)


# }}}

# {{{ inner products and norms


def inner_product(u: GridField, v: GridField) -> float:
    grid = _check_same(u, v)
    return grid.hx * grid.hy * float(np.sum(u.interior * v.interior))


def l2_norm(u: GridField) -> float:
    return math.sqrt(inner_product(u, u))


def linf_norm(u: GridField) -> float:
    if u.interior.size == 0:
        return 0.0
    return float(np.max(np.abs(u.interior)))


def _backward_differences(u: np.ndarray, hx: float, hy: float):
    # nabla_x u, nabla_y u at i = 1..Mx, j = 1..My
    return ((u[1:, 1:] - u[:-1, 1:]) / hx, (u[1:, 1:] - u[1:, :-1]) / hy)


def gradient_inner_product(u: GridField, v: GridField) -> float:
    """Discrete Dirichlet form ``<nabla_x u, nabla_x v> + <nabla_y u, nabla_y v>``.

    The written pairing ``<(nabla_x + nabla_y) u, (nabla_x + nabla_y) v>`` is
    taken component-wise; the cross terms would break summation by parts
    against the five-point Laplacian.
    """
    grid = _check_same(u, v)
    ux, uy = _backward_differences(u.values, grid.hx, grid.hy)
    vx, vy = _backward_differences(v.values, grid.hx, grid.hy)
    return grid.hx * grid.hy * float(np.sum(ux * vx) + np.sum(uy * vy))


def h1_seminorm(u: GridField) -> float:
    return math.sqrt(max(gradient_inner_product(u, u), 0.0))


def weighted_h1_norm(u: GridField, w0: float, w1: float) -> float:
    """``sqrt(w0 ||u||_0^2 + w1 |u|_1^2)`` with caller-chosen weights."""
    return math.sqrt(w0 * inner_product(u, u) + w1 * gradient_inner_product(u, u))


# }}}

# {{{ discrete Caputo derivatives


def _stack(history: Sequence) -> tuple[np.ndarray, UniformGrid2D | None]:
    if len(history) == 0:
        raise ValueError("history is empty")
    grid = history[0].grid if isinstance(history[0], GridField) else None
    values = [h.values if isinstance(h, GridField) else np.asarray(h, dtype=np.float64)
              for h in history]
    return np.stack(values), grid


def _wrap(values: np.ndarray, grid: UniformGrid2D | None):
    return GridField(grid, values) if grid is not None else values


def caputo_halfstep(history: Sequence, alpha: FracOrder | float, tau: float,
                    kernel: SubOneKernel | None = None):
    r"""Approximate :math:`D_t^\alpha u(t_{n-1/2})` from ``U^0, ..., U^n``.

    Evaluates ``tau^(1-alpha) / Gamma(2-alpha) * sum_k c_{n-k} nabla_t U^k``.
    Entries of ``history`` may be :class:`GridField` instances or plain
    arrays (including scalars).
    """
    U, grid = _stack(history)
    n = U.shape[0] - 1
    if n < 1:
        raise ValueError("need at least U^0 and U^1")
    if kernel is None:
        kernel = SubOneKernel(alpha, capacity=n + 1)
    a = kernel.alpha
    c = kernel.weights(n)
    dU = np.diff(U, axis=0) / tau
    # c_{n-k} pairs with nabla_t U^k, k = 1..n
    s = np.tensordot(c[::-1], dU, axes=1)
    return _wrap(tau ** (1.0 - a) / math.gamma(2.0 - a) * s, grid)


def caputo_superone_halfstep(increments: Sequence, phi, gamma: FracOrder | float,
                             tau: float):
    r"""Approximate :math:`D_t^\gamma u(t_{n-1/2})` for ``1 < gamma < 2``.

    ``increments`` holds ``nabla_t U^1 ... nabla_t U^n`` and ``phi`` is the
    initial rate ``u_t(., 0)``.
    """
    g = gamma if isinstance(gamma, FracOrder) else FracOrder(gamma, OrderKind.SuperOne)
    D, grid = _stack(increments)
    n = D.shape[0]
    phi_v = phi.values if isinstance(phi, GridField) else np.asarray(phi, dtype=np.float64)
    a = np.asarray(super_one_weights(g, n + 1).weights)
    # a_0 D^n - sum_{k=1}^{n-1} (a_{n-k-1} - a_{n-k}) D^k - a_{n-1} phi
    k = np.arange(1, n)
    w = a[n - k - 1] - a[n - k]
    bracket = a[0] * D[n - 1] - np.tensordot(w, D[:n - 1], axes=1) - a[n - 1] * phi_v
    return _wrap(tau ** (1.0 - g.value) / math.gamma(3.0 - g.value) * bracket, grid)


# }}}
