"""Problem descriptions for the multi-term time-fractional diffusion model

    sum_l a_l D^{gamma_l} u + b1 u_t + sum_m c_m D^{alpha_m} u + b2 u
        = b3 Lap u + sum_r d_r D^{beta_r} Lap u + f

on ``(0, Lx) x (0, Ly) x (0, T]`` with Dirichlet data, ``u(., 0) = varphi``
and ``u_t(., 0) = phi``. Orders satisfy ``1 < gamma_l < 2`` and
``0 < alpha_m, beta_r < 1``; all derivatives are of Caputo type.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np

__all__ = [
    "BoundarySpec",
    "Finding",
    "MultiTermProblem",
    "Term",
    "example1_problem",
    "heat_equation_problem",
    "manufactured_problem",
    "oldroyd_to_multiterm",
    "validate",
]

SpaceTimeFunction = Callable[[np.ndarray, np.ndarray, float], np.ndarray]
SpaceFunction = Callable[[np.ndarray, np.ndarray], np.ndarray]
EdgeFunction = Callable[[np.ndarray, float], np.ndarray]


class Term(NamedTuple):
    coef: float
    order: float


def _zero_st(x, y, t):
    return np.zeros(np.broadcast(x, y).shape)


def _zero_s(x, y):
    return np.zeros(np.broadcast(x, y).shape)


def _zero_edge(s, t):
    return np.zeros(np.shape(s))


@dataclass(frozen=True)
class BoundarySpec:
    """Dirichlet data on the four edges.

    ``left``/``right`` take ``(y, t)`` on ``x = 0`` and ``x = Lx``;
    ``bottom``/``top`` take ``(x, t)`` on ``y = 0`` and ``y = Ly``. At the
    corners the bottom/top values win.
    """

    left: EdgeFunction = _zero_edge
    right: EdgeFunction = _zero_edge
    bottom: EdgeFunction = _zero_edge
    top: EdgeFunction = _zero_edge

    def fill(self, values: np.ndarray, x: np.ndarray, y: np.ndarray, t: float) -> np.ndarray:
        """Overwrite the boundary of ``values`` (shape ``(len(x), len(y))``)."""
        values[0, :] = self.left(y, t)
        values[-1, :] = self.right(y, t)
        values[:, 0] = self.bottom(x, t)
        values[:, -1] = self.top(x, t)
        return values

    @property
    def is_homogeneous(self) -> bool:
        return all(g is _zero_edge for g in (self.left, self.right, self.bottom, self.top))


@dataclass(frozen=True)
class MultiTermProblem:
    superone_terms: tuple[Term, ...] = ()
    b1: float = 1.0
    b2: float = 0.0
    b3: float = 1.0
    subone_terms: tuple[Term, ...] = ()
    laplacian_memory_terms: tuple[Term, ...] = ()
    source: SpaceTimeFunction = _zero_st
    initial_value: SpaceFunction = _zero_s
    initial_rate: SpaceFunction = _zero_s
    boundary: BoundarySpec = field(default_factory=BoundarySpec)
    Lx: float = 1.0
    Ly: float = 1.0
    T: float = 1.0
    exact: SpaceTimeFunction | None = None
    name: str = "problem"

    def __post_init__(self) -> None:
        for attr in ("superone_terms", "subone_terms", "laplacian_memory_terms"):
            terms = tuple(Term(float(c), float(o)) for c, o in getattr(self, attr))
            object.__setattr__(self, attr, terms)
        if self.exact is not None:
            self._check_exact()

    @property
    def gammas(self) -> tuple[float, ...]:
        return tuple(t.order for t in self.superone_terms)

    @property
    def alphas(self) -> tuple[float, ...]:
        return tuple(t.order for t in self.subone_terms)

    @property
    def betas(self) -> tuple[float, ...]:
        return tuple(t.order for t in self.laplacian_memory_terms)

    @property
    def temporal_order(self) -> float:
        """``min(3 - gamma_l, 2 - alpha_m, 2 - beta_r)``, capped at 2."""
        orders = ([3.0 - g for g in self.gammas] + [2.0 - a for a in self.alphas]
                  + [2.0 - b for b in self.betas])
        return min(orders + [2.0])

    def _check_exact(self, tol: float = 1e-10) -> None:
        x = np.linspace(0.0, self.Lx, 7)
        y = np.linspace(0.0, self.Ly, 7)
        X, Y = np.meshgrid(x, y, indexing="ij")
        scale = 1.0 + float(np.max(np.abs(self.exact(X, Y, 0.0))))
        err = np.max(np.abs(self.exact(X, Y, 0.0) - self.initial_value(X, Y)))
        if err > tol * scale:
            raise ValueError(f"exact solution disagrees with the initial value by {err:.3e}")
        for t in np.linspace(0.0, self.T, 5)[1:]:
            U = self.exact(X, Y, t)
            B = self.boundary.fill(U.copy(), x, y, t)
            err = np.max(np.abs(U - B))
            if err > tol * (1.0 + float(np.max(np.abs(U)))):
                raise ValueError(
                    f"exact solution disagrees with boundary data at t={t:g} by {err:.3e}")


# {{{ diagnostics


@dataclass(frozen=True)
class Finding:
    severity: str  # "error", "warning" or "info"
    code: str
    message: str


def validate(problem: MultiTermProblem) -> list[Finding]:
    """Collect sign, range and compatibility diagnostics without raising."""
    out: list[Finding] = []

    def add(severity, code, message):
        out.append(Finding(severity, code, message))

    families = [
        ("superone_terms", "a", 1.0, 2.0),
        ("subone_terms", "c", 0.0, 1.0),
        ("laplacian_memory_terms", "d", 0.0, 1.0),
    ]
    for attr, sym, lo, hi in families:
        terms = getattr(problem, attr)
        if not terms:
            add("info", f"empty-{attr}", f"no {attr}; the corresponding memory term is absent")
        for i, (coef, order) in enumerate(terms, start=1):
            if not coef > 0:
                add("error", "coefficient-sign", f"{sym}_{i} = {coef} must be positive")
            if not lo < order < hi:
                add("error", "order-range", f"order {order} of {sym}_{i} outside ({lo:g}, {hi:g})")

    if not problem.b1 > 0:
        add("error", "coefficient-sign", f"b1 = {problem.b1} must be positive")
    if not problem.b3 > 0:
        add("error", "coefficient-sign", f"b3 = {problem.b3} must be positive")
    if problem.b2 < 0:
        add("error", "coefficient-sign", f"b2 = {problem.b2} must be nonnegative")
    elif problem.b2 == 0:
        add("warning", "b2-zero",
            "b2 = 0 lies outside the b_i > 0 assumption; stability is checked empirically")
    for name in ("Lx", "Ly", "T"):
        if not getattr(problem, name) > 0:
            add("error", "domain", f"{name} must be positive")

    if problem.Lx > 0 and problem.Ly > 0 and problem.T > 0:
        out.extend(_compatibility(problem))
    return out


def _compatibility(problem: MultiTermProblem, tol: float = 1e-12) -> list[Finding]:
    out = []
    bc = problem.boundary
    corners = {
        "(0, 0)": (bc.left, 0.0, bc.bottom, 0.0),
        "(0, Ly)": (bc.left, problem.Ly, bc.top, 0.0),
        "(Lx, 0)": (bc.right, 0.0, bc.bottom, problem.Lx),
        "(Lx, Ly)": (bc.right, problem.Ly, bc.top, problem.Lx),
    }
    for t in np.linspace(0.0, problem.T, 5):
        for label, (side, ys, wall, xs) in corners.items():
            gs = float(np.asarray(side(np.array([ys]), t))[0])
            gw = float(np.asarray(wall(np.array([xs]), t))[0])
            if abs(gs - gw) > tol:
                out.append(Finding(
                    "warning", "corner-mismatch",
                    f"edge data disagree at corner {label}, t={t:g}: {gs:g} vs {gw:g};"
                    " the bottom/top value is used"))
                break
        else:
            continue
        break

    x = np.linspace(0.0, problem.Lx, 9)
    y = np.linspace(0.0, problem.Ly, 9)
    X, Y = np.meshgrid(x, y, indexing="ij")
    U0 = np.asarray(problem.initial_value(X, Y), dtype=float) * np.ones_like(X)
    B0 = bc.fill(U0.copy(), x, y, 0.0)
    err = float(np.max(np.abs(U0 - B0)))
    if err > tol:
        out.append(Finding("warning", "initial-boundary-mismatch",
                           f"initial value and boundary data differ by {err:.3e} at t = 0"))
    return out


# }}}

# {{{ concrete problems


def manufactured_problem(superone_terms=(), b1: float = 1.0, b2: float = 1.0, b3: float = 1.0,
                         subone_terms=(), laplacian_memory_terms=(), T: float = 1.0,
                         name: str = "manufactured") -> MultiTermProblem:
    """Problem on the unit square whose exact solution is
    ``u = (t^3 + 1) sin(pi x) sin(pi y)``; the source is built to match."""
    sup = tuple(Term(float(c), float(o)) for c, o in superone_terms)
    sub = tuple(Term(float(c), float(o)) for c, o in subone_terms)
    lap = tuple(Term(float(c), float(o)) for c, o in laplacian_memory_terms)
    pi2 = math.pi**2

    def caputo_cubic(t: float, mu: float) -> float:
        # Caputo derivative of t^3 + 1 of order mu
        return 6.0 * t ** (3.0 - mu) / math.gamma(4.0 - mu)

    def time_factor(t: float) -> float:
        g = sum(c * caputo_cubic(t, mu) for c, mu in sup + sub)
        m = sum(d * caputo_cubic(t, mu) for d, mu in lap)
        return g + 3.0 * b1 * t * t + (b2 + 2.0 * pi2 * b3) * (t**3 + 1.0) + 2.0 * pi2 * m

    def mode(x, y):
        return np.sin(np.pi * x) * np.sin(np.pi * y)

    return MultiTermProblem(
        superone_terms=sup, b1=b1, b2=b2, b3=b3, subone_terms=sub, laplacian_memory_terms=lap,
        source=lambda x, y, t: time_factor(t) * mode(x, y),
        initial_value=mode,
        initial_rate=_zero_s,
        T=T,
        exact=lambda x, y, t: (t**3 + 1.0) * mode(x, y),
        name=name,
    )


def example1_problem(gammas=(1.8, 1.6), alphas=(0.8, 0.6), betas=(0.8, 0.6),
                     T: float = 1.0) -> MultiTermProblem:
    """Manufactured cubic-in-time problem with every coefficient equal to one."""
    return manufactured_problem(
        superone_terms=[(1.0, g) for g in gammas],
        subone_terms=[(1.0, a) for a in alphas],
        laplacian_memory_terms=[(1.0, b) for b in betas],
        T=T, name="example1")


def heat_equation_problem(T: float = 0.1) -> MultiTermProblem:
    """``u_t = Lap u`` with the decaying mode ``exp(-2 pi^2 t) sin(pi x) sin(pi y)``."""

    def mode(x, y):
        return np.sin(np.pi * x) * np.sin(np.pi * y)

    return MultiTermProblem(
        b1=1.0, b2=0.0, b3=1.0,
        initial_value=mode,
        initial_rate=lambda x, y: -2.0 * np.pi**2 * mode(x, y),
        T=T,
        exact=lambda x, y, t: np.exp(-2.0 * np.pi**2 * t) * mode(x, y),
        name="heat",
    )


def oldroyd_to_multiterm(relaxation: float, viscosity: float, alpha: float, beta: float,
                         acceleration: float = 1.0, L: float = 5.0, d: float = 5.0,
                         T: float = 1.0, retardation: float | None = None) -> MultiTermProblem:
    """Map the generalized Oldroyd-B channel flow

        (1 + lam^alpha D^alpha) u_t = nu (1 + theta^beta D^beta) Lap u

    onto the multi-term form, using ``D^alpha u_t = D^(1+alpha) u``. The
    plate at ``x = 0`` moves with velocity ``A t``; the other walls are at
    rest. ``retardation`` defaults to ``relaxation``.
    """
    if not relaxation > 0 or not viscosity > 0:
        raise ValueError("relaxation time and viscosity must be positive")
    if retardation is None:
        retardation = relaxation
    if not retardation > 0:
        raise ValueError("retardation time must be positive")
    for name, value in (("alpha", alpha), ("beta", beta)):
        if not 0.0 < value < 1.0:
            raise ValueError(f"{name} must lie in (0, 1), got {value}")

    A = float(acceleration)
    return MultiTermProblem(
        superone_terms=(Term(relaxation**alpha, 1.0 + alpha),),
        b1=1.0, b2=0.0, b3=viscosity,
        laplacian_memory_terms=(Term(viscosity * retardation**beta, beta),),
        boundary=BoundarySpec(left=lambda y, t: A * t * np.ones(np.shape(y))),
        Lx=L, Ly=d, T=T,
        name="oldroyd-b",
    )


# }}}
