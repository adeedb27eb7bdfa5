"""Convergence studies and coefficient property batteries."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import brentq

from fracflow.grid import (
    GridField,
    UniformGrid2D,
    caputo_halfstep,
    caputo_superone_halfstep,
    gradient_inner_product,
    inner_product,
    l2_norm,
    linf_norm,
)
from fracflow.kernels import (
    SubOneKernel,
    _sub_one_a_array,
    _sub_one_b_array,
    kernel_matrix,
    super_one_weights,
)
from fracflow.problem import MultiTermProblem
from fracflow.scheme import RunRecord, run

__all__ = [
    "ConvergenceRow",
    "PropertyReport",
    "TruncationResult",
    "compare_with_reference",
    "curvature_sign_report",
    "energy",
    "energy_bound",
    "energy_inequality_gap",
    "energy_inequality_reports",
    "example2_checks",
    "property_suite",
    "quadratic_form_reports",
    "reports_to_csv",
    "rows_to_csv",
    "solution_errors",
    "spatial_study",
    "stability_smoke",
    "subone_ab_reports",
    "subone_weight_reports",
    "superone_weight_reports",
    "temporal_study",
    "truncation_study",
]

ORDER_GRID = tuple(round(0.1 * i, 1) for i in range(1, 10))
SUPER_ORDER_GRID = tuple(round(1.0 + 0.1 * i, 1) for i in range(1, 10))


def _label(value: float) -> str:
    frac = Fraction(value).limit_denominator(100000)
    if frac.numerator == 1:
        return f"1/{frac.denominator}"
    return f"{value:.6g}"


def _order(prev: float | None, curr: float, p_prev: float | None, p_curr: float):
    if prev is None or p_prev is None or prev <= 0 or curr <= 0:
        return None
    return math.log(prev / curr) / math.log(p_prev / p_curr)


# {{{ convergence studies


@dataclass
class ConvergenceRow:
    label: str
    h: float
    tau: float
    Mx: int
    N: int
    l2: float
    linf: float
    l2_order: float | None = None
    linf_order: float | None = None


def solution_errors(record: RunRecord, n: int | None = None) -> tuple[float, float]:
    """Discrete L2 and interior max errors against the attached exact solution."""
    problem = record.problem
    if problem.exact is None:
        raise ValueError(f"problem {problem.name!r} has no exact solution attached")
    n = record.n if n is None else n
    X, Y = record.grid.mesh()
    err = GridField(record.grid, record.U[n] - problem.exact(X, Y, record.time(n)))
    return l2_norm(err), linf_norm(err)


def _fill_orders(rows: list[ConvergenceRow], attr: str) -> list[ConvergenceRow]:
    for prev, curr in zip(rows, rows[1:]):
        p_prev, p_curr = getattr(prev, attr), getattr(curr, attr)
        curr.l2_order = _order(prev.l2, curr.l2, p_prev, p_curr)
        curr.linf_order = _order(prev.linf, curr.linf, p_prev, p_curr)
    return rows


def _grid_for(problem: MultiTermProblem, M: int, N: int, t_eval: float) -> UniformGrid2D:
    My = max(2, round(M * problem.Ly / problem.Lx))
    return UniformGrid2D(problem.Lx, problem.Ly, M, My, t_eval, N)


def spatial_study(problem: MultiTermProblem, hs: Sequence[float], tau: float,
                  t_eval: float | None = None, solver: str = "direct") -> list[ConvergenceRow]:
    """Refine ``h`` at fixed ``tau``; errors are measured at ``t_eval``."""
    if problem.exact is None:
        raise ValueError("spatial study needs an exact solution")
    t_eval = problem.T if t_eval is None else t_eval
    N = round(t_eval / tau)
    rows = []
    for h in hs:
        M = round(problem.Lx / h)
        record = run(problem, _grid_for(problem, M, N, t_eval), solver=solver)
        l2, linf = solution_errors(record)
        rows.append(ConvergenceRow(_label(h), problem.Lx / M, t_eval / N, M, N, l2, linf))
    return _fill_orders(rows, "h")


def temporal_study(problem: MultiTermProblem, taus: Sequence[float],
                   t_eval: float | None = None, order: float | None = None,
                   solver: str = "direct") -> list[ConvergenceRow]:
    """Refine ``tau`` with ``h = tau^(q/2)`` so that both error terms balance.

    ``q`` defaults to the scheme's temporal order for ``problem``. The cell
    count is ``round(Lx / h)``; the ``h`` actually used is recorded per row.
    """
    if problem.exact is None:
        raise ValueError("temporal study needs an exact solution")
    t_eval = problem.T if t_eval is None else t_eval
    q = problem.temporal_order if order is None else order
    rows = []
    for tau in taus:
        N = round(t_eval / tau)
        M = max(2, round(problem.Lx / tau ** (q / 2)))
        record = run(problem, _grid_for(problem, M, N, t_eval), solver=solver)
        l2, linf = solution_errors(record)
        rows.append(ConvergenceRow(_label(tau), problem.Lx / M, t_eval / N, M, N, l2, linf))
    return _fill_orders(rows, "tau")


def rows_to_csv(rows: Sequence[ConvergenceRow], comment: str | None = None) -> str:
    """Table layout: refinement, L2, order, Linf, order (plus grid details)."""
    buf = io.StringIO()
    if comment:
        buf.write(f"# {comment}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["refinement", "l2_error", "l2_order", "linf_error", "linf_order",
                     "h", "tau", "Mx", "N"])

    def fmt(v):
        return "" if v is None else f"{v:.4f}"

    for r in rows:
        writer.writerow([r.label, f"{r.l2:.6e}", fmt(r.l2_order), f"{r.linf:.6e}",
                         fmt(r.linf_order), repr(r.h), repr(r.tau), r.Mx, r.N])
    return buf.getvalue()


def compare_with_reference(rows: Sequence[ConvergenceRow], reference, kind: str,
                           rel_tol: float = 0.15, order_range=None,
                           order_window: float | None = None) -> list[PropertyReport]:
    """Row-by-row comparison against a reference table.

    Errors must agree within ``rel_tol`` relative. Orders are checked either
    against a fixed ``order_range`` or within ``order_window`` of the
    reference row's own order.
    """
    if len(rows) != len(reference.rows):
        raise ValueError(f"{len(rows)} rows against {len(reference.rows)} reference rows")
    params = {"gammas": reference.gammas, "alphas": reference.alphas}
    out = []
    for row, ref in zip(rows, reference.rows):
        for norm in ("l2", "linf"):
            got, want = getattr(row, norm), getattr(ref, norm)
            dev = abs(got - want) / want
            out.append(PropertyReport(f"{kind}.{norm}_error", {**params, "row": ref.refinement},
                                      bool(dev <= rel_tol), rel_tol - dev,
                                      note=f"got {got:.4e}, reference {want:.4e}"))
            got_o, want_o = getattr(row, norm + "_order"), getattr(ref, norm + "_order")
            if want_o is None:
                continue
            if got_o is None:
                out.append(PropertyReport(f"{kind}.{norm}_order", {**params, "row": ref.refinement},
                                          False, -math.inf, note="order missing"))
                continue
            if order_range is not None:
                lo, hi = order_range
                margin = min(got_o - lo, hi - got_o)
            else:
                margin = order_window - abs(got_o - want_o)
            out.append(PropertyReport(f"{kind}.{norm}_order", {**params, "row": ref.refinement},
                                      bool(margin >= 0), float(margin),
                                      note=f"got {got_o:.3f}, reference {want_o:.2f}"))
    return out


def reports_to_csv(reports: Sequence[PropertyReport], comment: str | None = None) -> str:
    buf = io.StringIO()
    if comment:
        buf.write(f"# {comment}\n")
    cols = ["property_id", "parameters", "passed", "margin", "seed", "note"]
    writer = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n")
    writer.writeheader()
    for r in reports:
        row = r.as_row()
        row["margin"] = repr(float(row["margin"]))
        row["seed"] = "" if row["seed"] is None else row["seed"]
        writer.writerow(row)
    return buf.getvalue()


# }}}

# {{{ truncation study


@dataclass
class TruncationResult:
    order: float
    taus: list[float]
    errors: list[float]
    fitted_order: float
    pairwise_orders: list[float]


def truncation_study(u: Callable[[np.ndarray], np.ndarray],
                     exact: Callable[[float], float], order: float,
                     taus: Sequence[float], T: float = 1.0,
                     initial_rate: float = 0.0) -> TruncationResult:
    """Error of the discrete Caputo operator at ``t_{N-1/2}`` on ``[0, T]``.

    ``exact(t)`` must return the Caputo derivative of ``u`` of the given
    order. Orders in (0, 1) use the half-step kernel, orders in (1, 2) the
    increment kernel with ``initial_rate = u'(0)``. The fitted order is the
    least-squares slope of ``log(error)`` against ``log(tau)``.
    """
    if len(taus) < 3:
        raise ValueError("need at least three step sizes")
    errors = []
    for tau in taus:
        N = round(T / tau)
        t = np.arange(N + 1) * (T / N)
        values = np.asarray(u(t), dtype=np.float64)
        if 0.0 < order < 1.0:
            approx = caputo_halfstep(list(values), order, T / N)
        else:
            increments = np.diff(values) / (T / N)
            approx = caputo_superone_halfstep(list(increments), initial_rate, order, T / N)
        errors.append(abs(float(approx) - exact(T - 0.5 * T / N)))
    e = np.array(errors)
    logs = np.log(np.asarray(taus, dtype=np.float64))
    with np.errstate(divide="ignore", invalid="ignore"):
        slope = float(np.polyfit(logs, np.log(e), 1)[0]) if np.all(e > 0) else math.nan
        pairwise = list(np.log(e[:-1] / e[1:]) / (logs[:-1] - logs[1:]))
    return TruncationResult(order, list(taus), errors, slope, [float(p) for p in pairwise])


# }}}

# {{{ energy


def energy(record: RunRecord, n: int) -> float:
    """``b2 ||U^n||_0^2 + b3 |U^n|_1^2``."""
    p = record.problem
    f = GridField(record.grid, record.U[n]).with_zero_boundary()
    return p.b2 * inner_product(f, f) + p.b3 * gradient_inner_product(f, f)


def energy_bound(record: RunRecord) -> float:
    """Right-hand side of the a priori energy estimate over the whole run."""
    p, grid = record.problem, record.grid
    T = grid.T
    phi = GridField(grid, record.phi).with_zero_boundary()
    bound = energy(record, 0)
    bound += sum(t.coef * T ** (2 - t.order) / math.gamma(3 - t.order)
                 for t in p.superone_terms) * inner_product(phi, phi)
    denom = sum(t.coef * T ** (1 - t.order) / math.gamma(2 - t.order)
                for t in p.superone_terms) + 2 * p.b1
    fmax = 0.0
    for n in range(1, grid.N + 1):
        fh = GridField(grid, 0.5 * (record.source(n) + record.source(n - 1)))
        fmax = max(fmax, inner_product(fh, fh))
    return bound + T / denom * fmax


def _random_modes(rng: np.random.Generator, count: int = 6):
    kx = rng.integers(1, 6, size=count)
    ky = rng.integers(1, 6, size=count)
    amp = rng.standard_normal(count)

    def func(x, y):
        return sum(a * np.sin(i * np.pi * x) * np.sin(j * np.pi * y)
                   for a, i, j in zip(amp, kx, ky))

    return func


def stability_smoke(taus=(1 / 10, 1 / 40, 1 / 160), M: int = 16, seed: int = 0,
                    problem: MultiTermProblem | None = None) -> list[PropertyReport]:
    """Unforced runs from random modal data: the energy must stay below the
    a priori bound at every step."""
    from dataclasses import replace

    from fracflow.problem import example1_problem

    rng = np.random.default_rng(seed)
    base = example1_problem() if problem is None else problem
    base = replace(base, source=lambda x, y, t: np.zeros(np.broadcast(x, y).shape),
                   initial_value=_random_modes(rng), initial_rate=_random_modes(rng),
                   exact=None, name=f"{base.name}-unforced")
    out = []
    for tau in taus:
        N = round(base.T / tau)
        record = run(base, UniformGrid2D(base.Lx, base.Ly, M, M, base.T, N))
        bound = energy_bound(record)
        worst = min(bound - energy(record, n) for n in range(N + 1))
        out.append(PropertyReport("stability.energy", {"tau": _label(tau), "M": M},
                                  bool(worst >= -1e-12 * max(1.0, bound)), float(worst),
                                  seed=seed, note=f"bound={bound:.6e}"))
    return out


# }}}

# {{{ property batteries


@dataclass
class PropertyReport:
    property_id: str
    parameters: dict
    passed: bool
    margin: float
    seed: int | None = None
    note: str = ""

    def as_row(self) -> dict:
        row = asdict(self)
        row["parameters"] = ";".join(f"{k}={v}" for k, v in self.parameters.items())
        return row


def subone_ab_reports(orders=ORDER_GRID, kmax: int = 10_000) -> list[PropertyReport]:
    out = []
    for alpha in orders:
        a = _sub_one_a_array(alpha, np.arange(kmax + 2))
        # a_k > 0; a_k > a_{k+1} (k >= 1); a_{k+1} - 2 a_k + a_{k-1} >= 0 (k >= 2)
        margin_a = min(a.min(), (a[1:-1] - a[2:]).min(), (a[3:] - 2 * a[2:-1] + a[1:-2]).min())
        out.append(PropertyReport("subone.a_shape", {"alpha": alpha, "kmax": kmax},
                                  bool(a.min() > 0 and (a[1:-1] > a[2:]).all()
                                       and (a[3:] - 2 * a[2:-1] + a[1:-2] >= 0).all()),
                                  float(margin_a)))
        b = _sub_one_b_array(alpha, np.arange(1, kmax + 2))
        ok = bool((b > 0).all() and (b[:-1] > b[1:]).all())
        out.append(PropertyReport("subone.b_shape", {"alpha": alpha, "kmax": kmax}, ok,
                                  float(min(b.min(), (b[:-1] - b[1:]).min()))))
    return out


def subone_weight_reports(orders=ORDER_GRID,
                   steps=range(1, 10_001)) -> list[PropertyReport]:
    out = []
    for alpha in orders:
        kernel = SubOneKernel(alpha, capacity=max(steps) + 2)
        worst_pos = worst_dec = worst_dec_tail = worst_conv = worst_sum = math.inf
        tail_signs = []
        for n in steps:
            c = kernel.weights(n)
            worst_pos = min(worst_pos, c.min())
            if n > 1:
                worst_dec = min(worst_dec, (c[:-1] - c[1:]).min())
            if n > 2:
                worst_dec_tail = min(worst_dec_tail, (c[1:-1] - c[2:]).min())
            d2 = c[2:] - 2 * c[1:-1] + c[:-2]  # centred at k = 1..n-2
            # k >= 2 and k != n - 2
            interior = d2[1:n - 3] if n >= 5 else d2[:0]
            if interior.size:
                worst_conv = min(worst_conv, interior.min())
            if n >= 4:
                tail_signs.append(int(np.sign(d2[n - 3])))
            target = (n - 0.5) ** (1 - alpha)
            worst_sum = min(worst_sum, -abs(c.sum() - target) / target + 1e-12)
        params = {"alpha": alpha, "nmax": max(steps)}
        out.append(PropertyReport("weights.positive", params, bool(worst_pos > 0),
                                  float(worst_pos)))
        out.append(PropertyReport("weights.decreasing", params, bool(worst_dec > 0),
                                  float(worst_dec)))
        # c_0 > c_1 fails for alpha below about 0.345; the rest of the chain holds
        out.append(PropertyReport("weights.decreasing_from_c1", params, bool(worst_dec_tail > 0),
                                  float(worst_dec_tail)))
        out.append(PropertyReport("weights.convex", params, bool(worst_conv > 0), float(worst_conv),
                                  note=f"signs at k=n-2: {sorted(set(tail_signs))}"))
        out.append(PropertyReport("weights.sum", params, bool(worst_sum >= 0), float(worst_sum)))
    return out


def _curvature_at_origin(alpha: float) -> float:
    c = SubOneKernel(alpha, capacity=16).weights(8)
    return float(c[2] - 2 * c[1] + c[0])


def curvature_sign_report(bracket=(0.44, 0.46)) -> PropertyReport:
    lo, hi = bracket
    below = [_curvature_at_origin(a) for a in np.linspace(0.02, lo, 22)]
    above = [_curvature_at_origin(a) for a in np.linspace(hi, 0.98, 27)]
    root = brentq(_curvature_at_origin, 0.05, 0.95, xtol=1e-12)
    ok = max(below) < 0 and min(above) > 0 and lo < root < hi
    return PropertyReport("weights.curvature_sign_change", {"bracket": f"({lo}, {hi})"}, bool(ok),
                          float(min(root - lo, hi - root)), note=f"root={root:.6f}")


def superone_weight_reports(orders=SUPER_ORDER_GRID, kmax: int = 10_000) -> list[PropertyReport]:
    out = []
    for gamma in orders:
        a = np.asarray(super_one_weights(gamma, kmax + 2).weights)
        k = np.arange(1, kmax + 1)
        lower = (2 - gamma) * (k + 1.0) ** (1 - gamma)
        upper = (2 - gamma) * k ** (1.0 - gamma)
        ak = a[1:kmax + 1]
        ns = np.arange(1, kmax + 1)
        # sum_{k<n} (a_k - a_{k+1}) + a_n, evaluated for every n
        partition = np.cumsum(a[:-1] - a[1:])[: kmax] + a[1:kmax + 1]
        margins = [a.min(), (a[:-1] - a[1:]).min(), (ak - lower).min(), (upper - ak).min(),
                   1e-12 - np.abs(partition - 1).max()]
        ok = (a[0] == 1.0 and a.min() > 0 and (a[:-1] > a[1:]).all()
              and (ak >= lower).all() and (ak <= upper).all()
              and np.abs(partition - 1).max() <= 1e-12)
        out.append(PropertyReport("superone.weights",
                                  {"gamma": gamma, "kmax": kmax, "n": int(ns[-1])},
                                  bool(ok), float(min(margins))))
    return out


def quadratic_form_reports(orders=ORDER_GRID, nmax: int = 128, samples: int = 1000,
                   seed: int = 0, eig_nmax: int = 12) -> list[PropertyReport]:
    rng = np.random.default_rng(seed)
    out = []
    for alpha in orders:
        K = kernel_matrix(alpha, nmax)
        sizes = rng.integers(1, nmax + 1, size=samples)
        worst = math.inf
        for N in sizes:
            v = rng.standard_normal(N)
            worst = min(worst, float(v @ K[:N, :N] @ v))
        out.append(PropertyReport("quadratic_form.random", {"alpha": alpha, "nmax": nmax,
                                                    "samples": samples},
                                  bool(worst >= -1e-12), worst, seed=seed))
        # dense oracle: symmetric part must be positive semidefinite
        min_eig = math.inf
        agree = 0.0
        for N in range(1, eig_nmax + 1):
            Ks = 0.5 * (K[:N, :N] + K[:N, :N].T)
            lam, Q = np.linalg.eigh(Ks)
            min_eig = min(min_eig, float(lam.min()))
            v = rng.standard_normal(N)
            direct = float(v @ K[:N, :N] @ v)
            spectral = float(np.sum(lam * (Q.T @ v) ** 2))
            agree = max(agree, abs(direct - spectral) / max(1.0, abs(direct)))
        out.append(PropertyReport("quadratic_form.eigen", {"alpha": alpha, "nmax": eig_nmax},
                                  bool(min_eig >= -1e-12 and agree < 1e-10), min_eig, seed=seed,
                                  note=f"max relative disagreement {agree:.1e}"))
    return out


def energy_inequality_gap(gamma: float, S: np.ndarray, P: float, tau: float,
               a: np.ndarray | None = None) -> float:
    """Left side minus right side of the increment-kernel energy inequality
    with ``T = N tau``."""
    N = S.size
    if a is None:
        a = np.asarray(super_one_weights(gamma, N + 1).weights)
    T = N * tau
    lhs = 0.0
    for n in range(1, N + 1):
        k = np.arange(1, n)
        bracket = a[0] * S[n - 1] - np.dot(a[n - k - 1] - a[n - k], S[k - 1]) - a[n - 1] * P
        lhs += bracket * S[n - 1]
    lhs *= tau ** (1 - gamma) / math.gamma(3 - gamma)
    rhs = (T ** (1 - gamma) / (2 * math.gamma(2 - gamma)) * float(S @ S)
           - T ** (2 - gamma) / (2 * tau * math.gamma(3 - gamma)) * P * P)
    return lhs - rhs


def energy_inequality_reports(orders=SUPER_ORDER_GRID, nmax: int = 200, samples: int = 1000,
                   seed: int = 0) -> list[PropertyReport]:
    rng = np.random.default_rng(seed)
    out = []
    for gamma in orders:
        a = np.asarray(super_one_weights(gamma, nmax + 1).weights)
        # G[n-1, k-1]: coefficient of S_k in the bracket of row n
        G = np.zeros((nmax, nmax))
        for n in range(1, nmax + 1):
            k = np.arange(1, n)
            G[n - 1, k - 1] = -(a[n - k - 1] - a[n - k])
            G[n - 1, n - 1] = a[0]
        worst = math.inf
        for _ in range(samples):
            N = int(rng.integers(1, nmax + 1))
            tau = float(rng.uniform(1e-3, 1.0))
            S = rng.standard_normal(N)
            P = float(rng.standard_normal())
            T = N * tau
            lhs = (float(S @ G[:N, :N] @ S) - P * float(a[:N] @ S)) \
                * tau ** (1 - gamma) / math.gamma(3 - gamma)
            rhs = (T ** (1 - gamma) / (2 * math.gamma(2 - gamma)) * float(S @ S)
                   - T ** (2 - gamma) / (2 * tau * math.gamma(3 - gamma)) * P * P)
            worst = min(worst, lhs - rhs)
        out.append(PropertyReport("superone.energy_inequality",
                                  {"gamma": gamma, "nmax": nmax, "samples": samples},
                                  bool(worst >= -1e-12), worst, seed=seed))
    return out


def property_suite(seed: int = 0, samples: int = 1000) -> list[PropertyReport]:
    """Every coefficient property battery, reproducible from ``seed``."""
    return (subone_ab_reports() + subone_weight_reports() + [curvature_sign_report()]
            + superone_weight_reports()
            + quadratic_form_reports(samples=samples, seed=seed)
            + energy_inequality_reports(samples=samples, seed=seed))


def example2_checks(record: RunRecord, early: float = 0.5, late: float = 1.0,
                    tol: float = 1e-12) -> list[PropertyReport]:
    """Qualitative checks on a driven-plate channel flow run."""
    n_early = round(early / record.grid.tau)
    n_late = round(late / record.grid.tau)
    out = []
    U = record.U[: record.n + 1]
    scale = max(1.0, float(np.abs(U).max()))
    out.append(PropertyReport("example2.nonnegative", {}, bool(U.min() >= -tol * scale),
                              float(U.min())))
    Ul = record.U[n_late][:, 1:-1]
    steps = np.diff(Ul, axis=0)  # along x, away from the driven plate
    out.append(PropertyReport("example2.monotone_decay", {"t": late},
                              bool(steps.max() <= tol * scale), float(-steps.max())))
    gain = record.U[n_late][1:-1, 1:-1] - record.U[n_early][1:-1, 1:-1]
    mx, my = gain.shape
    sample = gain[:: max(1, mx // 10), :: max(1, my // 10)]
    out.append(PropertyReport("example2.increases", {"t0": early, "t1": late},
                              bool(sample.min() > 0), float(sample.min())))
    return out


# }}}
