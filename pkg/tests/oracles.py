"""Independent reference implementations used only by the tests.

Nothing here imports the weight or assembly code under test: weights are
evaluated in high precision with mpmath straight from their closed forms and
the scheme is evaluated node by node in its undivided form.
"""

from __future__ import annotations

import math

import mpmath as mp
import numpy as np

mp.mp.dps = 40
HALF = mp.mpf(1) / 2


def a_sub(alpha, k):
    alpha = mp.mpf(alpha)
    if k == 0:
        return HALF ** (1 - alpha)
    return (k + HALF) ** (1 - alpha) - (k - HALF) ** (1 - alpha)


def b_sub(alpha, k):
    alpha = mp.mpf(alpha)
    return (((k + HALF) ** (2 - alpha) - (k - HALF) ** (2 - alpha)) / (2 - alpha)
            - ((k + HALF) ** (1 - alpha) + (k - HALF) ** (1 - alpha)) / 2)


def c_sub(alpha, n):
    """Half-step weights ``c_0..c_{n-1}`` of step ``n`` as floats."""
    if n == 1:
        return [float(a_sub(alpha, 0))]
    c = [a_sub(alpha, 0) + b_sub(alpha, 1)]
    for k in range(1, n - 1):
        c.append(a_sub(alpha, k) + b_sub(alpha, k + 1) - b_sub(alpha, k))
    c.append(a_sub(alpha, n - 1) - b_sub(alpha, n - 1))
    return [float(v) for v in c]


def a_super(gamma, k):
    gamma = mp.mpf(gamma)
    return float((k + 1) ** (2 - gamma) - mp.mpf(k) ** (2 - gamma))


def lap(u, hx, hy):
    """Five-point Laplacian at interior nodes, written out loop by loop."""
    mx, my = u.shape[0] - 2, u.shape[1] - 2
    out = np.zeros((mx, my))
    for i in range(1, mx + 1):
        for j in range(1, my + 1):
            out[i - 1, j - 1] = ((u[i - 1, j] - 2 * u[i, j] + u[i + 1, j]) / hx**2
                                 + (u[i, j - 1] - 2 * u[i, j] + u[i, j + 1]) / hy**2)
    return out


class SchemeOracle:
    """Residual of the undivided scheme at step ``n``.

    ``residual(U, n)`` evaluates, at every interior node,

        sum_l a_l mu1 [a_0 dU^n - sum_k (a_{n-k-1} - a_{n-k}) dU^k - a_{n-1} phi]
        + b1 dU^n + sum_m c_m mu2 sum_k c_{n-k} dU^k + b2 U^{n-1/2}
        - b3 Lap U^{n-1/2} - sum_r d_r mu3 sum_k c_{n-k} Lap dU^k - f^{n-1/2}

    with ``dU^k = (U^k - U^{k-1}) / tau`` taken from the array ``U``.
    """

    def __init__(self, problem, grid):
        self.p = problem
        self.g = grid
        X, Y = grid.mesh()
        self.X, self.Y = X, Y
        self.phi = np.broadcast_to(problem.initial_rate(X, Y), grid.shape).astype(float)

    def residual(self, U, n):
        p, g = self.p, self.g
        tau, hx, hy = g.tau, g.hx, g.hy
        inner = (slice(1, -1), slice(1, -1))
        d = [None] + [(U[k] - U[k - 1]) / tau for k in range(1, n + 1)]
        res = p.b1 * d[n][inner]
        for coef, gamma in p.superone_terms:
            mu = tau ** (1 - gamma) / math.gamma(3 - gamma)
            a = [a_super(gamma, k) for k in range(n + 1)]
            br = a[0] * d[n][inner] - a[n - 1] * self.phi[inner]
            for k in range(1, n):
                br = br - (a[n - k - 1] - a[n - k]) * d[k][inner]
            res = res + coef * mu * br
        for coef, alpha in p.subone_terms:
            mu = tau ** (1 - alpha) / math.gamma(2 - alpha)
            c = c_sub(alpha, n)
            res = res + coef * mu * sum(c[n - k] * d[k][inner] for k in range(1, n + 1))
        half = 0.5 * (U[n] + U[n - 1])
        res = res + p.b2 * half[inner] - p.b3 * lap(half, hx, hy)
        for coef, beta in p.laplacian_memory_terms:
            mu = tau ** (1 - beta) / math.gamma(2 - beta)
            c = c_sub(beta, n)
            res = res - coef * mu * sum(c[n - k] * lap(d[k], hx, hy) for k in range(1, n + 1))
        f = 0.5 * (p.source(self.X, self.Y, n * tau) + p.source(self.X, self.Y, (n - 1) * tau))
        res = res - np.broadcast_to(f, g.shape)[inner]
        return res

    def _with_level(self, U, n, interior):
        V = np.array(U[: n + 1], dtype=float)
        V[n] = 0.0
        self.p.boundary.fill(V[n], self.g.x, self.g.y, n * self.g.tau)
        V[n][1:-1, 1:-1] = interior
        return V

    def linear_system(self, U, n):
        """Dense ``(A, b)`` such that ``residual = A x - b`` for the level-``n``
        interior unknowns ``x``, built column by column."""
        mx, my = self.g.interior_shape
        m = mx * my
        r0 = self.residual(self._with_level(U, n, np.zeros((mx, my))), n).ravel()
        A = np.zeros((m, m))
        for col in range(m):
            e = np.zeros(m)
            e[col] = 1.0
            A[:, col] = self.residual(self._with_level(U, n, e.reshape(mx, my)), n).ravel() - r0
        return A, -r0


def modal_solution(gammas, alphas, betas, M, N, T=1.0):
    """Amplitude ``u_N`` of the ``sin(pi x) sin(pi y)`` mode for the
    manufactured problem with unit coefficients.

    The discrete solution stays in that mode, so the 2D scheme collapses to
    a scalar recurrence with the five-point eigenvalue in place of the
    Laplacian.
    """
    h = 1.0 / M
    tau = T / N
    lam = 8.0 / h**2 * math.sin(math.pi * h / 2) ** 2
    pi2 = math.pi**2

    def f(t):
        s = 6 * sum(t ** (3 - g) / math.gamma(4 - g) for g in list(gammas) + list(alphas))
        s += 3 * t * t + (1 + 2 * pi2) * (t**3 + 1)
        s += 2 * pi2 * 6 * sum(t ** (3 - b) / math.gamma(4 - b) for b in betas)
        return s

    A = {g: [a_super(g, k) for k in range(N + 1)] for g in gammas}
    C = {}
    u = [1.0]
    d = [0.0]
    for n in range(1, N + 1):
        lead, const = 1.0, 0.0  # residual = lead * d_n + (1 + lam) u^{n-1/2} + const
        for g in gammas:
            mu = tau ** (1 - g) / math.gamma(3 - g)
            a = A[g]
            lead += mu * a[0]
            const -= mu * sum((a[n - k - 1] - a[n - k]) * d[k] for k in range(1, n))
        for o, scale in [(x, 1.0) for x in alphas] + [(x, lam) for x in betas]:
            if (o, n) not in C:
                C[(o, n)] = c_sub(o, n)
            c = C[(o, n)]
            mu = scale * tau ** (1 - o) / math.gamma(2 - o)
            lead += mu * c[0]
            const += mu * sum(c[n - k] * d[k] for k in range(1, n))
        const -= 0.5 * (f(n * tau) + f((n - 1) * tau))
        um = u[-1]
        x = (lead * um / tau - (1 + lam) * um / 2 - const) / (lead / tau + (1 + lam) / 2)
        u.append(x)
        d.append((x - um) / tau)
    return u[-1]
