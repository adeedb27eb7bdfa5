"""Convolution weights for discrete Caputo derivatives.

Two families are provided:

* orders ``0 < alpha < 1`` use the half-step weights ``c_k`` built from the
  ``a_k`` and ``b_k`` sequences (quadratic interpolation on full past
  intervals, linear interpolation on the final half interval);
* orders ``1 < gamma < 2`` use the L1-type weights ``a_k = (k+1)^(2-gamma) - k^(2-gamma)``,
  applied to the first-order increments of the solution.

Weights are evaluated from their closed forms in double precision,
rearranged so that differences of nearby powers do not cancel: power
differences go through ``expm1``/``log1p`` and ``b_k`` switches to its
even series in ``1/(2k)`` for ``k >= 2``.
"""

from __future__ import annotations

import enum
import math
import threading
from dataclasses import dataclass

import numpy as np

__all__ = [
    "FracOrder",
    "OrderKind",
    "SubOneKernel",
    "WeightTable",
    "quadratic_form",
    "sub_one_a",
    "sub_one_b",
    "sub_one_weights",
    "super_one_weights",
]

class OrderKind(enum.Enum):
    SubOne = "sub_one"
    SuperOne = "super_one"


@dataclass(frozen=True)
class FracOrder:
    """A fractional order together with the interval it belongs to.

    Construction rejects the integer endpoints 0, 1 and 2.
    """

    value: float
    kind: OrderKind

    def __post_init__(self) -> None:
        v = float(self.value)
        if not math.isfinite(v):
            raise ValueError(f"fractional order must be finite, got {self.value!r}")
        if self.kind is OrderKind.SubOne and not 0.0 < v < 1.0:
            raise ValueError(f"sub-one order must lie in (0, 1), got {v}")
        if self.kind is OrderKind.SuperOne and not 1.0 < v < 2.0:
            raise ValueError(f"super-one order must lie in (1, 2), got {v}")
        object.__setattr__(self, "value", v)

    @classmethod
    def sub_one(cls, value: float) -> FracOrder:
        return cls(value, OrderKind.SubOne)

    @classmethod
    def super_one(cls, value: float) -> FracOrder:
        return cls(value, OrderKind.SuperOne)

    @classmethod
    def infer(cls, value: float) -> FracOrder:
        """Pick the kind from the value (orders in (0, 1) or (1, 2))."""
        if 0.0 < value < 1.0:
            return cls.sub_one(value)
        return cls.super_one(value)

    def __float__(self) -> float:
        return self.value


def _as_order(order: FracOrder | float, kind: OrderKind) -> FracOrder:
    if isinstance(order, FracOrder):
        if order.kind is not kind:
            raise ValueError(f"expected a {kind.value} order, got {order.kind.value}")
        return order
    return FracOrder(order, kind)


@dataclass(frozen=True)
class WeightTable:
    """Weights ``w_0, ..., w_{n-1}`` for step ``n``.

    For sub-one orders these are the ``c_k`` (the last entry depends on
    ``n``); for super-one orders they are the ``a_k``.
    """

    order: FracOrder
    n: int
    weights: np.ndarray

    def __post_init__(self) -> None:
        self.weights.setflags(write=False)

    def __len__(self) -> int:
        return self.n

    def __getitem__(self, k):
        return self.weights[k]


# {{{ sub-one weights


def _power_difference(p: float, k: np.ndarray, d: float) -> np.ndarray:
    """``(k + d)^p - (k - d)^p`` for ``k > d >= 0`` without cancellation."""
    x = d / k
    return k**p * (np.expm1(p * np.log1p(x)) - np.expm1(p * np.log1p(-x)))


# b_k for large k: with x = 1/(2k) and q = 1 - alpha,
#   b_k = -k^q sum_{j>=1} binom(q, 2j) 2j/(2j+1) x^(2j),
# which avoids the O(k^q) cancellation of the closed form.
_B_SERIES_FROM = 2
_B_SERIES_TERMS = 16


def _b_series_coefficients(alpha: float) -> np.ndarray:
    q = 1.0 - alpha
    coef = np.empty(_B_SERIES_TERMS)
    binom = 1.0
    for m in range(1, 2 * _B_SERIES_TERMS + 1):
        binom *= (q - m + 1) / m
        if m % 2 == 0:
            j = m // 2
            coef[j - 1] = -binom * m / (m + 1)
    return coef


def _sub_one_a_array(alpha: float, k: np.ndarray) -> np.ndarray:
    k = np.asarray(k, dtype=np.float64)
    p = 1.0 - alpha
    safe = np.where(k > 0, k, 1.0)
    return np.where(k > 0, _power_difference(p, safe, 0.5), 0.5**p)


def _sub_one_b_array(alpha: float, k: np.ndarray) -> np.ndarray:
    k = np.asarray(k, dtype=np.float64)
    kp, km = k + 0.5, k - 0.5
    closed = ((kp ** (2.0 - alpha) - km ** (2.0 - alpha)) / (2.0 - alpha)
              - 0.5 * (kp ** (1.0 - alpha) + km ** (1.0 - alpha)))
    large = k >= _B_SERIES_FROM
    if not np.any(large):
        return closed
    kl = np.where(large, k, float(_B_SERIES_FROM))
    x2 = 0.25 / kl**2
    coef = _b_series_coefficients(alpha)
    acc = np.zeros_like(kl)
    for c in coef[::-1]:
        acc = (acc + c) * x2
    return np.where(large, kl ** (1.0 - alpha) * acc, closed)


def sub_one_a(alpha: FracOrder | float, k: int) -> float:
    """Return ``a_k``: ``(1/2)^(1-alpha)`` for ``k = 0``, else
    ``(k+1/2)^(1-alpha) - (k-1/2)^(1-alpha)``."""
    a = _as_order(alpha, OrderKind.SubOne).value
    if k < 0:
        raise ValueError(f"index must be nonnegative, got {k}")
    return float(_sub_one_a_array(a, np.array(k)))


def sub_one_b(alpha: FracOrder | float, k: int) -> float:
    """Return ``b_k`` for ``k >= 1`` (``b_0`` is not defined)."""
    a = _as_order(alpha, OrderKind.SubOne).value
    if k < 1:
        raise ValueError(f"b_k is defined for k >= 1, got {k}")
    return float(_sub_one_b_array(a, np.array(k)))


class SubOneKernel:
    """Append-only cache of the ``a_k``/``b_k`` sequences for one order.

    The ``c_k`` table of step ``n`` shares every interior entry with step
    ``n + 1``; only ``c_0`` (between ``n = 1`` and ``n = 2``) and the tail
    weight ``c_{n-1}`` differ. :meth:`weights` therefore slices the cached
    prefix and patches those entries.

    Extension takes a lock; tables handed out are read-only copies.
    """

    def __init__(self, alpha: FracOrder | float, capacity: int = 64) -> None:
        self.order = _as_order(alpha, OrderKind.SubOne)
        self._a = np.empty(0)
        self._b = np.empty(0)
        self._lock = threading.Lock()
        self._extend(capacity)

    @property
    def alpha(self) -> float:
        return self.order.value

    def _extend(self, size: int) -> None:
        with self._lock:
            old = self._a.size
            if size <= old:
                return
            size = max(size, 2 * old)
            k = np.arange(old, size)
            a = _sub_one_a_array(self.alpha, k)
            # b_0 is undefined; store a zero placeholder
            b = np.where(k >= 1, _sub_one_b_array(self.alpha, np.maximum(k, 1)), 0.0)
            self._a = np.concatenate([self._a, a])
            self._b = np.concatenate([self._b, b])

    def a(self, n: int) -> np.ndarray:
        """``a_0, ..., a_{n-1}``."""
        self._extend(n)
        return self._a[:n]

    def b(self, n: int) -> np.ndarray:
        """``b_0, ..., b_{n-1}`` with ``b_0 = 0`` as a placeholder."""
        self._extend(n)
        return self._b[:n]

    def weights(self, n: int) -> np.ndarray:
        """Return the ``c_0, ..., c_{n-1}`` weights of step ``n``."""
        if n < 1:
            raise ValueError(f"step index must be >= 1, got {n}")
        self._extend(n + 1)
        a, b = self._a, self._b
        if n == 1:
            return np.array([a[0]])
        c = a[:n] + b[1:n + 1] - b[:n]
        c[0] = a[0] + b[1]
        c[n - 1] = a[n - 1] - b[n - 1]
        return c

    def table(self, n: int) -> WeightTable:
        return WeightTable(self.order, n, self.weights(n))


def sub_one_weights(alpha: FracOrder | float, n: int) -> WeightTable:
    """Half-step Caputo weights ``c_0, ..., c_{n-1}`` for step ``n``."""
    return SubOneKernel(alpha, capacity=n + 1).table(n)


# }}}

# {{{ super-one weights


def _super_one_a_array(gamma: float, k: np.ndarray) -> np.ndarray:
    k = np.asarray(k, dtype=np.float64)
    q = 2.0 - gamma
    safe = np.where(k > 0, k, 1.0)
    # (k+1)^q - k^q = k^q expm1(q log1p(1/k))
    return np.where(k > 0, safe**q * np.expm1(q * np.log1p(1.0 / safe)), 1.0)


def super_one_weights(gamma: FracOrder | float, n: int) -> WeightTable:
    """Weights ``a_k = (k+1)^(2-gamma) - k^(2-gamma)`` for ``k < n``."""
    g = _as_order(gamma, OrderKind.SuperOne)
    if n < 1:
        raise ValueError(f"step index must be >= 1, got {n}")
    return WeightTable(g, n, _super_one_a_array(g.value, np.arange(n)))


# }}}


def quadratic_form(alpha: FracOrder | float, v) -> float:
    r"""Evaluate :math:`\sum_{n=1}^N \sum_{k=1}^n c^{(n)}_{n-k} v_k v_n`.

    The inner weights come from the step-``n`` table, so the kernel matrix
    is lower triangular but not Toeplitz in its first column.
    """
    v = np.asarray(v, dtype=np.float64)
    kernel = SubOneKernel(alpha, capacity=v.size + 1)
    total = 0.0
    for n in range(1, v.size + 1):
        c = kernel.weights(n)
        # c_{n-k} v_k for k = 1..n
        total += v[n - 1] * float(np.dot(c[::-1], v[:n]))
    return total


def kernel_matrix(alpha: FracOrder | float, size: int) -> np.ndarray:
    """Dense lower-triangular matrix ``K[n-1, k-1] = c^{(n)}_{n-k}``."""
    kernel = SubOneKernel(alpha, capacity=size + 1)
    K = np.zeros((size, size))
    for n in range(1, size + 1):
        K[n - 1, :n] = kernel.weights(n)[::-1]
    return K
