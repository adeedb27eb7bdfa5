"""Reference error tables for the manufactured cubic-in-time problem.

Each case lists the orders ``(gammas, alphas, betas)`` (the Laplacian memory
orders equal the sub-one orders) and rows of
``(refinement, l2, l2_order, linf, linf_order)``. The spatial tables use
``tau = 1/1000`` at ``t = 1``; the temporal tables couple ``h`` to ``tau``
through ``tau^q = h^2`` with ``q`` the scheme's temporal order.
"""

from __future__ import annotations

from typing import NamedTuple


class ReferenceRow(NamedTuple):
    refinement: str
    l2: float
    l2_order: float | None
    linf: float
    linf_order: float | None


class ReferenceCase(NamedTuple):
    gammas: tuple[float, float]
    alphas: tuple[float, float]
    betas: tuple[float, float]
    rows: tuple[ReferenceRow, ...]


CASE_ORDERS = (
    ((1.8, 1.6), (0.8, 0.6), (0.8, 0.6)),
    ((1.4, 1.2), (0.6, 0.4), (0.6, 0.4)),
)

SPATIAL_TAU = 1 / 1000
SPATIAL_H = (1 / 4, 1 / 8, 1 / 16, 1 / 32, 1 / 64)
TEMPORAL_TAU = (1 / 20, 1 / 40, 1 / 80, 1 / 160, 1 / 320)

SPATIAL = (
    ReferenceCase(*CASE_ORDERS[0], rows=(
        ReferenceRow("1/4", 3.1425e-02, None, 6.2850e-02, None),
        ReferenceRow("1/8", 7.7096e-03, 2.03, 1.5419e-02, 2.03),
        ReferenceRow("1/16", 1.9092e-03, 2.01, 3.8185e-03, 2.01),
        ReferenceRow("1/32", 4.6706e-04, 2.03, 9.3413e-04, 2.03),
        ReferenceRow("1/64", 1.0701e-04, 2.13, 2.1402e-04, 2.13),
    )),
    ReferenceCase(*CASE_ORDERS[1], rows=(
        ReferenceRow("1/4", 3.1612e-02, None, 6.3224e-02, None),
        ReferenceRow("1/8", 7.7561e-03, 2.03, 1.5512e-02, 2.03),
        ReferenceRow("1/16", 1.9248e-03, 2.01, 3.8497e-03, 2.01),
        ReferenceRow("1/32", 4.7517e-04, 2.02, 9.5033e-04, 2.02),
        ReferenceRow("1/64", 1.1326e-04, 2.07, 2.2652e-04, 2.07),
    )),
)

TEMPORAL = (
    ReferenceCase(*CASE_ORDERS[0], rows=(
        ReferenceRow("1/20", 1.2344e-02, None, 2.4689e-02, None),
        ReferenceRow("1/40", 5.4202e-03, 1.19, 1.0513e-02, 1.23),
        ReferenceRow("1/80", 2.2146e-03, 1.29, 4.4293e-03, 1.25),
        ReferenceRow("1/160", 9.8769e-04, 1.16, 1.9643e-03, 1.17),
        ReferenceRow("1/320", 4.2609e-04, 1.21, 8.5217e-04, 1.20),
    )),
    ReferenceCase(*CASE_ORDERS[1], rows=(
        ReferenceRow("1/20", 6.1264e-03, None, 1.2253e-02, None),
        ReferenceRow("1/40", 2.2731e-03, 1.43, 4.4801e-03, 1.45),
        ReferenceRow("1/80", 8.6577e-04, 1.39, 1.7219e-03, 1.38),
        ReferenceRow("1/160", 3.0586e-04, 1.50, 6.1050e-04, 1.50),
        ReferenceRow("1/320", 1.1523e-04, 1.41, 2.3028e-04, 1.41),
    )),
)
