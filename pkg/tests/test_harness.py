import csv
import io
import math

import numpy as np
import pytest

from fracflow.grid import UniformGrid2D
from fracflow.harness import (
    ConvergenceRow,
    PropertyReport,
    compare_with_reference,
    curvature_sign_report,
    energy,
    energy_bound,
    energy_inequality_gap,
    energy_inequality_reports,
    example2_checks,
    property_suite,
    quadratic_form_reports,
    reports_to_csv,
    rows_to_csv,
    solution_errors,
    spatial_study,
    stability_smoke,
    subone_weight_reports,
    temporal_study,
    truncation_study,
)
from fracflow.kernels import super_one_weights
from fracflow.problem import MultiTermProblem, example1_problem, oldroyd_to_multiterm
from fracflow.reference import SPATIAL, TEMPORAL
from fracflow.scheme import initialize, run

CASE2 = ((1.4, 1.2), (0.6, 0.4), (0.6, 0.4))


# {{{ convergence studies


def test_spatial_case1_first_rows():
    rows = spatial_study(example1_problem(), [1 / 4, 1 / 8], tau=1e-3)
    assert rows[0].l2_order is None and rows[0].linf_order is None
    assert rows[1].label == "1/8" and rows[1].Mx == 8 and rows[1].N == 1000
    assert rows[1].l2 == pytest.approx(7.7096e-03, rel=1e-4)
    assert rows[1].l2_order == pytest.approx(2.03, abs=0.005)


def test_spatial_case2_linf():
    rows = spatial_study(example1_problem(*CASE2), [1 / 16], tau=1e-3)
    assert rows[0].linf == pytest.approx(3.8497e-03, rel=1e-4)


def test_temporal_case1():
    rows = temporal_study(example1_problem(), [1 / 40, 1 / 80])
    assert rows[1].Mx == round(80**0.6) == 14
    assert rows[1].h == pytest.approx(1 / 14)
    assert rows[1].l2 == pytest.approx(2.2146e-03, rel=1e-4)
    assert rows[1].l2_order == pytest.approx(1.29, abs=0.005)


def test_temporal_case2_order():
    rows = temporal_study(example1_problem(*CASE2), [1 / 80, 1 / 160])
    assert rows[1].l2_order == pytest.approx(1.50, abs=0.005)


def test_single_row_has_no_order():
    rows = temporal_study(example1_problem(), [1 / 10])
    assert rows[0].l2_order is None and rows[0].linf_order is None


def test_order_is_log2_ratio_on_halving():
    rows = spatial_study(example1_problem(), [1 / 4, 1 / 8], tau=1 / 50)
    assert rows[1].l2_order == pytest.approx(math.log2(rows[0].l2 / rows[1].l2), rel=1e-12)


def test_exact_field_gives_zero_error():
    p = example1_problem()
    g = UniformGrid2D.unit_square(6, 4)
    rec = initialize(p, g)
    X, Y = g.mesh()
    for k in range(g.N + 1):
        rec.U[k] = p.exact(X, Y, k * g.tau)
    rec.n = g.N
    assert solution_errors(rec) == (0.0, 0.0)


def test_studies_need_exact_solution():
    p = oldroyd_to_multiterm(5.0, 2.0, 0.8, 0.4)
    with pytest.raises(ValueError):
        spatial_study(p, [1 / 4], tau=0.5)
    with pytest.raises(ValueError):
        temporal_study(p, [0.5])
    rec = run(p, UniformGrid2D(5.0, 5.0, 4, 4, N=2))
    with pytest.raises(ValueError):
        solution_errors(rec)


def test_rows_csv():
    rows = [ConvergenceRow("1/4", 0.25, 0.1, 4, 10, 1e-2, 2e-2),
            ConvergenceRow("1/8", 0.125, 0.1, 8, 10, 2.5e-3, 5e-3, 2.0, 2.0)]
    text = rows_to_csv(rows, comment="config=x")
    lines = text.splitlines()
    assert lines[0] == "# config=x"
    assert lines[1] == "refinement,l2_error,l2_order,linf_error,linf_order,h,tau,Mx,N"
    parsed = list(csv.reader(io.StringIO("\n".join(lines[1:]))))
    assert parsed[1][2] == "" and parsed[2][2] == "2.0000"
    assert float(parsed[2][1]) == 2.5e-3


def test_compare_with_reference():
    ref = SPATIAL[0]
    rows = [ConvergenceRow(r.refinement, 0, 0, 0, 0, r.l2 * 1.1, r.linf * 0.9,
                           r.l2_order, r.linf_order) for r in ref.rows]
    reports = compare_with_reference(rows, ref, "space", order_range=(1.9, 2.2))
    assert all(r.passed for r in reports)
    assert {r.property_id for r in reports} == {"space.l2_error", "space.linf_error",
                                                "space.l2_order", "space.linf_order"}
    rows[2].linf = ref.rows[2].linf * 1.2
    rows[3].l2_order = 1.7
    failed = [r for r in compare_with_reference(rows, ref, "space", order_range=(1.9, 2.2))
              if not r.passed]
    assert {(r.property_id, r.parameters["row"]) for r in failed} == {
        ("space.linf_error", ref.rows[2].refinement), ("space.l2_order", ref.rows[3].refinement)}
    with pytest.raises(ValueError):
        compare_with_reference(rows[:2], ref, "space", order_range=(1.9, 2.2))


def test_compare_order_window():
    ref = TEMPORAL[1]
    rows = [ConvergenceRow(r.refinement, 0, 0, 0, 0, r.l2, r.linf,
                           None if r.l2_order is None else r.l2_order + 0.1,
                           r.linf_order) for r in ref.rows]
    reports = compare_with_reference(rows, ref, "time", order_window=0.2)
    assert all(r.passed for r in reports)
    orders = [r for r in reports if r.property_id == "time.l2_order"]
    assert all(r.margin == pytest.approx(0.1) for r in orders)


# }}}

# {{{ truncation


def test_truncation_sub_one_cubic():
    res = truncation_study(lambda t: t**3, lambda t: 6 * t**2.5 / math.gamma(3.5), 0.5,
                           [1 / 2**k for k in range(5, 10)])
    assert res.fitted_order == pytest.approx(1.5, abs=0.1)
    assert len(res.pairwise_orders) == 4


def test_truncation_super_one_cubic():
    res = truncation_study(lambda t: t**3, lambda t: 6 * t**1.5 / math.gamma(2.5), 1.5,
                           [1 / 2**k for k in range(5, 10)])
    assert res.fitted_order == pytest.approx(1.5, abs=0.1)


@pytest.mark.parametrize("order", [0.3, 0.7])
def test_truncation_linear_is_exact(order):
    res = truncation_study(lambda t: t, lambda t: t ** (1 - order) / math.gamma(2 - order),
                           order, [1 / 8, 1 / 16, 1 / 32])
    assert max(res.errors) < 1e-13


def test_truncation_super_one_linear_is_exact():
    res = truncation_study(lambda t: 2 * t + 1, lambda t: 0.0, 1.4, [1 / 8, 1 / 16, 1 / 32],
                           initial_rate=2.0)
    assert max(res.errors) < 1e-13


def test_truncation_needs_three_steps():
    with pytest.raises(ValueError):
        truncation_study(lambda t: t**3, lambda t: 0.0, 0.5, [0.1, 0.05])


# }}}

# {{{ property batteries


def test_energy_inequality_zero_data():
    assert energy_inequality_gap(1.5, np.zeros(10), 0.0, 0.1) == 0.0


@pytest.mark.parametrize("gamma", [1.1, 1.5, 1.9])
def test_energy_inequality_gap_matches_matrix_form(gamma):
    rng = np.random.default_rng(4)
    a = np.asarray(super_one_weights(gamma, 41).weights)
    for N in (1, 2, 7, 40):
        S = rng.standard_normal(N)
        P = float(rng.standard_normal())
        tau = 0.05
        G = np.zeros((N, N))
        for n in range(1, N + 1):
            for k in range(1, n):
                G[n - 1, k - 1] = -(a[n - k - 1] - a[n - k])
            G[n - 1, n - 1] = a[0]
        T = N * tau
        lhs = (S @ G @ S - P * (a[:N] @ S)) * tau ** (1 - gamma) / math.gamma(3 - gamma)
        rhs = (T ** (1 - gamma) / (2 * math.gamma(2 - gamma)) * (S @ S)
               - T ** (2 - gamma) / (2 * tau * math.gamma(3 - gamma)) * P * P)
        gap = energy_inequality_gap(gamma, S, P, tau)
        assert gap == pytest.approx(lhs - rhs, rel=1e-10, abs=1e-12)
        assert gap >= -1e-12


def test_energy_inequality_battery_passes():
    assert all(r.passed for r in energy_inequality_reports(samples=200))


def test_quadratic_form_battery_passes():
    reports = quadratic_form_reports(samples=200, seed=3)
    assert all(r.passed for r in reports)
    assert all(r.seed == 3 for r in reports)


def test_weights_decreasing_fails_for_small_orders():
    reports = {(r.property_id, r.parameters["alpha"]): r
               for r in subone_weight_reports(steps=range(1, 60))}
    for alpha in (0.1, 0.2, 0.3):
        assert not reports[("weights.decreasing", alpha)].passed
        assert reports[("weights.decreasing_from_c1", alpha)].passed
    for alpha in (0.4, 0.5, 0.9):
        assert reports[("weights.decreasing", alpha)].passed
    assert all(reports[("weights.positive", a)].passed for a in (0.1, 0.5, 0.9))


def test_curvature_sign_root():
    report = curvature_sign_report()
    assert report.passed
    assert float(report.note.split("=")[-1]) == pytest.approx(0.4471, abs=1e-3)


def test_suite_seed_reproducible():
    a = property_suite(seed=7, samples=50)
    b = property_suite(seed=7, samples=50)
    assert [r.as_row() for r in a] == [r.as_row() for r in b]
    c = property_suite(seed=8, samples=50)
    def margins(rs):
        return [r.margin for r in rs if r.property_id == "superone.energy_inequality"]

    assert margins(a) != margins(c)


def test_reports_csv():
    reps = [PropertyReport("superone.energy_inequality", {"gamma": 1.5}, True, 0.25, seed=1),
            PropertyReport("x", {}, False, -1.0)]
    lines = reports_to_csv(reps, comment="seed=1").splitlines()
    assert lines[0] == "# seed=1"
    rows = list(csv.DictReader(io.StringIO("\n".join(lines[1:]))))
    assert rows[0]["property_id"] == "superone.energy_inequality"
    assert float(rows[0]["margin"]) == 0.25
    assert rows[1]["passed"] == "False" and rows[1]["seed"] == ""


# }}}

# {{{ energy and example 2


def test_energy_of_zero_problem():
    p = MultiTermProblem(superone_terms=((1.0, 1.5),), b2=1.0)
    rec = run(p, UniformGrid2D.unit_square(4, 4))
    assert energy(rec, 4) == 0.0 and energy_bound(rec) == 0.0


def test_stability_smoke():
    reports = stability_smoke(taus=(1 / 10, 1 / 40), M=8, seed=1)
    assert len(reports) == 2
    assert all(r.passed and r.seed == 1 and r.property_id == "stability.energy"
               for r in reports)


def test_example2_checks():
    p = oldroyd_to_multiterm(5.0, 2.0, 0.8, 0.4)
    rec = run(p, UniformGrid2D(5.0, 5.0, 20, 20, T=1.0, N=20))
    reports = example2_checks(rec)
    assert [r.property_id for r in reports] == ["example2.nonnegative",
                                                "example2.monotone_decay",
                                                "example2.increases"]
    assert all(r.passed for r in reports)
    # a decreasing-in-time history must be caught
    rec.U[10], rec.U[20] = rec.U[20].copy(), rec.U[10].copy()
    assert not example2_checks(rec)[2].passed


# }}}
