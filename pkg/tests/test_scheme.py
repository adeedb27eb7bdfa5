import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fracflow.grid import UniformGrid2D, laplacian_array
from fracflow.harness import solution_errors
from fracflow.problem import (
    BoundarySpec,
    MultiTermProblem,
    Term,
    example1_problem,
    heat_equation_problem,
    manufactured_problem,
    oldroyd_to_multiterm,
)
from fracflow.scheme import (
    Regime,
    SchemeScalars,
    StepError,
    assemble_matrix,
    assemble_rhs,
    initialize,
    run,
    step,
)

import oracles


def busy_problem():
    """Every term family present, non-unit coefficients, non-trivial data."""
    return MultiTermProblem(
        superone_terms=(Term(0.7, 1.3), Term(1.2, 1.75)),
        b1=0.8, b2=0.4, b3=1.3,
        subone_terms=(Term(0.5, 0.25), Term(1.1, 0.7)),
        laplacian_memory_terms=(Term(0.9, 0.35), Term(0.3, 0.85)),
        source=lambda x, y, t: np.cos(3 * x + t) * (1 + y * y),
        initial_value=lambda x, y: np.sin(np.pi * x) * y * (1.5 - y) + x * y,
        initial_rate=lambda x, y: x * (1 - x) * np.sin(2 * y),
        boundary=BoundarySpec(left=lambda y, t: t * y,
                              right=lambda y, t: y * (1 + t * t),
                              bottom=lambda x, t: 0 * x,
                              top=lambda x, t: 1.5 * x * t),
        Lx=1.0, Ly=1.5, T=1.0, name="busy",
    )


# {{{ matrix


def test_crank_nicolson_matrix():
    heat = MultiTermProblem(b1=1.0, b2=0.0, b3=1.0, Lx=3.0, Ly=3.0)
    mat = assemble_matrix(heat, UniformGrid2D(3.0, 3.0, 3, 3, T=1.0, N=1))
    D = np.array([[3, -.5, -.5, 0], [-.5, 3, 0, -.5], [-.5, 0, 3, -.5], [0, -.5, -.5, 3]])
    assert np.array_equal(mat.matrix.toarray(), D)


@pytest.mark.parametrize("Mx, My", [(3, 4), (7, 7)])
@pytest.mark.parametrize("regime", list(Regime))
def test_matrix_matches_dense_oracle(Mx, My, regime):
    p = busy_problem()
    g = UniformGrid2D(p.Lx, p.Ly, Mx, My, T=1.0, N=8)
    n = 1 if regime is Regime.FIRST else 3
    rec = run(p, g)
    A_oracle, _ = oracles.SchemeOracle(p, g).linear_system(rec.U, n)
    A = assemble_matrix(p, g, regime).matrix.toarray()
    assert np.allclose(A, A_oracle, rtol=1e-10, atol=1e-10 * np.abs(A).max())


def test_matrix_layout():
    p = busy_problem()
    g = UniformGrid2D(1.0, 1.5, 4, 6, N=4)
    mat = assemble_matrix(p, g)
    A = mat.matrix.toarray()
    my = g.My - 1
    # x-major: neighbours in y are adjacent, neighbours in x are my apart
    assert A[0, 1] == pytest.approx(-mat.r3)
    assert A[0, my] == pytest.approx(-mat.r2)
    assert A[my - 1, my] == 0.0
    assert A[0, 0] == pytest.approx(mat.r1 + 2 * mat.r2 + 2 * mat.r3)
    assert mat.banded().half_bandwidth == my


@settings(max_examples=40, deadline=None)
@given(gam=st.tuples(st.floats(1.01, 1.99), st.floats(1.01, 1.99)),
       al=st.tuples(st.floats(0.01, 0.99), st.floats(0.01, 0.99)),
       be=st.tuples(st.floats(0.01, 0.99), st.floats(0.01, 0.99)),
       M=st.integers(2, 12), N=st.integers(1, 2000))
def test_matrix_symmetric_and_dominant(gam, al, be, M, N):
    p = example1_problem(gam, al, be)
    g = UniformGrid2D.unit_square(M, N)
    for regime in Regime:
        mat = assemble_matrix(p, g, regime)
        assert mat.is_symmetric()
        assert mat.dominance_margin() >= mat.r1 * (1 - 1e-12) > 0


def test_scalars_first_step_uses_a0():
    p = example1_problem()
    g = UniformGrid2D.unit_square(4, 10)
    sc = SchemeScalars.from_problem(p, g)
    tau = g.tau
    mu2 = [tau ** (1 - a) / math.gamma(2 - a) for a in (0.8, 0.6)]
    mu1 = [tau ** (1 - c) / math.gamma(3 - c) for c in (1.8, 1.6)]
    c0_first = [oracles.c_sub(a, 1)[0] for a in (0.8, 0.6)]
    c0_general = [oracles.c_sub(a, 2)[0] for a in (0.8, 0.6)]
    base = (sum(mu1) + 1.0) / tau + 0.5
    assert sc.r1[Regime.FIRST] == pytest.approx(
        base + sum(m * c for m, c in zip(mu2, c0_first)) / tau)
    assert sc.r1[Regime.GENERAL] == pytest.approx(
        base + sum(m * c for m, c in zip(mu2, c0_general)) / tau)
    assert sc.r4 == pytest.approx((sum(mu1) + 1.0) / tau - 0.5)
    assert sc.r5 == 0.5


# }}}

# {{{ right-hand side


def test_rhs_zero_data():
    p = MultiTermProblem(superone_terms=((1.0, 1.5),), subone_terms=((1.0, 0.5),),
                         laplacian_memory_terms=((1.0, 0.5),))
    rec = initialize(p, UniformGrid2D.unit_square(4, 4))
    assert np.all(assemble_rhs(rec, 1) == 0)


def test_rhs_example1_matches_oracle():
    p = example1_problem()
    g = UniformGrid2D.unit_square(4, 4)
    rec = initialize(p, g)
    step(rec, 1)
    _, b = oracles.SchemeOracle(p, g).linear_system(rec.U, 2)
    got = assemble_rhs(rec, 2).ravel()
    assert np.allclose(got, b, rtol=1e-12, atol=1e-12 * np.abs(b).max())


@pytest.mark.parametrize("n", [1, 2, 3, 6])
def test_rhs_busy_matches_oracle(n):
    p = busy_problem()
    g = UniformGrid2D(p.Lx, p.Ly, 5, 4, T=1.0, N=6)
    rec = initialize(p, g)
    for k in range(1, n):
        step(rec, k)
    _, b = oracles.SchemeOracle(p, g).linear_system(rec.U, n)
    got = assemble_rhs(rec, n).ravel()
    assert np.allclose(got, b, rtol=1e-11, atol=1e-11 * np.abs(b).max())


def test_rhs_terms_sum():
    p = busy_problem()
    g = UniformGrid2D(p.Lx, p.Ly, 5, 4, T=1.0, N=6)
    rec = initialize(p, g)
    for k in range(1, 5):
        step(rec, k)
    terms = assemble_rhs(rec, 5, return_terms=True)
    assert set(terms) == {"previous", "superone_memory", "subone_memory", "previous_laplacian",
                          "laplacian_memory", "source", "lifting"}
    assert np.allclose(sum(terms.values()), assemble_rhs(rec, 5), rtol=1e-12, atol=1e-12)


def test_rhs_needs_history():
    rec = initialize(example1_problem(), UniformGrid2D.unit_square(4, 4))
    with pytest.raises(ValueError):
        assemble_rhs(rec, 3)


def test_rhs_heat_reduction_is_crank_nicolson():
    p = heat_equation_problem()
    g = UniformGrid2D.unit_square(6, 10, T=p.T)
    rec = initialize(p, g)
    U0 = rec.U[0]
    f = 0.5 * (rec.source(1) + rec.source(0))[1:-1, 1:-1]
    want = U0[1:-1, 1:-1] / g.tau + 0.5 * laplacian_array(U0, g.hx, g.hy) + f
    assert np.allclose(assemble_rhs(rec, 1), want, rtol=1e-14)


# }}}

# {{{ time stepping


def test_zero_data_stays_zero():
    p = MultiTermProblem(superone_terms=((1.0, 1.5),), subone_terms=((1.0, 0.5),),
                         laplacian_memory_terms=((1.0, 0.5),), b2=1.0)
    rec = run(p, UniformGrid2D.unit_square(5, 6))
    assert np.all(rec.U == 0)


@pytest.mark.parametrize("factory", [busy_problem,
                                     lambda: oldroyd_to_multiterm(5.0, 2.0, 0.8, 0.4, L=1.0,
                                                                  d=1.0)])
def test_solution_satisfies_scheme(factory):
    p = factory()
    g = UniformGrid2D(p.Lx, p.Ly, 6, 5, T=1.0, N=7)
    rec = run(p, g)
    oracle = oracles.SchemeOracle(p, g)
    for n in range(1, 8):
        res = oracle.residual(rec.U, n)
        scale = np.abs(oracle.linear_system(rec.U, n)[1]).max() + 1.0
        assert np.abs(res).max() <= 1e-10 * scale


def test_increments_consistent():
    p = busy_problem()
    g = UniformGrid2D(p.Lx, p.Ly, 5, 4, T=1.0, N=12)
    rec = run(p, g)
    for k in np.random.default_rng(0).integers(1, 13, size=5):
        assert np.allclose(rec.dU[k], (rec.U[k] - rec.U[k - 1]) / g.tau, rtol=1e-14, atol=1e-12)
    assert len(rec.stats) == 12 and all(s.residual < 1e-9 for s in rec.stats)


def test_boundary_installed():
    p = busy_problem()
    g = UniformGrid2D(p.Lx, p.Ly, 5, 4, T=1.0, N=4)
    rec = run(p, g)
    t = 1.0
    assert np.allclose(rec.U[4][0, 1:-1], t * g.y[1:-1])
    assert np.allclose(rec.U[4][-1, 1:-1], g.y[1:-1] * 2)


def test_direct_and_cg_runs_agree():
    p = example1_problem()
    g = UniformGrid2D.unit_square(32, 5)
    a = run(p, g, solver="direct")
    b = run(p, g, solver="cg")
    assert np.linalg.norm(a.U[1] - b.U[1]) <= 1e-10 * np.linalg.norm(a.U[1])
    assert np.linalg.norm(a.U[-1] - b.U[-1]) <= 1e-10 * np.linalg.norm(a.U[-1])


def test_step_order_enforced():
    rec = initialize(example1_problem(), UniformGrid2D.unit_square(4, 2))
    with pytest.raises(ValueError):
        step(rec, 2)
    step(rec)
    step(rec)
    with pytest.raises(ValueError):
        step(rec)


def test_step_error_carries_index():
    p = replace(heat_equation_problem(),
                source=lambda x, y, t: np.full(np.shape(x), np.nan) if t > 0.015 else 0 * x)
    rec = initialize(p, UniformGrid2D.unit_square(4, 10, T=0.1))
    step(rec)
    with pytest.raises(StepError) as info:
        step(rec)
    assert info.value.step == 2


def test_unknown_solver():
    with pytest.raises(ValueError):
        initialize(example1_problem(), UniformGrid2D.unit_square(4, 2), solver="lu")


def test_matches_modal_oracle():
    p = example1_problem()
    M, N = 8, 24
    rec = run(p, UniformGrid2D.unit_square(M, N))
    amp = oracles.modal_solution((1.8, 1.6), (0.8, 0.6), (0.8, 0.6), M, N)
    X, Y = rec.grid.mesh()
    assert np.allclose(rec.U[-1], amp * np.sin(np.pi * X) * np.sin(np.pi * Y),
                       rtol=1e-11, atol=1e-13)


def test_example1_error_small_grid():
    rec = run(example1_problem(), UniformGrid2D.unit_square(8, 1000))
    l2, linf = solution_errors(rec)
    assert linf == pytest.approx(1.5419e-02, rel=1e-4)
    assert l2 == pytest.approx(7.7096e-03, rel=1e-4)


def test_heat_second_order():
    p = heat_equation_problem()
    errs = []
    for M in (8, 16, 32):
        rec = run(p, UniformGrid2D.unit_square(M, M, T=p.T))
        errs.append(solution_errors(rec)[0])
    orders = [math.log2(errs[i] / errs[i + 1]) for i in range(2)]
    assert all(1.9 <= o <= 2.2 for o in orders)


def test_manufactured_converges_in_time():
    p = manufactured_problem([(1.0, 1.5)], subone_terms=[(1.0, 0.5)],
                             laplacian_memory_terms=[(1.0, 0.5)])
    errs = [solution_errors(run(p, UniformGrid2D.unit_square(M, N)))[0]
            for M, N in ((8, 16), (16, 64))]
    # tau^1.5 + h^2 with tau = h^(4/3): both terms shrink by 4
    assert math.log2(errs[0] / errs[1]) == pytest.approx(2.0, abs=0.3)


# }}}
