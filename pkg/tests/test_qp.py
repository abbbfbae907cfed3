import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lmpc.qp import QPProblem, SolverSettings, Status, solve, solve_lp

from oracles import qp_active_set_enumeration, simplex_grid_min


def test_active_bound():
    sol = solve(QPProblem(H=[[1.0]], f=[0.0], A_in=[[1.0]], lo=[1.0], hi=[np.inf]))
    assert sol.status is Status.OPTIMAL
    assert sol.z[0] == pytest.approx(1.0, abs=1e-9)
    assert sol.objective == pytest.approx(0.5, abs=1e-9)


def test_equality_constrained_least_norm():
    # objective 1/2 z'z with H = I: stationarity gives z1 = z2 = 1/2, value 1/4
    sol = solve(QPProblem(H=np.eye(2), f=[0.0, 0.0], A_eq=[[1.0, 1.0]], b_eq=[1.0]))
    assert sol.status is Status.OPTIMAL
    np.testing.assert_allclose(sol.z, [0.5, 0.5], atol=1e-9)
    assert sol.objective == pytest.approx(0.25, abs=1e-9)
    assert sol.y_eq is not None


def test_contradictory_equalities_infeasible():
    sol = solve(QPProblem(H=[[1.0]], f=[0.0], A_eq=[[1.0], [1.0]], b_eq=[2.0, 3.0]))
    assert sol.status is Status.INFEASIBLE


def test_lp_vertex_solution():
    sol = solve_lp([1.0, 2.0], A_eq=[[1.0, 1.0]], b_eq=[1.0], lb=[0.0, 0.0])
    assert sol.status is Status.OPTIMAL
    np.testing.assert_allclose(sol.z, [1.0, 0.0], atol=1e-9)
    assert sol.objective == pytest.approx(1.0, abs=1e-9)


def test_lp_hull_membership_infeasible():
    D = np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    x = np.array([1.0, 1.0])  # outside the triangle
    sol = solve_lp(np.zeros(3), A_eq=np.vstack([D, np.ones(3)]), b_eq=np.append(x, 1.0), lb=np.zeros(3))
    assert sol.status is Status.INFEASIBLE


def test_lp_weights_on_segment():
    D = np.array([[0.0, 2.0, 1.0], [0.0, 0.0, 3.0]])
    c = np.array([4.0, 6.0, 1.0])
    x = np.array([0.5, 0.0])  # on the segment from point 1 to point 2
    sol = solve_lp(c, A_eq=np.vstack([D, np.ones(3)]), b_eq=np.append(x, 1.0), lb=np.zeros(3))
    assert sol.status is Status.OPTIMAL
    assert sol.z[2] == pytest.approx(0.0, abs=1e-9)
    assert sol.objective == pytest.approx(simplex_grid_min(D, c, x), abs=1e-4)


def test_max_iter_reported():
    rng = np.random.default_rng(3)
    M = rng.normal(size=(6, 6))
    qp = QPProblem(H=M @ M.T + np.eye(6), f=rng.normal(size=6), A_in=rng.normal(size=(4, 6)),
                   lo=-np.ones(4), hi=np.ones(4))
    sol = solve(qp, SolverSettings(max_iter=1, polish=False))
    assert sol.status is Status.MAX_ITER


def test_unbounded_variable_with_linear_cost_in_bounds():
    # z2 only enters linearly and is boxed
    sol = solve(QPProblem(H=[[2.0]], f=[-2.0, 1.0], lb=[-10, -1], ub=[10, 3]))
    np.testing.assert_allclose(sol.z, [1.0, -1.0], atol=1e-9)


def test_redundant_constraint_does_not_change_objective():
    H = np.diag([2.0, 1.0, 3.0])
    f = np.array([-1.0, 2.0, 0.5])
    base = QPProblem(H=H, f=f, A_eq=[[1.0, 1.0, 1.0]], b_eq=[1.0], lb=[0, 0, 0])
    extra = QPProblem(H=H, f=f, A_eq=[[1.0, 1.0, 1.0]], b_eq=[1.0], A_in=[[1.0, 1.0, 1.0]], lo=[-5], hi=[5],
                      lb=[0, 0, 0])
    a, b = solve(base), solve(extra)
    assert a.status is b.status is Status.OPTIMAL
    assert abs(a.objective - b.objective) <= 1e-9


def test_settings_validation():
    with pytest.raises(ValueError):
        SolverSettings(eps_primal=0.0)
    with pytest.raises(ValueError):
        SolverSettings(max_iter=0)


def test_problem_validation():
    with pytest.raises(ValueError):
        QPProblem(H=[[1.0, 2.0], [0.0, 1.0]], f=[0.0, 0.0])
    with pytest.raises(ValueError):
        QPProblem(H=[[-1.0]], f=[0.0])
    with pytest.raises(ValueError):
        QPProblem(H=[[1.0]], f=[0.0], lb=[1.0], ub=[0.0])


@st.composite
def small_qps(draw):
    d = draw(st.integers(1, 4))
    k = draw(st.integers(0, 4))
    e = draw(st.integers(0, min(1, d - 1)))
    seed = draw(st.integers(0, 2**31 - 1))
    rng = np.random.default_rng(seed)
    M = rng.normal(size=(d, d))
    H = M @ M.T + 0.1 * np.eye(d)
    f = rng.normal(size=d)
    G = rng.normal(size=(k, d))
    z_feas = rng.normal(size=d)
    h = G @ z_feas + rng.uniform(0.0, 1.0, size=k)  # feasible by construction
    A = rng.normal(size=(e, d))
    b = A @ z_feas
    return H, f, G, h, A, b


@settings(max_examples=60, deadline=None)
@given(small_qps())
def test_random_qps_match_active_set_enumeration(data):
    H, f, G, h, A, b = data
    z_ref, obj_ref = qp_active_set_enumeration(H, f, G, h, A, b)
    sol = solve(QPProblem(H=H, f=f, A_eq=A, b_eq=b, A_in=G, lo=np.full(len(h), -np.inf), hi=h))
    assert sol.status is Status.OPTIMAL
    assert sol.primal_residual <= 1e-9 and sol.dual_residual <= 1e-9
    assert sol.objective == pytest.approx(obj_ref, abs=1e-7 * max(1.0, abs(obj_ref)))
    np.testing.assert_allclose(sol.z, z_ref, atol=1e-6)
