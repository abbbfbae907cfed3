import itertools

import numpy as np
import pytest

from lmpc.controller import EmptySafeSetError, LMPCController, build_qp, layout, solve_step
from lmpc.engine import RunConfig, generate_initial_trajectory
from lmpc.qp import Status
from lmpc.safe_set import SafeSetPoint, SafeSetStore
from lmpc.system import clqr_task, stage_cost


@pytest.fixture(scope="module")
def seeded():
    spec = clqr_task()
    traj = generate_initial_trajectory(spec, RunConfig(spec=spec))
    store = SafeSetStore.for_task(spec)
    store.add_trajectory(traj)
    return spec, traj, store


def test_equilibrium_stays_put():
    spec = clqr_task()
    snap = SafeSetStore.for_task(spec).snapshot()
    qp = build_qp(spec, snap, spec.x_F)
    assert qp.n_var == spec.N * spec.m + spec.N * spec.n + 1
    cs = solve_step(spec, snap, spec.x_F)
    assert cs.status is Status.OPTIMAL
    np.testing.assert_allclose(cs.u_applied, 0.0, atol=1e-9)
    np.testing.assert_allclose(cs.lam, [1.0], atol=1e-9)
    assert cs.optimal_cost <= 1e-8


def test_empty_snapshot_rejected():
    spec = clqr_task()
    with pytest.raises(EmptySafeSetError, match="seed"):
        build_qp(spec, (np.zeros((2, 0)), np.zeros(0)), spec.x_S)


def test_layout_dimension(seeded):
    spec, traj, store = seeded
    S = len(store)
    qp = build_qp(spec, store.snapshot(), spec.x_S)
    assert qp.n_var == 4 * 1 + 4 * 2 + S
    su, sx, sl = layout(spec, S)
    assert (su.stop - su.start, sx.stop - sx.start, sl.stop - sl.start) == (4, 8, S)


def test_cost_bounded_by_stored_tail(seeded):
    spec, traj, store = seeded
    snap = store.snapshot()
    for t in range(0, traj.duration + 1, 3):
        cs = solve_step(spec, snap, traj.states[t])
        assert cs.optimal_cost <= traj.cost_to_go[t] + 1e-6


def test_predictions_obey_dynamics_and_constraints(seeded):
    spec, _, store = seeded
    cs = solve_step(spec, store.snapshot(), spec.x_S)
    x = spec.x_S
    for k in range(spec.N):
        x = spec.system.A @ x + spec.system.B @ cs.predicted_inputs[k]
        np.testing.assert_allclose(cs.predicted_states[k], x, atol=1e-8)
    assert np.all(np.abs(cs.predicted_inputs) <= 1 + 1e-9)
    assert np.all(np.abs(cs.predicted_states) <= 4 + 1e-9)
    D, c = store.snapshot()
    np.testing.assert_allclose(D @ cs.lam, cs.predicted_states[-1], atol=1e-8)
    assert cs.lam.min() >= -1e-9 and cs.lam.sum() == pytest.approx(1.0, abs=1e-9)


def test_optimum_matches_enumeration_over_terminal_weights():
    """On a 3-point store, the learning MPC value equals a brute-force minimum over lambda.

    For each lambda on a simplex grid the terminal state is fixed, which leaves a
    plain equality-constrained horizon problem; its exact value plus c'lambda is
    minimized over the grid and refined around the best cell.
    """
    spec = clqr_task(x_S=(-1.0, 0.5), N=3)
    store = SafeSetStore.for_task(spec)
    store.points += [SafeSetPoint(np.array([0.5, -0.5]), 3.0, 0, 0), SafeSetPoint(np.array([-0.5, 0.2]), 2.0, 0, 1)]
    D, c = store.snapshot()
    x0 = np.array([-1.0, 0.5])

    def fixed_terminal_value(lam):
        # min over u with x_N = D lam; boxes are inactive for this small state
        n, m, N = 2, 1, spec.N
        A, B = spec.system.A, spec.system.B
        target = D @ lam
        # x_N = A^N x0 + sum_k A^{N-1-k} B u_k
        G = np.hstack([np.linalg.matrix_power(A, N - 1 - k) @ B for k in range(N)])
        r = target - np.linalg.matrix_power(A, N) @ x0
        # cost = sum u_k^2 + sum_{k=1}^{N-1} |x_k|^2, x_k linear in u
        rows = []
        for j in range(1, N):
            rows.append((np.hstack([np.linalg.matrix_power(A, j - 1 - k) @ B if k < j else np.zeros((n, m))
                                    for k in range(N)]), np.linalg.matrix_power(A, j) @ x0))
        Hm = 2 * np.eye(N) + sum(2 * M.T @ M for M, _ in rows)
        fv = sum(2 * M.T @ off for M, off in rows)
        K = np.block([[Hm, G.T], [G, np.zeros((n, n))]])
        u = np.linalg.solve(K, np.concatenate([-fv, r]))[:N]
        return 0.5 * u @ Hm @ u + fv @ u + sum(off @ off for _, off in rows) + x0 @ x0 + c @ lam

    best, best_lam = np.inf, None
    grid = np.linspace(0, 1, 41)
    for a, b in itertools.product(grid, grid):
        if a + b <= 1:
            lam = np.array([1 - a - b, a, b])
            v = fixed_terminal_value(lam)
            if v < best:
                best, best_lam = v, lam
    # local refinement
    for h in (0.01, 0.002, 0.0004, 0.0001):
        for da, db in itertools.product(np.linspace(-2 * h, 2 * h, 9), repeat=2):
            lam = best_lam + np.array([-da - db, da, db])
            if lam.min() >= 0:
                v = fixed_terminal_value(lam)
                if v < best:
                    best, best_lam = v, lam
    cs = solve_step(spec, (D, c), x0)
    assert np.all(np.abs(cs.predicted_inputs) < 1) and np.all(np.abs(cs.predicted_states) < 4)
    assert cs.optimal_cost == pytest.approx(best, abs=1e-4)
    assert cs.optimal_cost <= best + 1e-9


def test_optimal_cost_includes_current_stage(seeded):
    spec, _, store = seeded
    cs = solve_step(spec, store.snapshot(), spec.x_S)
    plan = [spec.x_S] + list(cs.predicted_states)
    stages = sum(stage_cost(spec.cost, plan[k], cs.predicted_inputs[k]) for k in range(spec.N))
    D, c = store.snapshot()
    assert cs.optimal_cost == pytest.approx(stages + c @ cs.lam, rel=1e-9)


def test_warm_start_gives_same_answer(seeded):
    spec, traj, store = seeded
    snap = store.snapshot()
    ctl = LMPCController(spec)
    a = ctl.solve_step(snap, traj.states[0])
    b = ctl.solve_step(snap, traj.states[1])
    cold = solve_step(spec, snap, traj.states[1])
    assert b.optimal_cost == pytest.approx(cold.optimal_cost, abs=1e-8)
    assert a.optimal_cost > b.optimal_cost
