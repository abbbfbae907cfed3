import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lmpc.engine import RunConfig, generate_initial_trajectory
from lmpc.safe_set import CorruptTrajectoryError, SafeSetPoint, SafeSetStore, Trajectory
from lmpc.system import QuadraticStageCost, clqr_task

from oracles import in_hull_lp, simplex_grid_min, suffix_costs, vertex_min

COST = QuadraticStageCost(np.eye(2), np.eye(1))


def store_with(points, costs):
    """Store holding the equilibrium record plus the given (state, cost) pairs."""
    s = SafeSetStore(COST)
    for i, (p, c) in enumerate(zip(points, costs)):
        s.points.append(SafeSetPoint(np.asarray(p, dtype=float), float(c), 0, i))
    return s


def test_trajectory_suffix_costs_match_direct_sum():
    rng = np.random.default_rng(0)
    states = rng.normal(size=(6, 2))
    inputs = rng.normal(size=(5, 1))
    traj = Trajectory.from_rollout(0, states, inputs, COST, tail=0.25)
    np.testing.assert_allclose(traj.cost_to_go, suffix_costs(states, inputs, np.eye(2), np.eye(1), 0.25),
                               rtol=1e-14)
    assert traj.duration == 5
    assert traj.iteration_cost == traj.cost_to_go[0]


def test_trajectory_round_trip():
    traj = Trajectory.from_rollout(3, [[1.0, 0.0], [0.5, 0.0], [0.0, 0.0]], [[-0.5], [-0.5]], COST)
    again = Trajectory.from_dict(traj.to_dict())
    np.testing.assert_array_equal(again.states, traj.states)
    np.testing.assert_array_equal(again.cost_to_go, traj.cost_to_go)
    assert again.iteration_index == 3


def test_equilibrium_trajectory_accepted():
    store = SafeSetStore(COST)
    assert store.add_trajectory(Trajectory(0, [[0.0, 0.0]], np.zeros((0, 1)), [0.0]))
    D, c = store.snapshot()
    assert D.shape == (2, 2) and np.all(c == 0.0)


def test_only_equilibrium_snapshot():
    D, c = SafeSetStore(COST).snapshot()
    np.testing.assert_array_equal(D, [[0.0], [0.0]])
    np.testing.assert_array_equal(c, [0.0])


def test_initial_trajectory_grows_store_by_duration_plus_one():
    spec = clqr_task()
    traj = generate_initial_trajectory(spec, RunConfig(spec=spec))
    store = SafeSetStore.for_task(spec)
    assert store.add_trajectory(traj)
    assert len(store) == traj.duration + 2
    assert store.snapshot()[0].shape[1] == traj.duration + 2


def test_nonconvergent_trajectory_rejected():
    store = SafeSetStore(COST)
    traj = Trajectory.from_rollout(0, [[1.0, 0.0], [1.0, 1.0]], [[1.0]], COST)
    assert not store.add_trajectory(traj, eps_terminal=1e-4)
    assert len(store) == 1 and store.rejections


def test_corrupt_suffix_raises():
    store = SafeSetStore(COST)
    with pytest.raises(CorruptTrajectoryError):
        store.add_trajectory(Trajectory(0, [[1.0, 0.0], [0.0, 0.0]], [[0.0]], [5.0, 0.0]))
    with pytest.raises(CorruptTrajectoryError):
        store.add_trajectory(Trajectory(0, [[0.0, 0.0]], np.zeros((0, 1)), [-1.0]))


def test_iteration_order_of_columns():
    store = SafeSetStore(COST)
    t0 = Trajectory.from_rollout(0, [[2.0, 0.0], [0.0, 0.0]], [[0.0]], COST)
    t1 = Trajectory.from_rollout(1, [[1.0, 0.0], [0.0, 0.0]], [[0.0]], COST)
    store.add_trajectory(t0, eps_terminal=1e-4)
    store.add_trajectory(t1, eps_terminal=1e-4)
    D, _ = store.snapshot()
    np.testing.assert_array_equal(D[0], [0.0, 2.0, 0.0, 1.0, 0.0])
    assert [p.iteration for p in store.points] == [-1, 0, 0, 1, 1]


def test_terminal_cost_examples():
    store = store_with([[1.0, 0.0], [3.0, 0.0], [2.0, 5.0]], [10.0, 20.0, 100.0])
    assert store.terminal_cost([0.0, 0.0]) == pytest.approx(0.0, abs=1e-9)
    assert store.terminal_cost([1.0, 0.0]) <= 10.0 + 1e-9
    # midpoint of the first two points: only the 10/20 pair (or the origin) can reach it
    D, c = store.snapshot()
    ref = simplex_grid_min(D, c, [2.0, 0.0])
    assert store.terminal_cost([2.0, 0.0]) == pytest.approx(ref, abs=1e-4)
    assert math.isinf(store.terminal_cost([10.0, 10.0]))


def test_midpoint_of_two_records():
    # without a cheaper route through the origin: both records far from it in x2
    s = SafeSetStore(COST)
    s.points = [SafeSetPoint(np.array([0.0, 1.0]), 10.0, 0, 0), SafeSetPoint(np.array([2.0, 1.0]), 20.0, 0, 1),
                SafeSetPoint(np.array([1.0, 3.0]), 50.0, 0, 2)]
    assert s.terminal_cost([1.0, 1.0]) == pytest.approx(15.0, abs=1e-8)
    assert simplex_grid_min(*s.snapshot(), [1.0, 1.0]) == pytest.approx(15.0, abs=1e-4)


def test_contains_examples():
    p, q = np.array([1.0, 2.0]), np.array([-3.0, 0.5])
    store = store_with([p, q], [1.0, 1.0])
    assert store.contains(p) and store.contains(q)
    assert store.contains(0.3 * p + 0.7 * q)
    assert not store.contains([5.0, 5.0])


def test_cap_drops_oldest_but_keeps_equilibrium():
    store = SafeSetStore(COST, max_points=3)
    store.add_trajectory(Trajectory.from_rollout(0, [[2.0, 0.0], [1.0, 0.0], [0.0, 0.0]], [[0.0], [0.0]], COST),
                         eps_terminal=1e-4)
    assert len(store) == 3
    assert store.points[0].iteration == -1


def test_serialization_round_trip():
    store = store_with([[1.0, 2.0], [-1.0, 0.5]], [3.0, 4.0])
    again = SafeSetStore.loads(store.dumps())
    for a, b in zip(store.snapshot(), again.snapshot()):
        np.testing.assert_array_equal(a, b)
    with pytest.raises(ValueError):
        SafeSetStore.from_dict({"format": "other"})


coords = st.floats(-5, 5, allow_nan=False).map(lambda v: round(v, 3))


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(coords, coords), min_size=1, max_size=3),
       st.lists(st.floats(0, 10), min_size=3, max_size=3), st.tuples(coords, coords))
def test_terminal_cost_matches_vertex_enumeration(points, costs, x):
    store = store_with(points, costs[:len(points)])
    D, c = store.snapshot()
    ref = vertex_min(D, c, x)
    val = store.terminal_cost(x)
    if math.isinf(ref):
        assert math.isinf(val) or not in_hull_lp(D.T, np.array(x))
    else:
        assert val == pytest.approx(ref, abs=1e-6)
