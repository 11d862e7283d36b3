import numpy as np
import pytest

import quakeroute.dyngraph as dg
import quakeroute.oracle as oc
from conftest import make_graph, random_connected_graph, scenario_for
from helpers import brute_force_shortest


def test_dijkstra_triangle(triangle):
    w = triangle.nominal_minutes()
    assert np.allclose(w, [1.0, 1.0, 3.0])
    path = oc.dijkstra(triangle, w, 0, 2)
    assert path.nodes == [0, 1, 2]
    assert path.total_cost == pytest.approx(2.0)
    cost, nodes = brute_force_shortest(triangle, w, 0, 2)
    assert nodes == path.nodes and cost == path.total_cost


def test_dijkstra_trivial_and_errors(triangle):
    w = triangle.nominal_minutes()
    single = oc.dijkstra(triangle, w, 1, 1)
    assert single.nodes == [1] and single.total_cost == 0.0
    disconnected = make_graph([(0, 0), (0.5, 0.5), (1, 1)], [(0, 1)])
    with pytest.raises(oc.NoPathError):
        oc.dijkstra(disconnected, disconnected.nominal_minutes(), 0, 2)


def test_dijkstra_tie_breaks_to_smaller_next_id():
    # diamond with exactly equal-cost routes 0-1-3 and 0-2-3
    g = make_graph([(0.0, 0.5), (0.5, 0.0), (0.5, 1.0), (1.0, 0.5)],
                   [(0, 1), (0, 2), (1, 3), (2, 3)],
                   lengths=[1000.0] * 4, speeds=[60.0] * 4)
    path = oc.dijkstra(g, g.nominal_minutes(), 0, 3)
    assert path.nodes == [0, 1, 3]


def test_dijkstra_matches_enumeration_on_random_graphs():
    rng = np.random.default_rng(42)
    for _ in range(25):
        g = random_connected_graph(rng, int(rng.integers(3, 9)))
        w = rng.uniform(0.1, 5.0, g.n_edges)
        start, goal = rng.choice(g.n_nodes, 2, replace=False)
        got = oc.dijkstra(g, w, int(start), int(goal))
        cost, nodes = brute_force_shortest(g, w, int(start), int(goal))
        assert got.nodes == nodes
        assert got.total_cost == cost


def test_nodewise_on_line_is_the_line(line3):
    sc = scenario_for(line3, start=0, exit_=2)
    path = oc.nodewise_dijkstra(line3, sc, sigma_frac=0.1)
    assert path.nodes == [0, 1, 2]
    assert path.reached
    assert len(path.edge_costs) == 2


def test_nodewise_degenerates_to_static_dijkstra(monkeypatch):
    g = dg.synth_city(5, 5, seed=13)
    sc = dg.random_scenario(g, np.random.default_rng(3))
    monkeypatch.setattr(dg, "apply_initial_quake",
                        lambda state, epicenter=None: (
                            setattr(state, "quake_applied", True) or state))
    monkeypatch.setattr(dg, "step_quake", lambda state: state)
    monkeypatch.setattr(dg, "step_traffic", lambda state, exits=None: state)
    rolled = oc.nodewise_dijkstra(g, sc, sigma_frac=0.0)
    static = oc.dijkstra(g, g.nominal_minutes(), sc.start, sc.chosen_exit)
    assert rolled.nodes == static.nodes
    assert rolled.total_cost == pytest.approx(static.total_cost)


def test_nodewise_budget_marks_failed(line3):
    sc = scenario_for(line3, start=0, exit_=2, max_steps=1)
    path = oc.nodewise_dijkstra(line3, sc, sigma_frac=0.0)
    assert not path.reached
    assert len(path.nodes) == 2  # got one step in before the budget died


def test_nodewise_matches_manual_replay():
    """Replays the loop by hand: advance the world, then follow the current
    shortest path one edge."""
    g = dg.synth_city(8, 8, seed=7)
    sc = dg.random_scenario(g, np.random.default_rng(5))
    got = oc.nodewise_dijkstra(g, sc, sigma_frac=0.1)

    state = dg.initial_state(g, sc, sigma_frac=0.1)
    dg.apply_initial_quake(state)
    u = sc.start
    nodes = [u]
    costs = []
    while u != sc.chosen_exit and state.t < sc.max_steps:
        dg.advance(state)
        best = oc.dijkstra(g, state.weights, u, sc.chosen_exit)
        v = best.nodes[1]
        costs.append(state.weights[g.edge_index(u, v)])
        nodes.append(v)
        u = v
    assert got.nodes == nodes
    assert np.allclose(got.edge_costs, costs, atol=1e-15)


def test_arrival_rate():
    assert oc.arrival_rate([True] * 5) == 1.0
    assert oc.arrival_rate([True] * 19 + [False]) == pytest.approx(0.95)
    assert oc.arrival_rate([False, False]) == 0.0
    assert oc.arrival_rate([oc.Path([0], [], reached=True),
                            oc.Path([0], [], reached=False)]) == 0.5
    with pytest.raises(ValueError):
        oc.arrival_rate([])


def test_path_accuracy():
    assert oc.path_accuracy(7.5, 7.5) == 1.0
    assert oc.path_accuracy(10.0, 20.0) == pytest.approx(0.5)
    assert oc.path_accuracy(20.0, 10.0) == pytest.approx(0.0)
    assert oc.path_accuracy(5.0, 6.0) <= 1.0
    with pytest.raises(ValueError):
        oc.path_accuracy(10.0, 0.0)


def test_better_or_equal_rate():
    assert oc.better_or_equal_rate([(5.0, 5.0), (4.0, 4.0)]) == 1.0
    assert oc.better_or_equal_rate([(5.0, 4.0), (5.0, 6.0)]) == 0.5
    with pytest.raises(ValueError):
        oc.better_or_equal_rate([])
