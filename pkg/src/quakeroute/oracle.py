"""Shortest-path baselines and evaluation metrics.

``dijkstra`` solves the static problem on frozen weights. ``nodewise_dijkstra``
replays it from scratch at every node of a dynamically reweighted rollout and
is the labeling oracle the learned models imitate.
"""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

import numpy as np

from . import dyngraph
from .dyngraph import CityGraph, Scenario

# Relative slack when testing whether an edge lies on a shortest path.
_TIE_EPS = 1e-12


class NoPathError(ValueError):
    """Goal unreachable from start under the given weights."""


@dataclass
class Path:
    """A traversed route plus the weight of each edge at traversal time."""

    nodes: list[int]
    edge_costs: list[float] = field(default_factory=list)
    reached: bool = True

    @property
    def total_cost(self) -> float:
        return float(sum(self.edge_costs))

    def __len__(self) -> int:
        return len(self.nodes)


def _distances(graph: CityGraph, weights: np.ndarray, source: int) -> np.ndarray:
    """Single-source shortest distances over frozen weights (binary heap)."""
    dist = np.full(graph.n_nodes, np.inf)
    dist[source] = 0.0
    heap = [(0.0, source)]
    done = np.zeros(graph.n_nodes, bool)
    while heap:
        d, u = heapq.heappop(heap)
        if done[u]:
            continue
        done[u] = True
        for v, e in graph.adj[u]:
            nd = d + weights[e]
            if nd < dist[v]:
                dist[v] = nd
                heapq.heappush(heap, (nd, v))
    return dist


def _greedy_next(graph: CityGraph, weights: np.ndarray, dist_to_goal: np.ndarray,
                 u: int) -> int:
    """Smallest-id neighbor lying on a shortest path from u to the goal."""
    du = dist_to_goal[u]
    tol = _TIE_EPS * max(1.0, du)
    for v, e in graph.adj[u]:  # adj is sorted by neighbor id
        if weights[e] + dist_to_goal[v] <= du + tol:
            return v
    raise NoPathError(f"no shortest-path step out of node {u}")


def dijkstra(graph: CityGraph, weights: np.ndarray, start: int, goal: int) -> Path:
    """Minimal-cost path on frozen weights; ties broken by smaller next node id."""
    if not (0 <= start < graph.n_nodes and 0 <= goal < graph.n_nodes):
        raise NoPathError("start or goal not in graph")
    if start == goal:
        return Path([start], [])
    dist = _distances(graph, weights, goal)
    if not math.isfinite(dist[start]):
        raise NoPathError(f"node {goal} is unreachable from {start}")
    nodes = [start]
    costs: list[float] = []
    u = start
    while u != goal:
        v = _greedy_next(graph, weights, dist, u)
        costs.append(float(weights[graph.edge_index(u, v)]))
        nodes.append(v)
        u = v
        if len(nodes) > graph.n_nodes:
            raise NoPathError("path reconstruction failed to make progress")
    return Path(nodes, costs)


def nodewise_dijkstra(graph: CityGraph, scenario: Scenario, sigma_frac: float = 0.1,
                      on_decision=None) -> Path:
    """Full Dijkstra rerun at every node of a dynamic rollout.

    Each iteration first lets the world evolve one step (quake + traffic),
    then recomputes the shortest path on current weights and follows its
    first edge. Exhausting the step budget marks the rollout failed rather
    than raising. ``on_decision(state, node, next_node)`` is called before
    each move, which is how dataset generation taps the oracle.
    """
    state = dyngraph.initial_state(graph, scenario, sigma_frac)
    dyngraph.apply_initial_quake(state)
    u = scenario.start
    nodes = [u]
    costs: list[float] = []
    while u != scenario.chosen_exit:
        if state.t >= scenario.max_steps:
            return Path(nodes, costs, reached=False)
        dyngraph.advance(state)
        dist = _distances(graph, state.weights, scenario.chosen_exit)
        if not math.isfinite(dist[u]):
            raise NoPathError(f"exit {scenario.chosen_exit} unreachable from {u}")
        v = _greedy_next(graph, state.weights, dist, u)
        if on_decision is not None:
            on_decision(state, u, v)
        costs.append(float(state.weights[graph.edge_index(u, v)]))
        nodes.append(v)
        u = v
    return Path(nodes, costs)


# ---------------------------------------------------------------------------
# Metrics


def arrival_rate(outcomes) -> float:
    """Fraction of rollouts that reached the exit."""
    flags = [bool(getattr(o, "reached", o)) for o in outcomes]
    if not flags:
        raise ValueError("arrival_rate needs at least one rollout")
    return sum(flags) / len(flags)


def path_accuracy(dij_cost: float, model_cost: float) -> float:
    """Travel-time quality of a model path relative to the oracle path.

    1 - |1 - dij/model|: equal costs score 1; both slower and faster paths
    score below 1.
    """
    if model_cost <= 0:
        raise ValueError("model path cost must be positive")
    return 1.0 - abs(1.0 - dij_cost / model_cost)


def better_or_equal_rate(pairs) -> float:
    """Fraction of (dij_cost, model_cost) pairs where the model was at least as fast."""
    pairs = list(pairs)
    if not pairs:
        raise ValueError("better_or_equal_rate needs at least one pair")
    return sum(1 for dij, model in pairs if model <= dij) / len(pairs)
