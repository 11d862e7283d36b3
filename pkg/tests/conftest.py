from __future__ import annotations

import numpy as np
import pytest

from quakeroute.dyngraph import CityGraph, Scenario


def make_graph(coords, edges, lengths=None, speeds=None) -> CityGraph:
    coords = np.asarray(coords, float)
    edges = np.asarray([sorted(e) for e in edges], int)
    if lengths is None:
        lengths = np.linalg.norm(coords[edges[:, 0]] - coords[edges[:, 1]],
                                 axis=1) * 2000.0
    if speeds is None:
        speeds = np.full(len(edges), 60.0)
    return CityGraph(ids=np.arange(len(coords)), xy=coords, edges=edges,
                     length_m=np.asarray(lengths, float),
                     speed_kmh=np.asarray(speeds, float))


@pytest.fixture
def line3() -> CityGraph:
    """Three nodes in a row: 0 - 1 - 2, one-minute edges."""
    return make_graph([(0.0, 0.5), (0.5, 0.5), (1.0, 0.5)], [(0, 1), (1, 2)],
                      lengths=[1000.0, 1000.0], speeds=[60.0, 60.0])


@pytest.fixture
def triangle() -> CityGraph:
    """Triangle with weights 1, 1, 3 minutes on (0,1), (1,2), (0,2)."""
    return make_graph([(0.0, 0.0), (0.5, 1.0), (1.0, 0.0)],
                      [(0, 1), (1, 2), (0, 2)],
                      lengths=[1000.0, 1000.0, 3000.0],
                      speeds=[60.0, 60.0, 60.0])


def scenario_for(graph: CityGraph, start=0, exit_=None, epicenter=(0.0, 0.0),
                 seed=0, max_steps=None) -> Scenario:
    if exit_ is None:
        exit_ = graph.n_nodes - 1
    return Scenario(epicenter=epicenter, start=start, exits=(exit_,),
                    chosen_exit=exit_, rng_seed=seed,
                    max_steps=max_steps or 2 * graph.n_nodes)


def random_connected_graph(rng: np.random.Generator, n_nodes: int) -> CityGraph:
    """Small random connected graph with continuous random weights."""
    coords = rng.uniform(0, 1, (n_nodes, 2))
    edges = {(i - 1, i) for i in range(1, n_nodes)}  # chain keeps it connected
    n_extra = int(rng.integers(0, n_nodes))
    for _ in range(n_extra):
        u, v = sorted(rng.choice(n_nodes, 2, replace=False))
        edges.add((int(u), int(v)))
    edges = sorted(edges)
    lengths = rng.uniform(200.0, 3000.0, len(edges))
    speeds = rng.choice([30.0, 40.0, 50.0], len(edges))
    return make_graph(coords, edges, lengths, speeds)
