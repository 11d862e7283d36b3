"""Model inputs and supervised dataset generation.

Each decision point becomes a 36-value vector: the quake epicenter, the
current node, the destination, and one six-value block per adjacent edge
(neighbor coordinates, scaled travel time, edge betweenness, distance to the
destination, heading cosine), zero-padded to five blocks.
"""
from __future__ import annotations

import heapq
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path as FilePath

import numpy as np

from . import dyngraph, oracle
from .dyngraph import CityGraph, GraphError, Scenario

log = logging.getLogger(__name__)

N_FEATURES = 36
N_BLOCKS = 5
BLOCK_SIZE = 6
HEAD_SIZE = 6
# Travel times are divided by the global weight cap so they land in [0, 1]
# (the uncapped initial x5 hit can push a little above 1).
WEIGHT_SCALE = 5.0


@dataclass
class Sample:
    """One oracle decision: input vector plus the chosen neighbor block index."""

    features: np.ndarray  # (36,)
    label: int
    scenario_id: int
    t: int


def euclid(p, q) -> float:
    return math.hypot(q[0] - p[0], q[1] - p[1])


def direction_cosine(current, neighbor, target) -> float:
    """Cosine between the step direction and the direction to the target.

    Degenerate (zero-length) directions score 0 and are logged.
    """
    ax, ay = neighbor[0] - current[0], neighbor[1] - current[1]
    bx, by = target[0] - current[0], target[1] - current[1]
    na = math.hypot(ax, ay)
    nb = math.hypot(bx, by)
    if na == 0.0 or nb == 0.0:
        log.debug("degenerate direction cosine at %s", current)
        return 0.0
    return (ax * bx + ay * by) / (na * nb)


def edge_betweenness(graph: CityGraph, weights: np.ndarray | None = None) -> np.ndarray:
    """Per-edge betweenness: fraction of all ordered shortest paths using the edge.

    Brandes accumulation over every source with the undamaged travel times;
    equal-cost paths split their count. Normalized by n(n-1), so cross-pairs
    of a disconnected graph simply contribute nothing.
    """
    if weights is None:
        weights = graph.nominal_minutes()
    n = graph.n_nodes
    cb = np.zeros(graph.n_edges)
    for s in range(n):
        dist = np.full(n, np.inf)
        sigma = np.zeros(n)
        preds: list[list[tuple[int, int]]] = [[] for _ in range(n)]
        dist[s] = 0.0
        sigma[s] = 1.0
        done = np.zeros(n, bool)
        heap = [(0.0, s)]
        order: list[int] = []
        while heap:
            d, u = heapq.heappop(heap)
            if done[u]:
                continue
            done[u] = True
            order.append(u)
            for v, e in graph.adj[u]:
                nd = d + weights[e]
                tol = 1e-12 * max(1.0, nd)
                if nd < dist[v] - tol:
                    dist[v] = nd
                    sigma[v] = sigma[u]
                    preds[v] = [(u, e)]
                    heapq.heappush(heap, (nd, v))
                elif abs(nd - dist[v]) <= tol and not done[v]:
                    sigma[v] += sigma[u]
                    preds[v].append((u, e))
        delta = np.zeros(n)
        for w in reversed(order):
            for v, e in preds[w]:
                share = sigma[v] / sigma[w] * (1.0 + delta[w])
                cb[e] += share
                delta[v] += share
    return cb / (n * (n - 1))


def build_feature_vector(state: dyngraph.DynamicState, scenario: Scenario,
                         current: int, betweenness: np.ndarray | None = None):
    """Feature vector at a decision node.

    Returns ``(features, mask, neighbors)``: the 36-value input, a boolean
    mask over the five blocks (False = zero padding) and the neighbor ids in
    block order (ascending id).
    """
    graph = state.graph
    neighbors = graph.neighbors(current)
    if len(neighbors) > N_BLOCKS:
        raise GraphError(f"node {current} has degree {len(neighbors)} > {N_BLOCKS}")
    if betweenness is None:
        betweenness = edge_betweenness(graph)
    dest = scenario.chosen_exit
    dest_xy = graph.xy[dest]
    cur_xy = graph.xy[current]

    feats = np.zeros(N_FEATURES)
    feats[0:2] = scenario.epicenter
    feats[2:4] = cur_xy
    feats[4:6] = dest_xy
    mask = np.zeros(N_BLOCKS, bool)
    for j, v in enumerate(neighbors):
        e = graph.edge_index(current, v)
        base = HEAD_SIZE + j * BLOCK_SIZE
        feats[base:base + 2] = graph.xy[v]
        feats[base + 2] = state.weights[e] / WEIGHT_SCALE
        feats[base + 3] = betweenness[e]
        feats[base + 4] = euclid(graph.xy[v], dest_xy)
        feats[base + 5] = direction_cosine(cur_xy, graph.xy[v], dest_xy)
        mask[j] = True
    return feats, mask, neighbors


def block_mask(features: np.ndarray) -> np.ndarray:
    """Recover the neighbor mask from a stored vector (padding blocks have w == 0)."""
    feats = np.asarray(features)
    w = feats[..., HEAD_SIZE + 2::BLOCK_SIZE]
    return w > 0.0


@dataclass
class Dataset:
    samples: list[Sample]

    def __len__(self):
        return len(self.samples)

    def __iter__(self):
        return iter(self.samples)

    def __getitem__(self, i):
        return self.samples[i]

    def feature_matrix(self) -> np.ndarray:
        return np.stack([s.features for s in self.samples])

    def labels(self) -> np.ndarray:
        return np.array([s.label for s in self.samples], int)

    def masks(self) -> np.ndarray:
        return block_mask(self.feature_matrix())

    def scenario_ids(self) -> np.ndarray:
        return np.array([s.scenario_id for s in self.samples], int)

    def save_jsonl(self, path: str | FilePath) -> None:
        with open(path, "w") as fh:
            for s in self.samples:
                fh.write(json.dumps({
                    "features": [float(x) for x in s.features],
                    "label": int(s.label),
                    "scenario_id": int(s.scenario_id),
                    "t": int(s.t),
                }) + "\n")

    @staticmethod
    def load_jsonl(path: str | FilePath) -> "Dataset":
        samples = []
        with open(path) as fh:
            for line in fh:
                if not line.strip():
                    continue
                doc = json.loads(line)
                samples.append(Sample(
                    features=np.asarray(doc["features"], float),
                    label=int(doc["label"]),
                    scenario_id=int(doc["scenario_id"]),
                    t=int(doc["t"]),
                ))
        return Dataset(samples)

    def split(self, val_fraction: float = 0.1, seed: int = 0):
        """Train/validation split by scenario, so no rollout leaks across."""
        ids = sorted({s.scenario_id for s in self.samples})
        rng = np.random.default_rng(seed)
        rng.shuffle(ids)
        n_val = max(1, round(val_fraction * len(ids))) if len(ids) > 1 else 0
        val_ids = set(ids[:n_val])
        train = [s for s in self.samples if s.scenario_id not in val_ids]
        val = [s for s in self.samples if s.scenario_id in val_ids]
        return Dataset(train), Dataset(val)


def _roll_scenario(graph: CityGraph, scenario: Scenario, scenario_id: int,
                   betweenness: np.ndarray, sigma_frac: float) -> list[Sample]:
    samples: list[Sample] = []

    def record(state, node, chosen):
        feats, mask, neighbors = build_feature_vector(state, scenario, node, betweenness)
        samples.append(Sample(features=feats, label=neighbors.index(chosen),
                              scenario_id=scenario_id, t=state.t))

    path = oracle.nodewise_dijkstra(graph, scenario, sigma_frac, on_decision=record)
    if not path.reached:
        log.warning("scenario %d skipped: budget exhausted after %d steps",
                    scenario_id, len(path) - 1)
        return []
    return samples


def _scenario_for_index(graph: CityGraph, seed: int, index: int,
                        exits, max_steps) -> Scenario:
    rng = np.random.default_rng(np.random.SeedSequence([seed, index]))
    return dyngraph.random_scenario(graph, rng, exits=exits, max_steps=max_steps)


def _gen_worker(args) -> list[Sample]:
    graph, seed, index, exits, max_steps, betweenness, sigma_frac = args
    scenario = _scenario_for_index(graph, seed, index, exits, max_steps)
    try:
        return _roll_scenario(graph, scenario, index, betweenness, sigma_frac)
    except oracle.NoPathError as exc:
        log.warning("scenario %d skipped: %s", index, exc)
        return []


def generate_dataset(graph: CityGraph, n_scenarios: int, seed: int,
                     sigma_frac: float = 0.1, exits=None, max_steps=None,
                     jobs: int = 1) -> Dataset:
    """Oracle-labeled corpus over randomized scenarios, deterministic in the seed.

    Each scenario draws a fresh epicenter, start and chosen exit; every node
    the oracle visits emits one sample labeled with the block index of the
    oracle's move. Scenarios whose oracle rollout fails are skipped.
    """
    if n_scenarios < 1:
        raise ValueError("n_scenarios must be at least 1")
    betweenness = edge_betweenness(graph)
    tasks = [(graph, seed, i, exits, max_steps, betweenness, sigma_frac)
             for i in range(n_scenarios)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_gen_worker, tasks, chunksize=8))
    else:
        results = [_gen_worker(t) for t in tasks]
    samples = [s for scenario_samples in results for s in scenario_samples]
    return Dataset(samples)
