"""City road network and its evolution under an earthquake and exit-point traffic.

The map lives in the unit square. Edge weights are travel times in minutes.
After an initial static hit around the epicenter, two ongoing mechanisms grow
weights every step: the quake's damage circle (slowly expanding) and traffic
circles around the exit nodes (expanding from radius zero). Growth saturates
at per-band caps.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path as FilePath

import numpy as np

# Damage radius at step t; the quake area starts at half the map and creeps outward.
EPI_RADIUS_BASE = 0.5
EPI_RADIUS_RATE = 0.0002
# Exit traffic circles start at a point and expand faster.
EXIT_RADIUS_RATE = 0.00075

# Ongoing mechanisms: inclusive band edges (fractions of the radius),
# per-band growth rates (inside sqrt(rate*t + 1)) and saturation caps.
QUAKE_BANDS = (0.3, 0.75, 1.0)
QUAKE_RATES = (0.003, 0.002, 0.001)
TRAFFIC_BANDS = (0.5, 0.75, 1.0)
TRAFFIC_RATES = (0.03, 0.02, 0.01)
BAND_CAPS = (5.0, 4.0, 3.0)

# Initial static quake multipliers over the same three quake bands.
INITIAL_FACTORS = (5.0, 2.0, 1.3)

SPEED_CHOICES_KMH = (30.0, 40.0, 50.0)


class GraphError(ValueError):
    """Malformed graph, unknown edge, or bad construction arguments."""


class StateError(RuntimeError):
    """Dynamic state used out of protocol (e.g. initial quake applied twice)."""


class BudgetExhausted(RuntimeError):
    """advance() called after the scenario's step budget was spent."""


@dataclass(frozen=True)
class CityGraph:
    """Immutable road network: node coordinates plus undirected edges.

    ``ids[i]`` is the public id of node index ``i``; generated graphs use
    ids 0..n-1. ``edges`` holds node *indices* with u < v.
    """

    ids: np.ndarray        # (n_nodes,) int
    xy: np.ndarray         # (n_nodes, 2) float, unit square
    edges: np.ndarray      # (n_edges, 2) int node indices, u < v
    length_m: np.ndarray   # (n_edges,) float
    speed_kmh: np.ndarray  # (n_edges,) float
    adj: tuple = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        xy = np.asarray(self.xy, float)
        if xy.ndim != 2 or xy.shape[1] != 2:
            raise GraphError("node coordinates must be an (n, 2) array")
        if xy.size and (xy.min() < -1e-9 or xy.max() > 1 + 1e-9):
            raise GraphError("node coordinates must lie in the unit square")
        edges = np.asarray(self.edges, int).reshape(-1, 2)
        if np.any(edges[:, 0] == edges[:, 1]):
            raise GraphError("self-loops are not allowed")
        if np.any(edges[:, 0] > edges[:, 1]):
            raise GraphError("edges must be stored with u < v")
        if len({(int(u), int(v)) for u, v in edges}) != len(edges):
            raise GraphError("duplicate undirected edges")
        if edges.size and edges.max() >= len(xy):
            raise GraphError("edge endpoint out of range")
        adjacency = [[] for _ in range(len(xy))]
        for e, (u, v) in enumerate(edges):
            adjacency[u].append((int(v), e))
            adjacency[v].append((int(u), e))
        object.__setattr__(self, "adj", tuple(tuple(sorted(a)) for a in adjacency))
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "xy", xy)
        object.__setattr__(self, "ids", np.asarray(self.ids, int))

    @property
    def n_nodes(self) -> int:
        return len(self.xy)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def degree(self, node: int) -> int:
        return len(self.adj[node])

    def edge_index(self, u: int, v: int) -> int:
        for nbr, e in self.adj[u]:
            if nbr == v:
                return e
        raise GraphError(f"no edge between nodes {u} and {v}")

    def neighbors(self, node: int) -> list[int]:
        return [nbr for nbr, _ in self.adj[node]]

    def nominal_minutes(self) -> np.ndarray:
        """Noise-free travel times: length over speed limit, in minutes."""
        return (self.length_m / 1000.0) / self.speed_kmh * 60.0


@dataclass(frozen=True)
class Scenario:
    """One evacuation instance: epicenter, start node, exits and the chosen one."""

    epicenter: tuple[float, float]
    start: int
    exits: tuple[int, ...]
    chosen_exit: int
    rng_seed: int
    max_steps: int

    def __post_init__(self):
        x, y = self.epicenter
        if not (0.0 <= x <= 1.0 and 0.0 <= y <= 1.0):
            raise GraphError("epicenter must lie in the unit square")
        if not self.exits:
            raise GraphError("at least one exit is required")
        if self.chosen_exit not in self.exits:
            raise GraphError("chosen exit must be one of the exits")
        if self.start in self.exits:
            raise GraphError("start node must not be an exit")
        if self.max_steps < 1:
            raise GraphError("max_steps must be positive")
        object.__setattr__(self, "exits", tuple(int(e) for e in self.exits))
        object.__setattr__(self, "epicenter", (float(x), float(y)))


def damage_radius(t: int | float) -> float:
    """Radius of the quake's area of effect at step t."""
    return EPI_RADIUS_BASE + math.sqrt(EPI_RADIUS_RATE * t)


def exit_radius(t: int | float) -> float:
    """Radius of one exit's traffic circle at step t."""
    return math.sqrt(EXIT_RADIUS_RATE * t)


def edge_center(graph: CityGraph, edge: tuple[int, int]) -> tuple[float, float]:
    """Midpoint of an edge, used as its position for all distance bands."""
    u, v = edge
    e = graph.edge_index(int(u), int(v))
    c = (graph.xy[graph.edges[e, 0]] + graph.xy[graph.edges[e, 1]]) / 2.0
    return float(c[0]), float(c[1])


def edge_centers(graph: CityGraph) -> np.ndarray:
    return (graph.xy[graph.edges[:, 0]] + graph.xy[graph.edges[:, 1]]) / 2.0


class DynamicState:
    """Per-scenario mutable overlay: current edge weights and the step counter.

    Weights only ever grow (ongoing growth saturates at the band caps); a
    weight pushed above a cap by the initial static quake is left untouched
    by the ongoing mechanisms.
    """

    def __init__(self, graph: CityGraph, scenario: Scenario, weights: np.ndarray):
        self.graph = graph
        self.scenario = scenario
        self.weights = np.asarray(weights, float).copy()
        self.base_weights = self.weights.copy()
        self.t = 0
        self.quake_applied = False
        centers = edge_centers(graph)
        self._d_epi = np.linalg.norm(centers - np.asarray(scenario.epicenter), axis=1)
        self._d_exit = {
            e: np.linalg.norm(centers - graph.xy[e], axis=1) for e in scenario.exits
        }

    def weight_of(self, u: int, v: int) -> float:
        return float(self.weights[self.graph.edge_index(u, v)])


def initial_state(graph: CityGraph, scenario: Scenario, sigma_frac: float = 0.1) -> DynamicState:
    """Fresh state at t=0 with per-scenario Gaussian base travel times.

    Base weights are sampled once here (seeded by the scenario) and stay
    fixed for the whole rollout, so oracle labels are stable.
    """
    nominal = graph.nominal_minutes()
    if sigma_frac == 0.0:
        weights = nominal.copy()
    else:
        rng = np.random.default_rng(scenario.rng_seed)
        draws = rng.normal(nominal, sigma_frac * nominal)
        weights = np.maximum(draws, 0.1 * nominal)
    return DynamicState(graph, scenario, weights)


def base_travel_time(length_m: float, speed_kmh: float, sigma_frac: float,
                     rng: np.random.Generator | None = None) -> float:
    """One sampled travel time in minutes, floored at 10% of nominal."""
    if length_m <= 0 or speed_kmh <= 0:
        raise GraphError("length and speed must be positive")
    if sigma_frac < 0:
        raise GraphError("sigma_frac must be non-negative")
    nominal = (length_m / 1000.0) / speed_kmh * 60.0
    if sigma_frac == 0.0:
        return nominal
    if rng is None:
        raise GraphError("an rng is required when sigma_frac > 0")
    return float(max(rng.normal(nominal, sigma_frac * nominal), 0.1 * nominal))


def _band_masks(dist: np.ndarray, radius: float, bands: tuple) -> list[np.ndarray]:
    masks = []
    lo = -1.0
    for frac in bands:
        hi = frac * radius
        masks.append((dist > lo) & (dist <= hi))
        lo = hi
    return masks


def apply_initial_quake(state: DynamicState, epicenter: tuple[float, float] | None = None) -> DynamicState:
    """One-off static damage multiplication around the epicenter (uncapped)."""
    if state.quake_applied:
        raise StateError("initial quake already applied")
    if epicenter is not None and tuple(epicenter) != state.scenario.epicenter:
        centers = edge_centers(state.graph)
        state._d_epi = np.linalg.norm(centers - np.asarray(epicenter, float), axis=1)
    r = damage_radius(0)
    for mask, factor in zip(_band_masks(state._d_epi, r, QUAKE_BANDS), INITIAL_FACTORS):
        state.weights[mask] *= factor
    state.quake_applied = True
    return state


def _grow_banded(weights: np.ndarray, dist: np.ndarray, radius: float,
                 bands: tuple, rates: tuple, t: int) -> None:
    # Growth saturates at the band cap; weights already above a cap (possible
    # only through the initial x5 hit) are left alone, never pulled down.
    if radius <= 0:
        return
    for mask, rate, cap in zip(_band_masks(dist, radius, bands), rates, BAND_CAPS):
        if not mask.any():
            continue
        w = weights[mask]
        factor = math.sqrt(rate * t + 1.0)
        weights[mask] = np.where(w > cap, w, np.minimum(w * factor, cap))


def step_quake(state: DynamicState) -> DynamicState:
    """Ongoing quake growth in the three damage bands at the current step."""
    if not state.quake_applied:
        raise StateError("initial quake must be applied before stepping")
    _grow_banded(state.weights, state._d_epi, damage_radius(state.t),
                 QUAKE_BANDS, QUAKE_RATES, state.t)
    return state


def step_traffic(state: DynamicState, exits: tuple[int, ...] | None = None) -> DynamicState:
    """Traffic growth around every exit's circle at the current step."""
    if exits is None:
        exits = state.scenario.exits
    r = exit_radius(state.t)
    for e in exits:
        d = state._d_exit.get(e)
        if d is None:
            centers = edge_centers(state.graph)
            d = np.linalg.norm(centers - state.graph.xy[e], axis=1)
            state._d_exit[e] = d
        _grow_banded(state.weights, d, r, TRAFFIC_BANDS, TRAFFIC_RATES, state.t)
    return state


def advance(state: DynamicState, exits: tuple[int, ...] | None = None) -> DynamicState:
    """One world step: quake growth, then traffic growth, then t += 1.

    The caller travels one node between calls. Raises BudgetExhausted once
    the scenario's step budget is spent.
    """
    if state.t >= state.scenario.max_steps:
        raise BudgetExhausted(f"step budget of {state.scenario.max_steps} exhausted")
    step_quake(state)
    step_traffic(state, exits)
    state.t += 1
    return state


# ---------------------------------------------------------------------------
# Synthetic city generation


def _connected(n_nodes: int, edges: list[tuple[int, int]]) -> bool:
    if n_nodes == 0:
        return True
    adjacency = [[] for _ in range(n_nodes)]
    for u, v in edges:
        adjacency[u].append(v)
        adjacency[v].append(u)
    seen = {0}
    stack = [0]
    while stack:
        u = stack.pop()
        for v in adjacency[u]:
            if v not in seen:
                seen.add(v)
                stack.append(v)
    return len(seen) == n_nodes


def synth_city(n_rows: int, n_cols: int, seed: int, span_m: float = 2000.0,
               delete_frac: float = 0.15) -> CityGraph:
    """Random grid-with-diagonals city in the unit square.

    Jittered grid nodes, rook edges plus one random diagonal per cell, then a
    random connectivity-preserving edge thinning and a degree-5 clamp.
    Deterministic in the seed. ``span_m`` maps the unit square to meters.
    """
    if n_rows < 2 or n_cols < 2:
        raise GraphError("need at least a 2x2 grid")
    rng = np.random.default_rng(seed)
    n = n_rows * n_cols

    def nid(r, c):
        return r * n_cols + c

    gx = np.repeat(np.arange(n_rows), n_cols) / (n_rows - 1)
    gy = np.tile(np.arange(n_cols), n_rows) / (n_cols - 1)
    jitter = 0.25 * min(1.0 / (n_rows - 1), 1.0 / (n_cols - 1))
    xy = np.stack([gx, gy], axis=1) + rng.uniform(-jitter, jitter, (n, 2))
    xy = np.clip(xy, 0.0, 1.0)

    edges: list[tuple[int, int]] = []
    for r in range(n_rows):
        for c in range(n_cols):
            if c + 1 < n_cols:
                edges.append((nid(r, c), nid(r, c + 1)))
            if r + 1 < n_rows:
                edges.append((nid(r, c), nid(r + 1, c)))
    for r in range(n_rows - 1):
        for c in range(n_cols - 1):
            if rng.random() < 0.5:
                edges.append((nid(r, c), nid(r + 1, c + 1)))
            else:
                edges.append((nid(r, c + 1), nid(r + 1, c)))

    # Thin edges at random while keeping the city connected.
    order = rng.permutation(len(edges))
    keep = set(range(len(edges)))
    for i in order:
        if rng.random() >= delete_frac:
            continue
        trial = [edges[j] for j in keep if j != i]
        if _connected(n, trial):
            keep.discard(int(i))
    edges = [edges[j] for j in sorted(keep)]

    # Clamp degrees to 5, preferring to drop diagonals (the longer edges).
    def degrees(es):
        d = np.zeros(n, int)
        for u, v in es:
            d[u] += 1
            d[v] += 1
        return d

    deg = degrees(edges)
    changed = True
    while changed and deg.max() > 5:
        changed = False
        hot = int(np.argmax(deg))
        incident = [e for e in edges if hot in e]
        incident.sort(key=lambda e: -np.linalg.norm(xy[e[0]] - xy[e[1]]))
        for e in incident:
            trial = [x for x in edges if x != e]
            if _connected(n, trial):
                edges = trial
                deg = degrees(edges)
                changed = True
                break
        if not changed:
            break

    edges_arr = np.array([(min(u, v), max(u, v)) for u, v in edges], int)
    order = np.lexsort((edges_arr[:, 1], edges_arr[:, 0]))
    edges_arr = edges_arr[order]
    length = np.linalg.norm(xy[edges_arr[:, 0]] - xy[edges_arr[:, 1]], axis=1) * span_m
    speed = rng.choice(SPEED_CHOICES_KMH, size=len(edges_arr))
    return CityGraph(ids=np.arange(n), xy=xy, edges=edges_arr,
                     length_m=length, speed_kmh=speed)


def pick_exits(graph: CityGraph, n_exits: int = 3) -> tuple[int, ...]:
    """Deterministic exit choice: nodes nearest to spread-out map border anchors."""
    anchors = [(0.0, 0.0), (1.0, 0.0), (0.5, 1.0), (0.0, 1.0), (1.0, 1.0)][:n_exits]
    exits: list[int] = []
    for ax, ay in anchors:
        d = np.linalg.norm(graph.xy - np.array([ax, ay]), axis=1)
        for i in np.argsort(d):
            if int(i) not in exits:
                exits.append(int(i))
                break
    return tuple(exits)


def random_scenario(graph: CityGraph, rng: np.random.Generator,
                    exits: tuple[int, ...] | None = None,
                    max_steps: int | None = None) -> Scenario:
    """Random epicenter, start and chosen exit; budget defaults to 2x node count."""
    if exits is None:
        exits = pick_exits(graph)
    epicenter = (float(rng.uniform()), float(rng.uniform()))
    candidates = [i for i in range(graph.n_nodes) if i not in exits]
    start = int(rng.choice(candidates))
    chosen = int(rng.choice(list(exits)))
    if max_steps is None:
        max_steps = 2 * graph.n_nodes
    seed = int(rng.integers(0, 2**32))
    return Scenario(epicenter=epicenter, start=start, exits=tuple(exits),
                    chosen_exit=chosen, rng_seed=seed, max_steps=max_steps)


# ---------------------------------------------------------------------------
# Graph and scenario files


def save_graph(graph: CityGraph, path: str | FilePath) -> None:
    doc = {
        "nodes": [
            {"id": int(i), "x": float(x), "y": float(y)}
            for i, (x, y) in zip(graph.ids, graph.xy)
        ],
        "edges": [
            {"u": int(graph.ids[u]), "v": int(graph.ids[v]),
             "length_m": float(l), "speed_kmh": float(s)}
            for (u, v), l, s in zip(graph.edges, graph.length_m, graph.speed_kmh)
        ],
    }
    FilePath(path).write_text(json.dumps(doc, indent=1) + "\n")


def load_graph(path: str | FilePath) -> CityGraph:
    doc = json.loads(FilePath(path).read_text())
    nodes = doc["nodes"]
    ids = np.array([n["id"] for n in nodes], int)
    index = {int(i): k for k, i in enumerate(ids)}
    xy = np.array([[n["x"], n["y"]] for n in nodes], float)
    edges = np.array(
        [sorted((index[int(e["u"])], index[int(e["v"])])) for e in doc["edges"]], int
    ).reshape(-1, 2)
    length = np.array([e["length_m"] for e in doc["edges"]], float)
    speed = np.array([e["speed_kmh"] for e in doc["edges"]], float)
    return CityGraph(ids=ids, xy=xy, edges=edges, length_m=length, speed_kmh=speed)


def save_scenario(scenario: Scenario, path: str | FilePath) -> None:
    doc = {
        "epicenter": list(scenario.epicenter),
        "start": scenario.start,
        "exits": list(scenario.exits),
        "chosen_exit": scenario.chosen_exit,
        "rng_seed": scenario.rng_seed,
        "max_steps": scenario.max_steps,
    }
    FilePath(path).write_text(json.dumps(doc, indent=1) + "\n")


def load_scenario(path: str | FilePath) -> Scenario:
    doc = json.loads(FilePath(path).read_text())
    return Scenario(
        epicenter=tuple(doc["epicenter"]), start=int(doc["start"]),
        exits=tuple(doc["exits"]), chosen_exit=int(doc["chosen_exit"]),
        rng_seed=int(doc["rng_seed"]), max_steps=int(doc["max_steps"]),
    )
