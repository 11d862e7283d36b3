"""Independent test oracles: brute-force path search, a pure-Python replay of
the weight dynamics, and a dense-matrix circuit simulator. These deliberately
avoid the package's own fast paths."""
from __future__ import annotations

import math

import numpy as np

from quakeroute.dyngraph import CityGraph
from quakeroute.qsim import Circuit, CNot


# ---------------------------------------------------------------------------
# Exhaustive shortest-path search


def all_simple_paths(adj: dict, start, goal):
    stack = [(start, [start])]
    while stack:
        node, path = stack.pop()
        if node == goal:
            yield path
            continue
        for nbr in adj[node]:
            if nbr not in path:
                stack.append((nbr, path + [nbr]))


def brute_force_shortest(graph: CityGraph, weights, start: int, goal: int):
    """Minimum-cost simple path by exhaustive enumeration.

    Costs accumulate left to right, matching how the path cost is summed
    elsewhere, so agreement can be asserted exactly. Ties break toward the
    lexicographically smaller node sequence.
    """
    adj = {u: [v for v, _ in graph.adj[u]] for u in range(graph.n_nodes)}
    ew = {}
    for e, (u, v) in enumerate(graph.edges):
        ew[(int(u), int(v))] = float(weights[e])
        ew[(int(v), int(u))] = float(weights[e])
    best = None
    for path in all_simple_paths(adj, start, goal):
        cost = 0.0
        for a, b in zip(path, path[1:]):
            cost = cost + ew[(a, b)]
        key = (cost, path)
        if best is None or key < best:
            best = key
    return best  # (cost, path) or None


def brute_force_edge_betweenness(graph: CityGraph, weights) -> np.ndarray:
    """Edge betweenness by enumerating every ordered pair's shortest paths.

    All cost-minimal simple paths of a pair share the credit equally.
    """
    adj = {u: [v for v, _ in graph.adj[u]] for u in range(graph.n_nodes)}
    ew = {}
    for e, (u, v) in enumerate(graph.edges):
        ew[(int(u), int(v))] = float(weights[e])
        ew[(int(v), int(u))] = float(weights[e])
    n = graph.n_nodes
    cb = np.zeros(graph.n_edges)
    for s in range(n):
        for t in range(n):
            if s == t:
                continue
            paths = list(all_simple_paths(adj, s, t))
            if not paths:
                continue
            costs = [sum(ew[(a, b)] for a, b in zip(p, p[1:])) for p in paths]
            lo = min(costs)
            shortest = [p for p, c in zip(paths, costs) if c <= lo + 1e-12 * max(1.0, lo)]
            for p in shortest:
                for a, b in zip(p, p[1:]):
                    cb[graph.edge_index(a, b)] += 1.0 / len(shortest)
    return cb / (n * (n - 1))


# ---------------------------------------------------------------------------
# Pure-Python environment replay


def replay_trajectory(graph: CityGraph, epicenter, exits, base_weights,
                      n_steps: int):
    """Step-by-step reimplementation of the weight dynamics with plain loops.

    Returns the list of weight dicts after the initial hit and after each of
    the ``n_steps`` world steps.
    """
    centers = []
    for (u, v) in graph.edges:
        cx = (graph.xy[u][0] + graph.xy[v][0]) / 2.0
        cy = (graph.xy[u][1] + graph.xy[v][1]) / 2.0
        centers.append((cx, cy))
    d_epi = [math.hypot(cx - epicenter[0], cy - epicenter[1]) for cx, cy in centers]
    d_exit = {
        e: [math.hypot(cx - graph.xy[e][0], cy - graph.xy[e][1])
            for cx, cy in centers]
        for e in exits
    }
    w = [float(x) for x in base_weights]

    # initial hit at t=0, damage radius 0.5
    r = 0.5 + math.sqrt(0.0002 * 0)
    for i in range(len(w)):
        d = d_epi[i]
        if d <= 0.3 * r:
            w[i] *= 5.0
        elif d <= 0.75 * r:
            w[i] *= 2.0
        elif d <= r:
            w[i] *= 1.3
    out = [list(w)]

    def grow(i, factor, cap):
        if w[i] > cap:
            return
        w[i] = min(w[i] * factor, cap)

    for t in range(n_steps):
        r = 0.5 + math.sqrt(0.0002 * t)
        for i in range(len(w)):
            d = d_epi[i]
            if d <= 0.3 * r:
                grow(i, math.sqrt(0.003 * t + 1.0), 5.0)
            elif d <= 0.75 * r:
                grow(i, math.sqrt(0.002 * t + 1.0), 4.0)
            elif d <= r:
                grow(i, math.sqrt(0.001 * t + 1.0), 3.0)
        re = math.sqrt(0.00075 * t)
        for e in exits:
            for i in range(len(w)):
                d = d_exit[e][i]
                if d <= 0.5 * re:
                    grow(i, math.sqrt(0.03 * t + 1.0), 5.0)
                elif d <= 0.75 * re:
                    grow(i, math.sqrt(0.02 * t + 1.0), 4.0)
                elif d <= re:
                    grow(i, math.sqrt(0.01 * t + 1.0), 3.0)
        out.append(list(w))
    return out


# ---------------------------------------------------------------------------
# Dense-matrix circuit oracle


def _rot_matrix(axis: str, theta: float) -> np.ndarray:
    c = math.cos(theta / 2.0)
    s = math.sin(theta / 2.0)
    if axis == "x":
        return np.array([[c, -1j * s], [-1j * s, c]])
    if axis == "y":
        return np.array([[c, -s], [s, c]])
    return np.array([[c - 1j * s, 0], [0, c + 1j * s]])


def _kron_chain(ops) -> np.ndarray:
    out = ops[0]
    for op in ops[1:]:
        out = np.kron(out, op)
    return out


def gate_matrix(gate, n: int, params, features) -> np.ndarray:
    eye = np.eye(2)
    if isinstance(gate, CNot):
        p0 = np.diag([1.0, 0.0])
        p1 = np.diag([0.0, 1.0])
        x = np.array([[0.0, 1.0], [1.0, 0.0]])
        ops0 = [eye] * n
        ops0[gate.control] = p0
        ops1 = [eye] * n
        ops1[gate.control] = p1
        ops1[gate.target] = x
        return _kron_chain(ops0) + _kron_chain(ops1)
    if gate.src == "const":
        theta = gate.offset
    elif gate.src == "param":
        theta = gate.scale * params[gate.index] + gate.offset
    else:
        theta = gate.scale * features[gate.index] + gate.offset
    ops = [eye] * n
    ops[gate.qubit] = _rot_matrix(gate.axis, float(theta))
    return _kron_chain(ops)


def circuit_unitary(circuit: Circuit, params, features=None) -> np.ndarray:
    """Full 2^n x 2^n unitary assembled gate by gate via Kronecker products."""
    dim = 1 << circuit.n_qubits
    u = np.eye(dim, dtype=complex)
    for gate in circuit.gates:
        u = gate_matrix(gate, circuit.n_qubits, params, features) @ u
    return u


def oracle_state(circuit: Circuit, params, features=None) -> np.ndarray:
    dim = 1 << circuit.n_qubits
    ket = np.zeros(dim, dtype=complex)
    ket[0] = 1.0
    return circuit_unitary(circuit, params, features) @ ket


def oracle_expectations(circuit: Circuit, params, features=None) -> np.ndarray:
    state = oracle_state(circuit, params, features)
    probs = np.abs(state) ** 2
    n = circuit.n_qubits
    out = []
    for q in circuit.measured:
        signs = 1.0 - 2.0 * ((np.arange(1 << n) >> (n - 1 - q)) & 1)
        out.append(float(probs @ signs))
    return np.array(out)
