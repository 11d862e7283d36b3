"""Dense statevector simulator and the hybrid model's quantum circuit.

The circuit has a two-qubit section that re-uploads the epicenter coordinates
and a five-qubit section that encodes the remaining features subvector by
subvector, each interlaced with entangler layers; the sections are joined by
a CNOT bridge and a final entangler before Z measurements of the five main
qubits. Gradients use the exact two-term parameter-shift rule.

States are complex128 arrays of shape (..., 2**n); qubit 0 is the most
significant bit of the amplitude index. Everything is batched over leading
axes.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

N_MAIN_FEATURES = 34
N_EPI_FEATURES = 2


class CircuitError(ValueError):
    """Bad circuit structure or mismatched parameter vector."""


class BindingError(ValueError):
    """A feature or parameter slot was left unbound at export/run time."""


@dataclass(frozen=True)
class Rot:
    """Single-qubit rotation; angle = scale * source[index] + offset."""

    axis: str                 # "x" | "y" | "z"
    qubit: int
    src: str = "const"        # "param" | "feature" | "const"
    index: int = -1
    scale: float = 1.0
    offset: float = 0.0

    def __post_init__(self):
        if self.axis not in ("x", "y", "z"):
            raise CircuitError(f"unknown rotation axis {self.axis!r}")
        if self.src not in ("param", "feature", "const"):
            raise CircuitError(f"unknown angle source {self.src!r}")


@dataclass(frozen=True)
class CNot:
    control: int
    target: int

    def __post_init__(self):
        if self.control == self.target:
            raise CircuitError("control and target must differ")


@dataclass(frozen=True)
class Circuit:
    """Gate list with parameter/feature slots and the measured qubits."""

    n_qubits: int
    gates: tuple
    n_params: int
    n_features: int
    measured: tuple[int, ...]

    def __post_init__(self):
        for g in self.gates:
            qubits = (g.qubit,) if isinstance(g, Rot) else (g.control, g.target)
            for q in qubits:
                if not 0 <= q < self.n_qubits:
                    raise CircuitError(f"qubit {q} out of range")
            if isinstance(g, Rot) and g.src == "param":
                if not 0 <= g.index < self.n_params:
                    raise CircuitError(f"parameter slot {g.index} out of range")
            if isinstance(g, Rot) and g.src == "feature":
                if not 0 <= g.index < self.n_features:
                    raise CircuitError(f"feature slot {g.index} out of range")
        for q in self.measured:
            if not 0 <= q < self.n_qubits:
                raise CircuitError(f"measured qubit {q} out of range")

    def param_occurrences(self, index: int) -> list[tuple[int, float]]:
        """Gate positions (and angle scales) where parameter ``index`` enters."""
        return [(pos, g.scale) for pos, g in enumerate(self.gates)
                if isinstance(g, Rot) and g.src == "param" and g.index == index]

    def census(self) -> dict[str, int]:
        counts = {"rx": 0, "ry": 0, "rz": 0, "cx": 0}
        for g in self.gates:
            counts["cx" if isinstance(g, CNot) else f"r{g.axis}"] += 1
        return counts


# ---------------------------------------------------------------------------
# Statevector engine


def zero_state(n_qubits: int, batch_shape: tuple = ()) -> np.ndarray:
    state = np.zeros(batch_shape + (1 << n_qubits,), complex)
    state[..., 0] = 1.0
    return state


def _apply_rot(state: np.ndarray, n: int, qubit: int, axis: str, theta) -> np.ndarray:
    lead = 1 << qubit
    trail = 1 << (n - qubit - 1)
    s = state.reshape(state.shape[:-1] + (lead, 2, trail))
    theta = np.asarray(theta)
    half = theta / 2.0
    c = np.cos(half)
    sn = np.sin(half)
    if theta.ndim:  # batched per-sample angles
        c = c.reshape(c.shape + (1, 1))
        sn = sn.reshape(sn.shape + (1, 1))
    s0 = s[..., 0, :]
    s1 = s[..., 1, :]
    if axis == "x":
        r0 = c * s0 - 1j * sn * s1
        r1 = -1j * sn * s0 + c * s1
    elif axis == "y":
        r0 = c * s0 - sn * s1
        r1 = sn * s0 + c * s1
    else:
        r0 = (c - 1j * sn) * s0
        r1 = (c + 1j * sn) * s1
    return np.stack([r0, r1], axis=-2).reshape(state.shape)


@lru_cache(maxsize=None)
def _cx_perm(n: int, control: int, target: int) -> np.ndarray:
    idx = np.arange(1 << n)
    cbit = (idx >> (n - 1 - control)) & 1
    return np.where(cbit == 1, idx ^ (1 << (n - 1 - target)), idx)


def _apply_cx(state: np.ndarray, n: int, control: int, target: int) -> np.ndarray:
    return state[..., _cx_perm(n, control, target)]


def _gate_angle(gate: Rot, params, features):
    if gate.src == "const":
        return gate.offset
    if gate.src == "param":
        return gate.scale * params[gate.index] + gate.offset
    if features is None:
        raise BindingError(f"feature slot {gate.index} is unbound")
    return gate.scale * np.asarray(features)[..., gate.index] + gate.offset


def _run_gates(state: np.ndarray, n: int, gates, params, features,
               override: tuple[int, float] | None = None) -> np.ndarray:
    for pos, g in enumerate(gates):
        if isinstance(g, CNot):
            state = _apply_cx(state, n, g.control, g.target)
            continue
        angle = _gate_angle(g, params, features)
        if override is not None and pos == override[0]:
            angle = angle + override[1]
        state = _apply_rot(state, n, g.qubit, g.axis, angle)
    return state


def run(circuit: Circuit, params, features=None,
        override: tuple[int, float] | None = None) -> np.ndarray:
    """Simulate the circuit; returns amplitudes of shape (batch..., 2**n)."""
    params = np.asarray(params, float)
    if params.shape != (circuit.n_params,):
        raise CircuitError(
            f"expected {circuit.n_params} parameters, got {params.shape}")
    batch = ()
    if features is not None:
        features = np.asarray(features, float)
        if features.shape[-1] != circuit.n_features:
            raise CircuitError(
                f"expected {circuit.n_features} features, got {features.shape[-1]}")
        batch = features.shape[:-1]
    state = zero_state(circuit.n_qubits, batch)
    return _run_gates(state, circuit.n_qubits, circuit.gates, params, features, override)


@lru_cache(maxsize=None)
def _z_signs(n: int, qubit: int) -> np.ndarray:
    idx = np.arange(1 << n)
    return 1.0 - 2.0 * ((idx >> (n - 1 - qubit)) & 1)


def probabilities(state: np.ndarray) -> np.ndarray:
    return np.abs(state) ** 2


def expectation_z(state: np.ndarray, qubit: int, n_qubits: int | None = None):
    """Pauli-Z expectation of one qubit from the amplitudes."""
    if n_qubits is None:
        n_qubits = int(round(math.log2(state.shape[-1])))
    return probabilities(state) @ _z_signs(n_qubits, qubit)


def measured_expectations(circuit: Circuit, state: np.ndarray) -> np.ndarray:
    vals = [expectation_z(state, q, circuit.n_qubits) for q in circuit.measured]
    return np.stack([np.asarray(v) for v in vals], axis=-1)


def sample_bitstrings(state: np.ndarray, shots: int, rng: np.random.Generator,
                      qubits: tuple[int, ...] | None = None) -> np.ndarray:
    """Computational-basis shots; returns (shots, len(qubits)) of 0/1."""
    if state.ndim != 1:
        raise CircuitError("shot sampling expects a single (unbatched) state")
    n = int(round(math.log2(state.shape[-1])))
    if qubits is None:
        qubits = tuple(range(n))
    p = probabilities(state)
    p = p / p.sum()
    draws = rng.choice(len(p), size=shots, p=p)
    return np.stack([(draws >> (n - 1 - q)) & 1 for q in qubits], axis=1)


# ---------------------------------------------------------------------------
# Spec'd single-state wrapper


@dataclass
class StateVector:
    amplitudes: np.ndarray
    n_qubits: int

    @staticmethod
    def zero(n_qubits: int) -> "StateVector":
        return StateVector(zero_state(n_qubits), n_qubits)

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))


def apply_gate(state: StateVector, gate) -> StateVector:
    """Apply one Rot or CNot to a state, returning the updated state."""
    n = state.n_qubits
    if isinstance(gate, CNot):
        if not (0 <= gate.control < n and 0 <= gate.target < n):
            raise CircuitError("gate qubit out of range")
        amps = _apply_cx(state.amplitudes, n, gate.control, gate.target)
    elif isinstance(gate, Rot):
        if not 0 <= gate.qubit < n:
            raise CircuitError("gate qubit out of range")
        if gate.src != "const":
            raise BindingError("apply_gate needs a concrete angle (src='const')")
        amps = _apply_rot(state.amplitudes, n, gate.qubit, gate.axis, gate.offset)
    else:
        raise CircuitError(f"unknown gate {gate!r}")
    return StateVector(amps, n)


def bel_layer(state: StateVector, thetas) -> StateVector:
    """Entangler block: per sublayer, an X rotation on every qubit followed by
    a cyclic CNOT ring. ``thetas`` has length sublayers * n_qubits."""
    thetas = np.asarray(thetas, float).ravel()
    n = state.n_qubits
    if len(thetas) % n:
        raise CircuitError(f"theta count {len(thetas)} not a multiple of {n} qubits")
    amps = state.amplitudes
    for layer in thetas.reshape(-1, n):
        for q, th in enumerate(layer):
            amps = _apply_rot(amps, n, q, "x", th)
        if n > 1:
            for q in range(n):
                amps = _apply_cx(amps, n, q, (q + 1) % n)
    return StateVector(amps, n)


# ---------------------------------------------------------------------------
# Circuit builders


@dataclass(frozen=True)
class ModelConfig:
    """Shape of the seven-qubit hybrid circuit."""

    film_qubits: int = 2
    main_qubits: int = 5
    sublayers: int = 4
    reuploads: int = 5
    subvectors: int = 7
    repeats: int = 1
    feature_scale: float = math.pi  # inputs in [0,1] map to [0, pi]

    def __post_init__(self):
        if self.main_qubits * self.subvectors < N_MAIN_FEATURES:
            raise CircuitError("subvectors cannot hold the 34 main features")
        if self.repeats != 1:
            raise CircuitError("only a single stack repeat is supported")

    @property
    def n_qubits(self) -> int:
        return self.film_qubits + self.main_qubits

    @property
    def n_film_params(self) -> int:
        return self.sublayers * self.film_qubits * (self.reuploads + 1)

    @property
    def n_main_params(self) -> int:
        return self.sublayers * self.main_qubits * (self.subvectors + 1)

    @property
    def n_final_params(self) -> int:
        return self.sublayers * self.main_qubits

    @property
    def n_params(self) -> int:
        return self.n_film_params + self.n_main_params + self.n_final_params


def entangler_gates(qubits: tuple[int, ...], sublayers: int, first_param: int):
    """Gates of one entangler block; returns (gates, next_param_index)."""
    gates: list = []
    p = first_param
    for _ in range(sublayers):
        for q in qubits:
            gates.append(Rot("x", q, "param", p))
            p += 1
        if len(qubits) > 1:
            for i, q in enumerate(qubits):
                gates.append(CNot(q, qubits[(i + 1) % len(qubits)]))
    return gates, p


def _film_gates(config: ModelConfig, qubits: tuple[int, ...], first_param: int,
                feature_index: tuple[int, int]):
    """Epicenter section: entangler, then `reuploads` x [Z encodings, entangler]."""
    gates, p = entangler_gates(qubits, config.sublayers, first_param)
    fx, fy = feature_index
    for _ in range(config.reuploads):
        gates.append(Rot("z", qubits[0], "feature", fx, scale=config.feature_scale))
        gates.append(Rot("z", qubits[1], "feature", fy, scale=config.feature_scale))
        block, p = entangler_gates(qubits, config.sublayers, p)
        gates.extend(block)
    return gates, p


def _main_gates(config: ModelConfig, qubits: tuple[int, ...], first_param: int,
                first_feature: int):
    """Main section: entangler, then one [Z-encoded subvector, entangler] per
    subvector; missing trailing features encode as zero padding."""
    gates, p = entangler_gates(qubits, config.sublayers, first_param)
    for l in range(config.subvectors):
        for t, q in enumerate(qubits):
            f = l * len(qubits) + t
            if f < N_MAIN_FEATURES:
                gates.append(Rot("z", q, "feature", first_feature + f,
                                 scale=config.feature_scale))
            else:
                gates.append(Rot("z", q, "const", offset=0.0))
        block, p = entangler_gates(qubits, config.sublayers, p)
        gates.extend(block)
    return gates, p


def _tail_gates(config: ModelConfig, film_qubits: tuple[int, ...],
                main_qubits: tuple[int, ...], first_param: int):
    """Bridge CNOTs from every film qubit to every main qubit, then the final
    entangler over the main qubits."""
    gates: list = [CNot(c, t) for c in film_qubits for t in main_qubits]
    block, p = entangler_gates(main_qubits, config.sublayers, first_param)
    gates.extend(block)
    return gates, p


def build_model_circuit(config: ModelConfig = ModelConfig()) -> Circuit:
    """The full seven-qubit circuit; features are [34 main values, x_epi, y_epi]."""
    film_qubits = tuple(range(config.film_qubits))
    main_qubits = tuple(range(config.film_qubits, config.n_qubits))
    film, p = _film_gates(config, film_qubits, 0,
                          (N_MAIN_FEATURES, N_MAIN_FEATURES + 1))
    main, p = _main_gates(config, main_qubits, p, 0)
    tail, p = _tail_gates(config, film_qubits, main_qubits, p)
    assert p == config.n_params
    return Circuit(n_qubits=config.n_qubits, gates=tuple(film + main + tail),
                   n_params=p, n_features=N_MAIN_FEATURES + N_EPI_FEATURES,
                   measured=main_qubits)


def build_film_circuit(config: ModelConfig = ModelConfig()) -> Circuit:
    """Standalone epicenter section on its own two qubits."""
    qubits = tuple(range(config.film_qubits))
    gates, p = _film_gates(config, qubits, 0, (0, 1))
    return Circuit(n_qubits=config.film_qubits, gates=tuple(gates), n_params=p,
                   n_features=2, measured=qubits)


def build_main_circuit(config: ModelConfig = ModelConfig()) -> Circuit:
    """Standalone main-feature section on its own five qubits."""
    qubits = tuple(range(config.main_qubits))
    gates, p = _main_gates(config, qubits, 0, 0)
    return Circuit(n_qubits=config.main_qubits, gates=tuple(gates), n_params=p,
                   n_features=N_MAIN_FEATURES, measured=qubits)


def film_section(x_epi: float, y_epi: float, thetas,
                 config: ModelConfig = ModelConfig()) -> np.ndarray:
    """Two-qubit state after the epicenter section (inputs already in [0, 1])."""
    circuit = build_film_circuit(config)
    thetas = np.asarray(thetas, float)
    if thetas.shape != (circuit.n_params,):
        raise CircuitError(f"expected {circuit.n_params} angles, got {thetas.shape}")
    return run(circuit, thetas, np.array([x_epi, y_epi]))


def main_section(features, thetas, config: ModelConfig = ModelConfig()) -> np.ndarray:
    """Five-qubit state after the main-feature section."""
    circuit = build_main_circuit(config)
    thetas = np.asarray(thetas, float)
    if thetas.shape != (circuit.n_params,):
        raise CircuitError(f"expected {circuit.n_params} angles, got {thetas.shape}")
    features = np.asarray(features, float)
    if features.shape[-1] != N_MAIN_FEATURES:
        raise CircuitError(f"expected {N_MAIN_FEATURES} features")
    return run(circuit, thetas, features)


@lru_cache(maxsize=4)
def _cached_model_circuit(config: ModelConfig) -> Circuit:
    return build_model_circuit(config)


def full_forward(features, epi, params,
                 config: ModelConfig = ModelConfig()) -> np.ndarray:
    """Z expectations of the five main qubits, batched over leading axes."""
    circuit = _cached_model_circuit(config)
    features = np.asarray(features, float)
    single = features.ndim == 1
    features = np.atleast_2d(features)
    epi = np.atleast_2d(np.asarray(epi, float))
    if features.shape[-1] != N_MAIN_FEATURES or epi.shape[-1] != N_EPI_FEATURES:
        raise CircuitError("expected 34 main features and 2 epicenter values")
    joint = np.concatenate([features, np.broadcast_to(epi, (len(features), 2))], axis=-1)
    state = run(circuit, params, joint)
    out = measured_expectations(circuit, state)
    return out[0] if single else out


# ---------------------------------------------------------------------------
# Parameter-shift gradients


def _shift_outputs(circuit: Circuit, params, features, outputs_fn, index: int):
    grad = None
    for pos, scale in circuit.param_occurrences(index):
        plus = outputs_fn(run(circuit, params, features, override=(pos, +np.pi / 2)))
        minus = outputs_fn(run(circuit, params, features, override=(pos, -np.pi / 2)))
        term = scale * (plus - minus) / 2.0
        grad = term if grad is None else grad + term
    if grad is None:  # parameter not used by any gate
        probe = outputs_fn(run(circuit, params, features))
        grad = np.zeros_like(probe)
    return grad


def param_shift_grad(circuit: Circuit, params, features=None, index: int | None = None):
    """Exact gradient of the measured-qubit Z expectations.

    For one index returns (..., n_measured); for index=None the full Jacobian
    stacked over parameters. Shared parameter slots sum their shift terms.
    """
    params = np.asarray(params, float)
    outputs = lambda s: measured_expectations(circuit, s)
    if index is not None:
        if not 0 <= index < circuit.n_params:
            raise CircuitError(f"parameter index {index} out of range")
        return _shift_outputs(circuit, params, features, outputs, index)
    return np.stack([_shift_outputs(circuit, params, features, outputs, i)
                     for i in range(circuit.n_params)])


def prob_grad(circuit: Circuit, params, features=None, index: int | None = None):
    """Parameter-shift gradient of all basis-state probabilities."""
    params = np.asarray(params, float)
    if index is not None:
        if not 0 <= index < circuit.n_params:
            raise CircuitError(f"parameter index {index} out of range")
        return _shift_outputs(circuit, params, features, probabilities, index)
    return np.stack([_shift_outputs(circuit, params, features, probabilities, i)
                     for i in range(circuit.n_params)])


# ---------------------------------------------------------------------------
# OpenQASM 3 export


def export_qasm3(circuit: Circuit, params, features=None) -> str:
    """OpenQASM 3.0 text with every slot bound to a concrete angle."""
    params = np.asarray(params, float)
    if params.shape != (circuit.n_params,):
        raise BindingError(f"expected {circuit.n_params} bound parameters")
    if circuit.n_features and features is None:
        raise BindingError("feature values are required to bind the circuit")
    if features is not None:
        features = np.asarray(features, float)
        if features.ndim != 1 or features.shape[0] != circuit.n_features:
            raise BindingError(f"expected {circuit.n_features} bound features")
    lines = [
        "OPENQASM 3.0;",
        'include "stdgates.inc";',
        f"qubit[{circuit.n_qubits}] q;",
        f"bit[{len(circuit.measured)}] c;",
    ]
    for g in circuit.gates:
        if isinstance(g, CNot):
            lines.append(f"cx q[{g.control}], q[{g.target}];")
        else:
            angle = float(_gate_angle(g, params, features))
            lines.append(f"r{g.axis}({angle!r}) q[{g.qubit}];")
    for k, q in enumerate(circuit.measured):
        lines.append(f"c[{k}] = measure q[{q}];")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Batched-observable helpers for the training kernel


def _apply_pauli(state: np.ndarray, n: int, qubit: int, axis: str) -> np.ndarray:
    """X, Y or Z applied to one qubit of a (..., 2**n) state."""
    signs = _z_signs(n, qubit)
    if axis == "z":
        return state * signs
    flipped = state[..., np.arange(1 << n) ^ (1 << (n - 1 - qubit))]
    if axis == "x":
        return flipped
    return flipped * (-1j * signs)  # Y = -i |bit> sign convention after flip


# ---------------------------------------------------------------------------
# Fast expectation/gradient kernel for training


class ModelKernel:
    """Batched forward and parameter-shift gradients for the full model.

    Exploits that the two sections act on disjoint qubits until the bridge:
    section states are simulated separately and joined as a tensor product,
    and for gradients the measured observables are pulled back through the
    fixed tail so each shifted section evaluation stays in its small space.
    """

    def __init__(self, config: ModelConfig = ModelConfig()):
        self.config = config
        fq = tuple(range(config.film_qubits))
        mq_local = tuple(range(config.main_qubits))
        mq_global = tuple(range(config.film_qubits, config.n_qubits))
        self.film_gates, p = _film_gates(config, fq, 0, (0, 1))
        self.main_gates, p = _main_gates(config, mq_local, p, 0)
        self.tail_gates, p = _tail_gates(config, fq, mq_global, p)
        self.n_params = p
        n = config.n_qubits
        self._zsigns = np.stack([_z_signs(n, q) for q in mq_global])  # (5, 128)

    # -- section simulation -------------------------------------------------

    def _run_section(self, gates, n, params, features, cache=None,
                     start: int = 0, state=None, override=None):
        if state is None:
            batch = features.shape[:-1]
            state = zero_state(n, batch)
        for pos in range(start, len(gates)):
            g = gates[pos]
            if cache is not None:
                cache.append(state)
            if isinstance(g, CNot):
                state = _apply_cx(state, n, g.control, g.target)
                continue
            angle = _gate_angle(g, params, features)
            if override is not None and pos == override[0]:
                angle = angle + override[1]
            state = _apply_rot(state, n, g.qubit, g.axis, angle)
        if cache is not None:
            cache.append(state)
        return state

    def expectations(self, params, features, epi) -> np.ndarray:
        """(B, 5) Z expectations of the main qubits."""
        params = np.asarray(params, float)
        features = np.atleast_2d(np.asarray(features, float))
        epi = np.atleast_2d(np.asarray(epi, float))
        cfg = self.config
        film = self._run_section(self.film_gates, cfg.film_qubits, params, epi)
        main = self._run_section(self.main_gates, cfg.main_qubits, params, features)
        joint = np.einsum("bi,bj->bij", film, main).reshape(film.shape[0], -1)
        state = self._run_section(self.tail_gates, cfg.n_qubits, params, None,
                                  state=joint)
        return probabilities(state) @ self._zsigns.T

    # -- upstream-contracted gradient ----------------------------------------

    def grad(self, params, features, epi, upstream, chunk: int = 512) -> np.ndarray:
        """Sum over the batch of upstream[b, k] * d<Z_k>_b / d theta.

        ``upstream`` is (B, 5); returns (n_params,). Exact parameter-shift,
        evaluated section by section against pulled-back observables.
        """
        params = np.asarray(params, float)
        features = np.atleast_2d(np.asarray(features, float))
        epi = np.atleast_2d(np.asarray(epi, float))
        upstream = np.asarray(upstream, float)
        total = np.zeros(self.n_params)
        for lo in range(0, features.shape[0], chunk):
            sl = slice(lo, lo + chunk)
            total += self._grad_chunk(params, features[sl], epi[sl], upstream[sl])
        return total

    def _grad_chunk(self, params, features, epi, upstream) -> np.ndarray:
        cfg = self.config
        n = cfg.n_qubits
        dim_f = 1 << cfg.film_qubits
        dim_m = 1 << cfg.main_qubits
        batch = features.shape[0]
        grad = np.zeros(self.n_params)

        film_cache: list = []
        main_cache: list = []
        tail_cache: list = []
        film = self._run_section(self.film_gates, cfg.film_qubits, params, epi,
                                 cache=film_cache)
        main = self._run_section(self.main_gates, cfg.main_qubits, params,
                                 features, cache=main_cache)
        joint = np.einsum("bi,bj->bij", film, main).reshape(batch, -1)
        final = self._run_section(self.tail_gates, n, params, None,
                                  state=joint, cache=tail_cache)

        # The shift-rule difference for a rotation gate collapses to
        # Im <lam_g | P u_g>, with u_g the post-gate state, P the gate's Pauli
        # generator and lam_g the batch observable (sum_k up[b,k] Z_k) applied
        # to the final state and pulled back through every later gate. The
        # pullback runs once over the whole circuit in reverse.
        lam = (upstream @ self._zsigns) * final

        for pos in reversed(range(len(self.tail_gates))):
            g = self.tail_gates[pos]
            if isinstance(g, CNot):
                lam = _apply_cx(lam, n, g.control, g.target)
                continue
            if g.src == "param":
                pu = _apply_pauli(tail_cache[pos + 1], n, g.qubit, g.axis)
                term = np.einsum("bi,bi->b", lam.conj(), pu)
                grad[g.index] += g.scale * float(term.imag.sum())
            lam = _apply_rot(lam, n, g.qubit, g.axis,
                             -_gate_angle(g, params, None))

        # Main-section gates sit before the tail; in the joint space the film
        # factor is already final there, so <lam | P u> factorizes.
        off = cfg.film_qubits
        for pos in reversed(range(len(self.main_gates))):
            g = self.main_gates[pos]
            if isinstance(g, CNot):
                lam = _apply_cx(lam, n, g.control + off, g.target + off)
                continue
            if g.src == "param":
                pu = _apply_pauli(main_cache[pos + 1], cfg.main_qubits,
                                  g.qubit, g.axis)
                lam3 = lam.reshape(batch, dim_f, dim_m)
                term = np.einsum("bia,bi,ba->b", lam3.conj(), film, pu)
                grad[g.index] += g.scale * float(term.imag.sum())
            lam = _apply_rot(lam, n, g.qubit + off, g.axis,
                             -_gate_angle(g, params, features))

        # Film gates run first of all, with the main register still at |0...0>.
        for pos in reversed(range(len(self.film_gates))):
            g = self.film_gates[pos]
            if isinstance(g, CNot):
                lam = _apply_cx(lam, n, g.control, g.target)
                continue
            if g.src == "param":
                pu = _apply_pauli(film_cache[pos + 1], cfg.film_qubits,
                                  g.qubit, g.axis)
                lam_f = lam.reshape(batch, dim_f, dim_m)[:, :, 0]
                term = np.einsum("bi,bi->b", lam_f.conj(), pu)
                grad[g.index] += g.scale * float(term.imag.sum())
            lam = _apply_rot(lam, n, g.qubit, g.axis,
                             -_gate_angle(g, params, epi))
        return grad
