"""Model diagnostics on a three-qubit miniature of the hybrid circuit.

The mini circuit keeps the two epicenter qubits (entangler layers with N
sublayers, K coordinate reuploads) and replaces the main section by a single
qubit with four Y-rotation parameters around two encoded features. Two
studies run on it: the Fourier spectrum of its output as a function of the
epicenter coordinates, and the Fisher information of its basis-state
distribution.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path as FilePath

import numpy as np

from . import qsim
from .qsim import Circuit, CNot, Rot


@dataclass(frozen=True)
class MiniConfig:
    """Mini-circuit shape: N entangler sublayers, K coordinate reuploads."""

    sublayers: int = 1
    reuploads: int = 2

    def __post_init__(self):
        if self.sublayers < 1 or self.reuploads < 1:
            raise ValueError("sublayers and reuploads must be positive")

    @property
    def n_film_params(self) -> int:
        return 2 * self.sublayers * (self.reuploads + 1)

    @property
    def n_main_params(self) -> int:
        return 4

    @property
    def n_params(self) -> int:
        return self.n_film_params + self.n_main_params


def build_mini_circuit(config: MiniConfig) -> Circuit:
    """Three-qubit diagnostic circuit; features are (x, y, main_0, main_1) raw."""
    gates: list = []
    qubits = (0, 1)
    block, p = qsim.entangler_gates(qubits, config.sublayers, 0)
    gates.extend(block)
    for _ in range(config.reuploads):
        gates.append(Rot("z", 0, "feature", 0))
        gates.append(Rot("z", 1, "feature", 1))
        block, p = qsim.entangler_gates(qubits, config.sublayers, p)
        gates.extend(block)
    gates.append(Rot("y", 2, "param", p)); p += 1
    gates.append(Rot("z", 2, "feature", 2))
    gates.append(Rot("y", 2, "param", p)); p += 1
    gates.append(Rot("z", 2, "feature", 3))
    gates.append(Rot("y", 2, "param", p)); p += 1
    gates.append(CNot(0, 2))
    gates.append(CNot(1, 2))
    gates.append(Rot("y", 2, "param", p)); p += 1
    assert p == config.n_params
    return Circuit(n_qubits=3, gates=tuple(gates), n_params=p, n_features=4,
                   measured=(0, 1, 2))


# ---------------------------------------------------------------------------
# Fourier expressivity


@dataclass
class FourierSamples:
    """Per-draw coefficient tables c[omega_x, omega_y] of the circuit output."""

    coeffs: np.ndarray        # (n_theta, 2d+1, 2d+1) complex
    omegas: np.ndarray        # (2d+1,) integer frequencies -d..d
    config: MiniConfig
    observable_qubit: int


def sample_fourier(config: MiniConfig, n_theta: int,
                   rng: np.random.Generator, grid_points: int | None = None,
                   observable_qubit: int = 0,
                   main_features: tuple[float, float] = (0.0, 0.0)) -> FourierSamples:
    """Fourier coefficients of f(x, y) = <Z> over random parameter draws.

    f is evaluated on an equidistant grid over [0, 2pi)^2 and transformed
    exactly; K reuploads bound the degree per axis at K, so the minimal
    alias-free grid has 2K+1 points per axis. A coarser grid is refused.
    """
    if n_theta < 1:
        raise ValueError("need at least one parameter draw")
    circuit = build_mini_circuit(config)
    d = config.reuploads
    m_min = 2 * d + 1
    m = m_min if grid_points is None else int(grid_points)
    if m < m_min:
        raise ValueError(f"grid of {m} points aliases a degree-{d} spectrum")
    xs = 2 * np.pi * np.arange(m) / m
    gx, gy = np.meshgrid(xs, xs, indexing="ij")
    grid = np.stack([
        gx.ravel(), gy.ravel(),
        np.full(m * m, main_features[0]), np.full(m * m, main_features[1]),
    ], axis=1)
    omegas = np.arange(-d, d + 1)
    # c_w = (1/m^2) sum_jk f[j,k] exp(+i(wx x_j + wy y_k))
    dft = np.exp(1j * np.outer(omegas, xs)) / m
    coeffs = np.empty((n_theta, len(omegas), len(omegas)), complex)
    for r in range(n_theta):
        theta = rng.uniform(0.0, 2 * np.pi, circuit.n_params)
        state = qsim.run(circuit, theta, grid)
        f = np.asarray(qsim.expectation_z(state, observable_qubit, 3)).reshape(m, m)
        coeffs[r] = dft @ f @ dft.T
    return FourierSamples(coeffs=coeffs, omegas=omegas, config=config,
                          observable_qubit=observable_qubit)


def write_violin_csv(samples: FourierSamples, path: str | FilePath) -> None:
    """Long-format CSV of every coefficient of every draw, for violin plots."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["sample", "omega_x", "omega_y", "real", "imag"])
        for r, table in enumerate(samples.coeffs):
            for a, wx in enumerate(samples.omegas):
                for b, wy in enumerate(samples.omegas):
                    c = table[a, b]
                    writer.writerow([r, int(wx), int(wy),
                                     repr(float(c.real)), repr(float(c.imag))])


# ---------------------------------------------------------------------------
# Fisher information


@dataclass
class FisherResult:
    """Averaged Fisher matrix plus the per-realization matrices behind it."""

    matrix: np.ndarray
    per_realization: list[np.ndarray]
    config: MiniConfig
    include_main: bool
    n_x: int
    n_theta: int
    clamped: int = 0  # probability floor hits during score computation

    @property
    def n_params(self) -> int:
        return self.matrix.shape[0]


def fisher_matrix(config: MiniConfig, n_x: int = 20, n_theta: int = 20,
                  rng: np.random.Generator | None = None,
                  include_main: bool = False) -> FisherResult:
    """Fisher information of the basis-state distribution P(y | x, theta).

    Gaussian feature draws enter as raw angles; the expectation over targets
    sums all eight basis states exactly; scores use parameter-shift
    probability gradients. Averaged over uniform parameter realizations.
    By default the matrix covers the epicenter-section parameters only
    (include_main adds the four main-qubit parameters).
    """
    if n_x < 1 or n_theta < 1:
        raise ValueError("sample counts must be at least 1")
    if rng is None:
        rng = np.random.default_rng(0)
    circuit = build_mini_circuit(config)
    idx = list(range(circuit.n_params if include_main else config.n_film_params))
    per_real: list[np.ndarray] = []
    clamped = 0
    for _ in range(n_theta):
        theta = rng.uniform(0.0, 2 * np.pi, circuit.n_params)
        x = rng.normal(0.0, 1.0, (n_x, 4))
        probs = qsim.probabilities(qsim.run(circuit, theta, x))
        dprobs = np.stack([qsim.prob_grad(circuit, theta, x, index=i) for i in idx])
        clamped += int((probs < 1e-12).sum())
        floor = np.maximum(probs, 1e-12)
        f = np.einsum("ixy,jxy->ij", dprobs / floor, dprobs) / n_x
        per_real.append((f + f.T) / 2)
    avg = np.mean(per_real, axis=0)
    avg = (avg + avg.T) / 2
    return FisherResult(matrix=avg, per_realization=per_real, config=config,
                        include_main=include_main, n_x=n_x, n_theta=n_theta,
                        clamped=clamped)


@dataclass
class SpectrumReport:
    eigenvalues: np.ndarray   # descending
    rank: int
    near_zero_fraction: float


def fisher_spectrum(matrix: np.ndarray, rank_tol: float = 1e-8,
                    near_zero_tol: float = 1e-3) -> SpectrumReport:
    """Eigenvalues, numerical rank and the share of near-zero eigenvalues."""
    matrix = np.asarray(matrix, float)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise ValueError("Fisher matrix must be square")
    if np.abs(matrix - matrix.T).max() > 1e-10:
        raise ValueError("Fisher matrix must be symmetric")
    ev = np.linalg.eigvalsh(matrix)[::-1]
    top = float(ev.max(initial=0.0))
    rank = int(np.sum(ev > rank_tol * top)) if top > 0 else 0
    near_zero = float(np.mean(np.abs(ev) < near_zero_tol * max(np.abs(ev).max(), 1e-300)))
    return SpectrumReport(eigenvalues=ev, rank=rank, near_zero_fraction=near_zero)


def pooled_near_zero_fraction(result: FisherResult,
                              near_zero_tol: float = 1e-3) -> float:
    """Near-zero share over the pooled per-realization eigenspectra."""
    ev = np.concatenate([np.linalg.eigvalsh(f) for f in result.per_realization])
    return float(np.mean(np.abs(ev) < near_zero_tol * np.abs(ev).max()))


def write_spectrum_csv(report: SpectrumReport, path: str | FilePath) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["index", "eigenvalue"])
        for i, ev in enumerate(report.eigenvalues):
            writer.writerow([i, repr(float(ev))])
        writer.writerow(["rank", report.rank])
        writer.writerow(["near_zero_fraction", repr(report.near_zero_fraction)])


def block_ratio(full_matrix: np.ndarray, n_film: int) -> float:
    """Coupling between the epicenter and main parameter blocks.

    Frobenius norm of the off-diagonal blocks over that of the diagonal
    blocks; 0 means fully decoupled sections.
    """
    f = np.asarray(full_matrix, float)
    off = f[:n_film, n_film:]
    on = np.sqrt(np.linalg.norm(f[:n_film, :n_film]) ** 2
                 + np.linalg.norm(f[n_film:, n_film:]) ** 2)
    return float(np.sqrt(2.0) * np.linalg.norm(off) / on) if on > 0 else 0.0
