"""Earthquake evacuation routing lab.

Simulates quake-perturbed city graphs, labels them with node-wise Dijkstra,
trains a hybrid classical/quantum FiLM next-node classifier on a built-in
statevector simulator, and runs circuit diagnostics (Fourier expressivity,
Fisher information, OpenQASM 3 export).
"""

from .dyngraph import (
    BudgetExhausted, CityGraph, DynamicState, GraphError, Scenario, StateError,
    advance, apply_initial_quake, base_travel_time, damage_radius, edge_center,
    exit_radius, initial_state, load_graph, load_scenario, pick_exits,
    random_scenario, save_graph, save_scenario, step_quake, step_traffic,
    synth_city,
)
from .oracle import (
    NoPathError, Path, arrival_rate, better_or_equal_rate, dijkstra,
    nodewise_dijkstra, path_accuracy,
)
from .features import (
    Dataset, Sample, build_feature_vector, direction_cosine, edge_betweenness,
    euclid, generate_dataset,
)
from .qsim import (
    BindingError, Circuit, CircuitError, CNot, ModelConfig, ModelKernel, Rot,
    StateVector, apply_gate, bel_layer, build_film_circuit, build_main_circuit,
    build_model_circuit, expectation_z, export_qasm3, film_section, full_forward,
    main_section, param_shift_grad, prob_grad, probabilities, run,
    sample_bitstrings,
)
from .neural import (
    AdamState, ClassicalFilmNet, adam_step, cross_entropy, kaiming_uniform,
    lr_schedule,
)
from .hybrid import (
    EvalReport, HybridModel, PathRecord, TrainConfig, evaluate, hybrid_forward,
    quantum_share, rollout, train,
)
from .analysis import (
    FisherResult, FourierSamples, MiniConfig, SpectrumReport, block_ratio,
    build_mini_circuit, fisher_matrix, fisher_spectrum, pooled_near_zero_fraction,
    sample_fourier, write_spectrum_csv, write_violin_csv,
)

__version__ = "0.1.0"
