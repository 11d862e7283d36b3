"""Parallel hybrid network: classical and quantum FiLM branches behind one head.

Both branches see the same sample (epicenter conditioning plus 34 main
features); their five-value outputs are concatenated and reduced to five
logits by a trainable dense head. Classical gradients come from backprop,
quantum gradients from the parameter-shift rule, and rollouts follow the
mask-respecting argmax of the logits.
"""
from __future__ import annotations

import csv
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, asdict
from pathlib import Path as FilePath

import numpy as np

from . import dyngraph, features as feat, neural, oracle, qsim
from .dyngraph import CityGraph, Scenario
from .neural import AdamState, adam_step, cross_entropy, lr_schedule
from .oracle import Path

log = logging.getLogger(__name__)

N_OUT = 5
MASKED_LOGIT = -1e30


@dataclass
class TrainConfig:
    epochs: int = 100
    batch_size: int = 2000
    classical_lr: float = 1e-3
    quantum_lr: float = 1e-3
    weight_decay: float = 1e-5
    start_factor: float = 1.0
    end_factor: float = 0.1
    dropout: float = 0.5
    val_fraction: float = 0.1
    seed: int = 0
    classical_only: bool = False


def quantum_share(head_w: np.ndarray) -> float:
    """Relative Frobenius weight of the quantum head block.

    0 means the head ignores the quantum branch entirely, 0.5 means both
    branches carry equal weight.
    """
    head_w = np.asarray(head_w, float)
    if head_w.shape != (N_OUT, 2 * N_OUT):
        raise ValueError(f"head must be (5, 10), got {head_w.shape}")
    w_c = np.linalg.norm(head_w[:, :N_OUT])
    w_q = np.linalg.norm(head_w[:, N_OUT:])
    if w_c == 0.0 and w_q == 0.0:
        return 0.5
    return float(w_q / (w_q + w_c))


class HybridModel:
    """Trainable parameters of both branches plus the combining head."""

    def __init__(self, seed: int = 0, classical_only: bool = False,
                 model_config: qsim.ModelConfig = qsim.ModelConfig(),
                 dropout: float = 0.5):
        rng = np.random.default_rng(seed)
        self.classical_only = classical_only
        self.model_config = model_config
        self.classical = neural.ClassicalFilmNet(seed=int(rng.integers(2**32)),
                                                 dropout=dropout)
        self.quantum_params = rng.uniform(-np.pi, np.pi, model_config.n_params)
        self.head_w = neural.kaiming_uniform(rng, (N_OUT, 2 * N_OUT), 2 * N_OUT)
        if classical_only:
            self.head_w[:, N_OUT:] = 0.0
        self.head_b = np.zeros(N_OUT)
        self._kernel = None
        self._branches = None

    @property
    def kernel(self) -> qsim.ModelKernel:
        if self._kernel is None:
            self._kernel = qsim.ModelKernel(self.model_config)
        return self._kernel

    @staticmethod
    def split_inputs(features: np.ndarray):
        """Dataset vectors are [x_epi, y_epi, <34 main values>]."""
        features = np.atleast_2d(np.asarray(features, float))
        if features.shape[1] != feat.N_FEATURES:
            raise ValueError(f"expected {feat.N_FEATURES}-value features")
        return features[:, 2:], features[:, :2]

    def forward(self, features: np.ndarray, train: bool = False,
                rng: np.random.Generator | None = None) -> np.ndarray:
        """Logits (B, 5) from the concatenated branch outputs."""
        main, epi = self.split_inputs(features)
        c_out = self.classical.forward(main, epi, train=train, rng=rng)
        if self.classical_only:
            q_out = np.zeros_like(c_out)
        else:
            q_out = self.kernel.expectations(self.quantum_params, main, epi)
        both = np.concatenate([c_out, q_out], axis=1)
        self._branches = both
        return both @ self.head_w.T + self.head_b

    def loss_grads(self, features, labels, mask, train: bool = True,
                   rng: np.random.Generator | None = None):
        """Cross-entropy loss plus gradients for every parameter group."""
        main, epi = self.split_inputs(features)
        logits = self.forward(features, train=train, rng=rng)
        loss, dlogits = cross_entropy(logits, labels, mask)
        both = self._branches
        head_grads = {"head_w": dlogits.T @ both, "head_b": dlogits.sum(axis=0)}
        dboth = dlogits @ self.head_w
        classical_grads = self.classical.backward(dboth[:, :N_OUT])
        if self.classical_only:
            head_grads["head_w"][:, N_OUT:] = 0.0
            quantum_grad = np.zeros_like(self.quantum_params)
        else:
            quantum_grad = self.kernel.grad(self.quantum_params, main, epi,
                                            dboth[:, N_OUT:])
        return loss, classical_grads, head_grads, quantum_grad

    # -- checkpoints ---------------------------------------------------------

    def save(self, path: str | FilePath) -> None:
        def pack(a):
            return {"shape": list(a.shape), "data": [float(x) for x in a.ravel()]}

        doc = {
            "format": "quakeroute-checkpoint",
            "classical_only": self.classical_only,
            "params": {
                **{f"classical.{k}": pack(v) for k, v in self.classical.params.items()},
                "quantum": pack(self.quantum_params),
                "head_w": pack(self.head_w),
                "head_b": pack(self.head_b),
            },
        }
        FilePath(path).write_text(json.dumps(doc) + "\n")

    @staticmethod
    def load(path: str | FilePath) -> "HybridModel":
        doc = json.loads(FilePath(path).read_text())
        if doc.get("format") != "quakeroute-checkpoint":
            raise ValueError(f"{path} is not a checkpoint file")

        def unpack(entry):
            return np.asarray(entry["data"], float).reshape(entry["shape"])

        model = HybridModel(seed=0, classical_only=bool(doc["classical_only"]))
        for key, entry in doc["params"].items():
            if key.startswith("classical."):
                model.classical.params[key.split(".", 1)[1]] = unpack(entry)
            elif key == "quantum":
                model.quantum_params = unpack(entry)
            elif key == "head_w":
                model.head_w = unpack(entry)
            elif key == "head_b":
                model.head_b = unpack(entry)
        return model


def hybrid_forward(model: HybridModel, features) -> np.ndarray:
    """Logits for one stored sample vector (or a batch of them)."""
    features = np.asarray(features, float)
    logits = model.forward(features)
    return logits[0] if features.ndim == 1 else logits


# ---------------------------------------------------------------------------
# Training


def train(dataset: feat.Dataset, config: TrainConfig = TrainConfig()):
    """Minibatch CE training of both branches; returns (model, history).

    Deterministic in the seed: the split, the shuffles, the dropout masks and
    the initialization all derive from it. The classical learning rate follows
    the linear epoch schedule; the quantum rate stays constant.
    """
    if len(dataset) == 0:
        raise ValueError("training needs a non-empty dataset")
    train_ds, val_ds = dataset.split(config.val_fraction, seed=config.seed)
    if len(train_ds) == 0:
        train_ds = dataset
    model = HybridModel(seed=config.seed, classical_only=config.classical_only,
                        dropout=config.dropout)
    x = train_ds.feature_matrix()
    y = train_ds.labels()
    m = train_ds.masks()
    xv = val_ds.feature_matrix() if len(val_ds) else None
    yv = val_ds.labels() if len(val_ds) else None
    mv = val_ds.masks() if len(val_ds) else None

    seq = np.random.SeedSequence(config.seed)
    shuffle_rng, dropout_rng = [np.random.default_rng(s) for s in seq.spawn(2)]
    opt_classical = AdamState()
    opt_quantum = AdamState()
    n = len(x)
    batch = min(config.batch_size, n)
    history: list[dict] = []
    for epoch in range(config.epochs):
        factor = lr_schedule(epoch, config.epochs, config.start_factor,
                             config.end_factor)
        perm = shuffle_rng.permutation(n)
        losses = []
        for lo in range(0, n, batch):
            idx = perm[lo:lo + batch]
            loss, cg, hg, qg = model.loss_grads(x[idx], y[idx], m[idx],
                                                train=True, rng=dropout_rng)
            losses.append(loss)
            group = dict(model.classical.params)
            group["head_w"] = model.head_w
            group["head_b"] = model.head_b
            adam_step(group, {**cg, **hg}, opt_classical,
                      lr=config.classical_lr * factor,
                      weight_decay=config.weight_decay)
            if not config.classical_only:
                adam_step({"quantum": model.quantum_params},
                          {"quantum": qg}, opt_quantum,
                          lr=config.quantum_lr,
                          weight_decay=config.weight_decay)
        row = {"epoch": epoch, "lr_factor": factor,
               "train_loss": float(np.mean(losses)),
               "train_agreement": agreement(model, x, y, m)}
        if xv is not None:
            vloss, _ = cross_entropy(model.forward(xv), yv, mv)
            row["val_loss"] = vloss
            row["val_agreement"] = agreement(model, xv, yv, mv)
        history.append(row)
        if epoch % 10 == 0 or epoch == config.epochs - 1:
            log.info("epoch %3d  train loss %.4f  val agreement %s", epoch,
                     row["train_loss"], row.get("val_agreement"))
    return model, history


def agreement(model: HybridModel, x, y, mask) -> float:
    """Fraction of samples whose masked argmax matches the oracle label."""
    logits = model.forward(x)
    logits = np.where(mask, logits, MASKED_LOGIT)
    return float((logits.argmax(axis=1) == y).mean())


# ---------------------------------------------------------------------------
# Rollouts and evaluation


def rollout(model: HybridModel, graph: CityGraph, scenario: Scenario,
            sigma_frac: float = 0.1, betweenness: np.ndarray | None = None) -> Path:
    """Drive the model through a scenario, one masked-argmax step at a time."""
    if betweenness is None:
        betweenness = feat.edge_betweenness(graph)
    state = dyngraph.initial_state(graph, scenario, sigma_frac)
    dyngraph.apply_initial_quake(state)
    u = scenario.start
    nodes = [u]
    costs: list[float] = []
    while u != scenario.chosen_exit:
        if state.t >= scenario.max_steps:
            return Path(nodes, costs, reached=False)
        dyngraph.advance(state)
        vec, mask, neighbors = feat.build_feature_vector(state, scenario, u,
                                                         betweenness)
        logits = np.where(mask, model.forward(vec[None])[0], MASKED_LOGIT)
        v = neighbors[int(np.argmax(logits))]
        costs.append(float(state.weights[graph.edge_index(u, v)]))
        nodes.append(v)
        u = v
    return Path(nodes, costs)


@dataclass
class PathRecord:
    scenario_id: int
    start: int
    exit: int
    model_reached: bool
    model_cost: float
    model_steps: int
    dij_reached: bool
    dij_cost: float
    dij_steps: int
    accuracy: float | None


@dataclass
class EvalReport:
    """Rollout quality summary: arrival, mean accuracy, better-or-equal share."""

    arrival_rate: float
    mean_accuracy: float
    better_or_equal_rate: float
    n_scenarios: int
    quantum_share: float
    records: list[PathRecord] = field(default_factory=list)

    def to_dict(self) -> dict:
        doc = asdict(self)
        doc["records"] = [asdict(r) for r in self.records]
        return doc

    def save_json(self, path: str | FilePath) -> None:
        FilePath(path).write_text(json.dumps(self.to_dict(), indent=1) + "\n")

    def save_csv(self, path: str | FilePath) -> None:
        fields = [f for f in PathRecord.__dataclass_fields__]
        with open(path, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=fields)
            writer.writeheader()
            for r in self.records:
                writer.writerow(asdict(r))


def _eval_one(model: HybridModel, graph: CityGraph, scenario: Scenario,
              scenario_id: int, sigma_frac: float, betweenness) -> PathRecord:
    model_path = rollout(model, graph, scenario, sigma_frac, betweenness)
    dij_path = oracle.nodewise_dijkstra(graph, scenario, sigma_frac)
    acc = None
    if model_path.reached and dij_path.reached:
        acc = oracle.path_accuracy(dij_path.total_cost, model_path.total_cost)
    return PathRecord(
        scenario_id=scenario_id, start=scenario.start, exit=scenario.chosen_exit,
        model_reached=model_path.reached, model_cost=model_path.total_cost,
        model_steps=len(model_path) - 1, dij_reached=dij_path.reached,
        dij_cost=dij_path.total_cost, dij_steps=len(dij_path) - 1, accuracy=acc,
    )


def _eval_worker(args) -> PathRecord:
    model, graph, seed, index, sigma_frac, betweenness, max_steps = args
    scenario = feat._scenario_for_index(graph, seed, index, None, max_steps)
    return _eval_one(model, graph, scenario, index, sigma_frac, betweenness)


def evaluate(model: HybridModel, graph: CityGraph, n_scenarios: int, seed: int,
             sigma_frac: float = 0.1, max_steps=None, jobs: int = 1) -> EvalReport:
    """Run model and oracle over fresh random scenarios and score the paths.

    Failed model rollouts count against the arrival rate but are excluded
    from mean accuracy and the better-or-equal share.
    """
    if n_scenarios < 1:
        raise ValueError("n_scenarios must be at least 1")
    betweenness = feat.edge_betweenness(graph)
    tasks = [(model, graph, seed, i, sigma_frac, betweenness, max_steps)
             for i in range(n_scenarios)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            records = list(pool.map(_eval_worker, tasks, chunksize=4))
    else:
        records = [_eval_worker(t) for t in tasks]
    arrival = oracle.arrival_rate([r.model_reached for r in records])
    scored = [r for r in records if r.accuracy is not None]
    mean_acc = float(np.mean([r.accuracy for r in scored])) if scored else 0.0
    boe = (oracle.better_or_equal_rate([(r.dij_cost, r.model_cost) for r in scored])
           if scored else 0.0)
    return EvalReport(arrival_rate=arrival, mean_accuracy=mean_acc,
                      better_or_equal_rate=boe, n_scenarios=n_scenarios,
                      quantum_share=quantum_share(model.head_w), records=records)
