#!/usr/bin/env python3
"""Train the hybrid next-node classifier and race it against the oracle.

A short run on a small city to keep the demo quick (the acceptance suite runs
the full desk-scale protocol). Trains the hybrid model and the classical-only
ablation, evaluates both over fresh scenarios, and prints the head balance.
"""
import pathlib
import time

import quakeroute as qr
from quakeroute.hybrid import TrainConfig, evaluate, train

out = pathlib.Path(__file__).resolve().parent / "out"
out.mkdir(exist_ok=True)

graph = qr.synth_city(6, 6, seed=7)
dataset = qr.generate_dataset(graph, 80, seed=11)
print(f"corpus: {len(dataset)} oracle decisions from 80 scenarios")

t0 = time.time()
hybrid_model, history = train(dataset, TrainConfig(epochs=30, batch_size=256,
                                                   seed=0))
print(f"hybrid: {time.time() - t0:.0f}s, "
      f"val agreement {history[-1]['val_agreement']:.3f}")
hybrid_model.save(out / "hybrid.ckpt.json")

classical_model, c_history = train(dataset, TrainConfig(
    epochs=30, batch_size=256, seed=0, classical_only=True))
print(f"classical-only: val agreement {c_history[-1]['val_agreement']:.3f}")

for name, model in (("hybrid", hybrid_model), ("classical", classical_model)):
    report = evaluate(model, graph, 25, seed=99)
    print(f"{name:>9}: arrival {report.arrival_rate:.2f}, "
          f"accuracy {report.mean_accuracy:.3f}, "
          f"better-or-equal {report.better_or_equal_rate:.2f}, "
          f"quantum share {report.quantum_share:.3f}")
    report.save_json(out / f"{name}_report.json")

print(f"checkpoints and reports in {out}")
