import json

import numpy as np
import quakeroute.dyngraph as dg
import quakeroute.features as ft
import quakeroute.qsim as qs
from quakeroute.cli import run


def test_no_arguments_is_usage_error(capsys):
    assert run([]) == 2
    assert "usage" in capsys.readouterr().err.lower()


def test_unknown_flag_is_usage_error():
    assert run(["graph", "synth", "--bogus", "1"]) == 2


def test_graph_synth_roundtrip(tmp_path):
    out = tmp_path / "g.json"
    assert run(["graph", "synth", "--rows", "4", "--cols", "4", "--seed", "7",
                "--out", str(out)]) == 0
    g = dg.load_graph(out)
    assert g.n_nodes == 16
    assert max(g.degree(i) for i in range(g.n_nodes)) <= 5
    doc = json.loads(out.read_text())
    assert set(doc) == {"nodes", "edges"}
    assert set(doc["nodes"][0]) == {"id", "x", "y"}
    assert set(doc["edges"][0]) == {"u", "v", "length_m", "speed_kmh"}


def test_graph_synth_requires_seed(tmp_path):
    code = run(["graph", "synth", "--rows", "4", "--cols", "4",
                "--out", str(tmp_path / "g.json")])
    assert code == 1


def test_qrl_seed_env_override(tmp_path, monkeypatch):
    a = tmp_path / "a.json"
    b = tmp_path / "b.json"
    monkeypatch.setenv("QRL_SEED", "7")
    assert run(["graph", "synth", "--rows", "4", "--cols", "4",
                "--seed", "999", "--out", str(a)]) == 0
    monkeypatch.delenv("QRL_SEED")
    assert run(["graph", "synth", "--rows", "4", "--cols", "4",
                "--seed", "7", "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_config_file_fills_options(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"seed": 7}))
    out = tmp_path / "g.json"
    assert run(["graph", "synth", "--rows", "3", "--cols", "3",
                "--config", str(cfg), "--out", str(out)]) == 0
    assert out.exists()


def test_env_simulate(tmp_path):
    gpath = tmp_path / "g.json"
    run(["graph", "synth", "--rows", "4", "--cols", "4", "--seed", "3",
         "--out", str(gpath)])
    g = dg.load_graph(gpath)
    sc = dg.random_scenario(g, np.random.default_rng(0))
    spath = tmp_path / "s.json"
    dg.save_scenario(sc, spath)
    wpath = tmp_path / "weights.csv"
    assert run(["env", "simulate", "--graph", str(gpath), "--scenario",
                str(spath), "--steps", "5", "--out", str(wpath)]) == 0
    lines = wpath.read_text().strip().splitlines()
    assert lines[0] == "t,u,v,weight"
    assert len(lines) == 1 + 6 * g.n_edges  # snapshot at t=0 plus 5 steps


def test_dataset_generate_deterministic(tmp_path):
    gpath = tmp_path / "g.json"
    run(["graph", "synth", "--rows", "4", "--cols", "4", "--seed", "3",
         "--out", str(gpath)])
    a = tmp_path / "a.jsonl"
    b = tmp_path / "b.jsonl"
    for out in (a, b):
        assert run(["dataset", "generate", "--graph", str(gpath), "--n", "5",
                    "--seed", "11", "--out", str(out), "--jobs", "1"]) == 0
    assert a.read_bytes() == b.read_bytes()
    ds = ft.Dataset.load_jsonl(a)
    assert len(ds) > 0


def test_train_eval_export_pipeline(tmp_path):
    gpath = tmp_path / "g.json"
    run(["graph", "synth", "--rows", "4", "--cols", "4", "--seed", "3",
         "--out", str(gpath)])
    data = tmp_path / "data.jsonl"
    run(["dataset", "generate", "--graph", str(gpath), "--n", "6",
         "--seed", "2", "--out", str(data), "--jobs", "1"])
    ckpt = tmp_path / "ckpt.json"
    hist = tmp_path / "history.json"
    assert run(["train", "--data", str(data), "--out", str(ckpt),
                "--epochs", "2", "--batch-size", "64", "--seed", "0",
                "--history-out", str(hist)]) == 0
    assert ckpt.exists()
    assert len(json.loads(hist.read_text())) == 2

    report = tmp_path / "report.json"
    pcsv = tmp_path / "paths.csv"
    assert run(["eval", "--ckpt", str(ckpt), "--graph", str(gpath),
                "--scenarios", "4", "--seed", "5", "--out", str(report),
                "--csv", str(pcsv), "--jobs", "1"]) == 0
    doc = json.loads(report.read_text())
    assert {"arrival_rate", "mean_accuracy", "better_or_equal_rate",
            "n_scenarios", "quantum_share", "records"} <= set(doc)
    assert len(doc["records"]) == 4
    assert pcsv.read_text().startswith("scenario_id,")

    sample = tmp_path / "sample.json"
    with open(data) as fh:
        sample.write_text(fh.readline())
    qasm = tmp_path / "circuit.qasm"
    assert run(["export-qasm", "--params", str(ckpt), "--input", str(sample),
                "--out", str(qasm)]) == 0
    lines = qasm.read_text().splitlines()
    census = qs.build_model_circuit().census()
    for kind, count in census.items():
        assert sum(1 for l in lines if l.startswith(f"{kind}(")
                   or l.startswith(f"{kind} ")) == count


def test_eval_missing_checkpoint(tmp_path, capsys):
    gpath = tmp_path / "g.json"
    run(["graph", "synth", "--rows", "3", "--cols", "3", "--seed", "1",
         "--out", str(gpath)])
    code = run(["eval", "--ckpt", str(tmp_path / "nope.json"), "--graph",
                str(gpath), "--scenarios", "2", "--seed", "0",
                "--out", str(tmp_path / "r.json")])
    assert code == 1
    assert "missing file" in capsys.readouterr().err


def test_analyze_fourier_and_fisher(tmp_path):
    violin = tmp_path / "violin.csv"
    assert run(["analyze", "fourier", "--N", "1", "--K", "2", "--samples",
                "20", "--seed", "3", "--out", str(violin)]) == 0
    lines = violin.read_text().strip().splitlines()
    assert lines[0] == "sample,omega_x,omega_y,real,imag"
    assert len(lines) == 1 + 20 * 25

    fisher = tmp_path / "fisher.csv"
    assert run(["analyze", "fisher", "--N", "1", "--K", "1", "--nx", "5",
                "--ntheta", "3", "--seed", "3", "--out", str(fisher)]) == 0
    assert fisher.read_text().startswith("index,eigenvalue")
    full = tmp_path / "fisher_full.csv"
    assert run(["analyze", "fisher", "--N", "1", "--K", "1", "--nx", "4",
                "--ntheta", "2", "--seed", "3", "--full",
                "--out", str(full)]) == 0
