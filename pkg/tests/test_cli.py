import json

import pytest

from radialflow.cli import main


def run(*args):
    return main([str(a) for a in args])


def test_full_pipeline(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("RADIALFLOW_OUT_DIR", str(tmp_path / "default"))
    net = tmp_path / "net.json"
    assert run("gen-network", "--nodes", 10, "--fictitious", 8, "--family", "gas", "--seed", 2,
               "--out", net) == 0
    assert run("simulate", "--network", net, "--samples", 3000, "--seed", 1) == 0
    meas = tmp_path / "default" / "measurements.csv"
    assert meas.exists() and (tmp_path / "default" / "measurements.meta.json").exists()
    tree = tmp_path / "tree.json"
    assert run("learn", "--measurements", meas, "--candidates", net, "--out", tree) == 0
    doc = json.loads(tree.read_text())
    assert len(doc["edges"]) == 9 and {"u", "v", "weight", "margin"} <= set(doc["edges"][0])
    assert "total_weight" in doc
    capsys.readouterr()
    assert run("eval", "--learned", tree, "--truth", net) == 0
    assert json.loads(capsys.readouterr().out)["fractional_error"] == 0.0
    inj = tmp_path / "inj.json"
    assert run("estimate", "--measurements", meas, "--tree", tree, "--network", net, "--out", inj) == 0
    est = json.loads(inj.read_text())
    assert len(est["nodes"]) == 10 and est["biased"] is False


def test_group_threshold(tmp_path):
    net = tmp_path / "net.json"
    run("gen-network", "--nodes", 8, "--fictitious", 4, "--seed", 1, "--out", net)
    run("simulate", "--network", net, "--samples", 2000, "--out", tmp_path)
    out = tmp_path / "g.json"
    assert run("learn", "--measurements", tmp_path / "measurements.csv", "--candidates", net,
               "--group-threshold", 0.05, "--out", out) == 0
    doc = json.loads(out.read_text())
    assert len(doc["edges"]) == 7 and doc["groups"]


def test_noisy_simulate_and_estimate_flag(tmp_path):
    net = tmp_path / "net.json"
    run("gen-network", "--nodes", 6, "--fictitious", 2, "--family", "quadratic", "--out", net)
    assert run("simulate", "--network", net, "--samples", 100, "--noise-frac", 0.05,
               "--out", tmp_path) == 0
    meta = json.loads((tmp_path / "measurements.meta.json").read_text())
    assert meta["noise_frac"] == 0.05
    run("learn", "--measurements", tmp_path / "measurements.csv", "--candidates", net,
        "--out", tmp_path / "t.json")


def test_exit_codes(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"nodes": 2, "reference": 0, "edges": [], "colour": "red"}))
    assert run("simulate", "--network", bad, "--samples", 10, "--out", tmp_path) == 2
    assert run("gen-network", "--nodes", 4, "--fictitious", 9, "--out", tmp_path / "x.json") == 2
    assert run("eval", "--learned", tmp_path / "nope.json", "--truth", bad) == 3
    net = tmp_path / "net.json"
    run("gen-network", "--nodes", 4, "--out", net)
    run("simulate", "--network", net, "--samples", 20, "--out", tmp_path)
    # linear two-commodity edges cannot be inverted
    run("learn", "--measurements", tmp_path / "measurements.csv", "--out", tmp_path / "t.json")
    assert run("estimate", "--measurements", tmp_path / "measurements.csv", "--tree",
               tmp_path / "t.json", "--network", net, "--out", tmp_path / "i.json") == 3


def test_sweep_cli(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"nodes": 8, "fictitious": 4, "sample_counts": [30], "trials": 2}))
    assert run("sweep", "--config", cfg, "--noise", "0,0.05", "--out", tmp_path / "a") == 0
    assert run("sweep", "--config", cfg, "--noise", "0,0.05", "--out", tmp_path / "b") == 0
    a = (tmp_path / "a" / "sweep.csv").read_bytes()
    assert a == (tmp_path / "b" / "sweep.csv").read_bytes()
    assert len(a.decode().splitlines()) == 3
    cfg.write_text(json.dumps({"nodez": 8}))
    assert run("sweep", "--config", cfg, "--out", tmp_path / "c") == 2


def test_verify_cli(tmp_path, capsys):
    assert run("verify", "--networks", 3, "--mc-samples", 20000, "--kruskal-instances", 5,
               "--out", tmp_path / "v.json") == 0
    report = json.loads((tmp_path / "v.json").read_text())
    assert report["verdict"] == "pass" and report["recovery"]["recovered"] == 3


def test_help_lists_subcommands(capsys):
    with pytest.raises(SystemExit):
        run("--help")
    out = capsys.readouterr().out
    for cmd in ("gen-network", "simulate", "learn", "estimate", "eval", "verify", "sweep"):
        assert cmd in out
