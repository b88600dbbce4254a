import json
import math

import pytest

from benfrag import cli
from benfrag.cli import main, run
from benfrag.config import ConfigError, ExperimentConfig, validate
from benfrag.spectral import QuadratureError

LU = {"family": "loguniform", "a": -1.0, "b": 0.0, "base": 10.0}


def test_d_exceeds_m():
    v = validate(ExperimentConfig(m=2, d=3))
    assert any("d exceeds m" in s for s in v)


def test_leaf_cap_violation():
    v = validate(ExperimentConfig(command="branching", mode="branching", m=3, n=10, streaming=False))
    assert any("2^30 leaves exceed in-memory cap" in s for s in v)
    assert not any("in-memory cap" in s for s in validate(ExperimentConfig(command="branching", mode="branching", m=3, n=10, streaming=True)))


def test_heterogeneous_axes():
    cfg = ExperimentConfig(m=2, axis_distributions=[{"family": "uniform"}, LU])
    assert any("per-axis distributions differ" in s for s in validate(cfg))
    cfg.allow_heterogeneous = True
    assert validate(cfg) == []


def test_all_violations_reported():
    v = validate(ExperimentConfig(m=2, d=3, trials=0, delta=1.5, epsilon=0.2))
    joined = " | ".join(v)
    for needle in ("d exceeds m", "trials must be at least 1", "delta must lie in (0, 1)", "epsilon must lie in (0, 1/8)"):
        assert needle in joined


def test_json_round_trip():
    cfg = ExperimentConfig(command="wafer", m=3, d=1, n_values=[25, 100], distribution=LU, seed=2**63 + 5, delta=1e-3)
    assert ExperimentConfig.from_json(cfg.to_json()) == cfg
    assert json.loads(cfg.to_json()) == cfg.to_dict()


def test_unknown_keys_rejected():
    with pytest.raises(ConfigError, match="unknown config key 'bogus'"):
        ExperimentConfig.from_dict({"m": 2, "bogus": 1})
    with pytest.raises(ConfigError, match="invalid JSON"):
        ExperimentConfig.from_json("{nope")
    assert any("unknown keys" in s for s in validate(ExperimentConfig(distribution={"family": "uniform", "x": 1})))


def _conf(tmp_path, **kw):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(kw))
    return str(path)


def test_conformance_example(tmp_path, capsys):
    cfgp = _conf(tmp_path, command="conformance", mode="linear", m=2, d=2, n=50, trials=100_000, seed=42)
    out = tmp_path / "r.csv"
    assert main(["conformance", "--config", cfgp, "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "statistic,value,sample_size,base"
    ks = dict(l.split(",")[:2] for l in lines[1:])
    assert 0 < float(ks["ks_distance"]) <= 0.015
    man = json.loads((tmp_path / "r.csv.manifest.json").read_text())
    assert man["seed"] == 42 and man["config"]["trials"] == 100_000 and "r.csv" in man["digests"]


@pytest.mark.parametrize(
    "command,extra",
    [
        ("simulate", {"m": 3, "d": 2, "n": 40, "trials": 3000}),
        ("simulate", {"mode": "branching", "m": 1, "n": 6, "trials": 5}),
        ("conformance", {"m": 2, "n": 30, "trials": 5000}),
        ("wafer", {"m": 3, "d": 1, "n_values": [10, 40], "trials": 4000, "distribution": LU}),
        ("maxside", {"m": 3, "n": 40, "trials": 4000, "distribution": LU}),
        ("branching", {"mode": "branching", "m": 1, "n": 10, "trials": 20}),
        ("charfn", {"n": 30, "distribution": {"family": "loguniform", "a": -1.7320508075688772, "b": 1.7320508075688772, "statistical": True}}),
        ("mellin", {"n": 3, "ell_max": 20}),
    ],
)
def test_worker_invariance_and_repeatability(tmp_path, command, extra):
    cfgp = _conf(tmp_path, command=command, seed=11, **extra)
    blobs = []
    for w in (1, 4, 16, 4):
        out = tmp_path / f"{command}-{w}-{len(blobs)}.csv"
        assert main([command, "--config", cfgp, "--workers", str(w), "--out", str(out)]) == 0
        blobs.append(out.read_bytes())
    assert all(b == blobs[0] for b in blobs)


def test_flags_override_config(tmp_path):
    cfgp = _conf(tmp_path, m=2, n=10, trials=50, seed=1)
    out = tmp_path / "o.csv"
    assert main(["simulate", "--config", cfgp, "--trials", "7", "--seed", "3", "--out", str(out)]) == 0
    assert len(out.read_text().splitlines()) == 8
    man = json.loads((tmp_path / "o.csv.manifest.json").read_text())
    assert man["config"]["seed"] == 3


def test_trials_zero_exits_2(capsys):
    assert main(["mellin", "--trials", "0"]) == 2
    assert "trials must be at least 1" in capsys.readouterr().err


def test_bad_config_file_exits_2(tmp_path):
    p = tmp_path / "c.json"
    p.write_text('{"m": 2, "unknown": true}')
    assert main(["simulate", "--config", str(p)]) == 2


def test_io_failure_exits_4(tmp_path):
    assert main(["mellin", "--out", str(tmp_path / "missing" / "x.csv")]) == 4
    assert main(["mellin", "--config", str(tmp_path / "nope.json")]) == 4


def test_numeric_failure_exits_3(monkeypatch):
    def boom(*a, **k):
        raise QuadratureError("imaginary residue too large")

    monkeypatch.setitem(cli.PIPELINES, "charfn", boom)
    assert main(["charfn"]) == 3


def test_stdout_and_json(tmp_path, capsys):
    assert main(["mellin", "--format", "json"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["command"] == "mellin" and doc["columns"] == ["ell", "term_modulus", "partial_sum"]
    assert len(doc["rows"]) == 50


def test_csv_number_format():
    cfg = ExperimentConfig(command="mellin", n=1, ell_max=2)
    _, payload = run(cfg)
    row = payload.decode().splitlines()[1].split(",")
    assert row[0] == "1" and float(row[1]) == pytest.approx(0.344090049004831, abs=1e-15)
    assert len(row[1].replace("0.", "", 1).lstrip("0")) >= 15


def test_non_finite_values_serialize():
    cfg = ExperimentConfig(command="wafer", m=2, d=2, n=5, trials=10, output_format="json")
    _, payload = run(cfg)
    row = json.loads(payload)["rows"][0]
    assert row["mean_gap"] == "inf" and row["p_wafer"] == 1.0
    csv_row = run(ExperimentConfig(command="wafer", m=2, d=2, n=5, trials=10))[1].decode().splitlines()[1]
    assert ",inf," in csv_row


def test_benfrag_workers_env(tmp_path):
    args = cli._parser().parse_args(["mellin"])
    assert cli.load_config(args, {"BENFRAG_WORKERS": "4"}).workers == 4
    args = cli._parser().parse_args(["mellin", "--workers", "2"])
    assert cli.load_config(args, {"BENFRAG_WORKERS": "4"}).workers == 2
    with pytest.raises(ConfigError):
        cli.load_config(cli._parser().parse_args(["mellin"]), {"BENFRAG_WORKERS": "many"})


def test_manifest_digest_stable(tmp_path):
    cfgp = _conf(tmp_path, m=3, n=20, trials=200, seed=9)
    digests = []
    for i in range(2):
        out = tmp_path / f"s{i}.csv"
        main(["simulate", "--config", cfgp, "--out", str(out)])
        digests.append(json.loads((tmp_path / f"s{i}.csv.manifest.json").read_text())["digests"][f"s{i}.csv"])
    assert digests[0] == digests[1]
