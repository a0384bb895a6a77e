import csv
import json
import math

import numpy as np
import pytest

from spikedrmt import io as sio
from spikedrmt.cli import main
from spikedrmt.config import config_hash, parse_config, validate
from spikedrmt.errors import ConfigError
from spikedrmt.experiments import TrialRecord, run_trials

MINIMAL = {
    "ensemble": {"kind": "wigner", "n": 1000, "sigma": 1, "entry_law": "gaussian_real"},
    "perturbation": {"thetas": [1.5], "model": "orthonormalised", "entry_law": "gaussian_real"},
    "master_seed": 42,
}


def write(tmp_path, cfg, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(cfg))
    return p


def with_(base, path, value):
    cfg = json.loads(json.dumps(base))
    node = cfg
    for k in path[:-1]:
        node = node[k]
    node[path[-1]] = value
    return cfg


def test_minimal_config_defaults(tmp_path):
    exp = parse_config(write(tmp_path, MINIMAL))
    assert exp.trials == 500 and exp.h3a_alpha == 0.2 and exp.alpha_prime == 0.3 and exp.track == 5
    assert exp.n_values == (1000,) and exp.master_seed == 42
    assert parse_config(write(tmp_path, MINIMAL), seed=7).master_seed == 7


def test_config_errors_carry_pointer():
    with pytest.raises(ConfigError) as e:
        validate(with_(MINIMAL, ["perturbation", "thetas"], [0]))
    assert e.value.pointer == "/perturbation/thetas/0" and "theta must be nonzero" in str(e.value)
    wish = with_(MINIMAL, ["ensemble"], {"kind": "wishart", "n": 100, "c_ratio": 1.5})
    with pytest.raises(ConfigError) as e:
        validate(wish)
    assert e.value.pointer == "/ensemble/c_ratio"
    with pytest.raises(ConfigError) as e:
        validate(with_(MINIMAL, ["ensemble", "colour"], "blue"))
    assert e.value.pointer == "/ensemble/colour" and "unknown key" in str(e.value)
    with pytest.raises(ConfigError):
        validate(with_(MINIMAL, ["alpha_prime"], 0.1))


def test_config_rejects_bad_json(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    with pytest.raises(ConfigError):
        parse_config(p)


def test_hash_stable_under_reordering_and_defaults():
    reordered = {"master_seed": 42,
                 "perturbation": dict(reversed(list(MINIMAL["perturbation"].items()))),
                 "ensemble": dict(reversed(list(MINIMAL["ensemble"].items())))}
    assert config_hash(MINIMAL) == config_hash(reordered)
    assert config_hash(MINIMAL) == config_hash(with_(MINIMAL, ["trials"], 500))


@pytest.mark.parametrize("path,value", [(["master_seed"], 43), (["trials"], 10),
                                        (["perturbation", "thetas"], [1.6]),
                                        (["ensemble", "n"], 999), (["alpha_prime"], 0.4)])
def test_hash_changes_with_fields(path, value):
    assert config_hash(MINIMAL) != config_hash(with_(MINIMAL, path, value))


def test_jsonl_lossless(tmp_path):
    cfg = parse_config(write(tmp_path, with_(with_(MINIMAL, ["trials"], 3), ["ensemble", "n"], 60)))
    recs = run_trials(cfg)
    recs[0].gamma = [0.1 + 0.2, math.pi, 1e-300, -0.0]
    sio.write_jsonl(recs, tmp_path / "t.jsonl")
    back = [TrialRecord.from_dict(d) for d in sio.read_jsonl(tmp_path / "t.jsonl")]
    assert [r.to_dict() for r in back] == [r.to_dict() for r in recs]


def test_csv_round_trip(tmp_path):
    vals = [0.1 + 0.2, 1 / 3, 2.0**-60]
    sio.write_csv(tmp_path / "x.csv", ["i", "v"], list(enumerate(vals)))
    rows = list(csv.reader(open(tmp_path / "x.csv")))
    assert rows[0] == ["i", "v"] and [float(r[1]) for r in rows[1:]] == vals


def test_predict_fig1(tmp_path, capsys):
    cfg = with_(MINIMAL, ["ensemble", "invariant"], True)
    assert main(["predict", "--config", str(write(tmp_path, cfg)), "--out", str(tmp_path / "p")]) == 0
    rep = json.loads((tmp_path / "p" / "prediction.json").read_text())
    s = rep["spikes"][0]
    assert s["classification"] == "deviates_right"
    assert s["rho"] == pytest.approx(2.1667, abs=1e-4) and s["c_alpha"] == pytest.approx(0.7454, abs=1e-4)
    out = capsys.readouterr().out
    assert "deviates_right" in out


def test_predict_subcritical_and_critical(tmp_path, capsys):
    assert main(["predict", "--config", str(write(tmp_path, with_(MINIMAL, ["perturbation", "thetas"], [0.5])))]) == 0
    out = capsys.readouterr()
    assert "sticks_right" in out.out
    assert main(["predict", "--config", str(write(tmp_path, with_(MINIMAL, ["perturbation", "thetas"], [1.0])))]) == 0
    out = capsys.readouterr()
    assert "critical" in out.out and "warning" in out.err


def test_exit_code_config_error(tmp_path):
    assert main(["predict", "--config", str(write(tmp_path, with_(MINIMAL, ["perturbation", "thetas"], [0])))]) == 2
    bad = with_(MINIMAL, ["sampler"], "spectral")  # non-invariant Wigner has no spectral model
    assert main(["simulate", "--config", str(write(tmp_path, bad)), "--out", str(tmp_path / "o")]) == 2
    assert main(["analyze"]) == 2


def small_cfg(tmp_path, trials=40, thetas=(1.5, 0.5)):
    cfg = {"ensemble": {"kind": "wigner", "n": 300, "invariant": True},
           "perturbation": {"thetas": list(thetas), "model": "orthonormalised"},
           "master_seed": 3, "trials": trials}
    return write(tmp_path, cfg, "small.json")


def test_simulate_analyze_deterministic(tmp_path):
    path = small_cfg(tmp_path)
    outs = []
    for k, threads in enumerate((1, 3)):
        out = tmp_path / f"run{k}"
        assert main(["simulate", "--config", str(path), "--out", str(out), "--threads", str(threads)]) == 0
        assert main(["analyze", "--out", str(out)]) == 0
        outs.append(out)
    for name in ("trials.jsonl", "prediction.json", "summary.csv", "plots/gamma_n300_group0.csv",
                 "plots/sticking_top.csv"):
        assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes(), name
    m = json.loads((outs[0] / "manifest.json").read_text())
    assert m["master_seed"] == 3 and len(m["config_hash"]) == 64
    rows = list(csv.DictReader(open(outs[0] / "summary.csv")))
    names = {r["name"] for r in rows}
    assert {"count", "errors", "group0_variance_ratio", "high2_fraction"} <= names


def test_seed_override_changes_records(tmp_path):
    path = small_cfg(tmp_path, trials=3)
    main(["simulate", "--config", str(path), "--out", str(tmp_path / "a")])
    main(["simulate", "--config", str(path), "--out", str(tmp_path / "b"), "--seed", "99"])
    assert (tmp_path / "a" / "trials.jsonl").read_bytes() != (tmp_path / "b" / "trials.jsonl").read_bytes()


def test_analyze_assert_flags_failures(tmp_path):
    path = small_cfg(tmp_path, trials=12)
    out = tmp_path / "r"
    main(["simulate", "--config", str(path), "--out", str(out)])
    # corrupt the prediction: a wildly wrong target variance must trip the assertion
    pred = json.loads((out / "prediction.json").read_text())
    pred["spikes"][1]["gauss_variance"] = 100.0
    (out / "prediction.json").write_text(json.dumps(pred))
    assert main(["analyze", "--out", str(out), "--assert"]) == 4


def test_secular_command(tmp_path, capsys):
    spec = tmp_path / "spec.txt"
    spec.write_text("-1\n1\n")
    v = 1 / math.sqrt(2)
    assert main(["secular", "--spectrum", str(spec), "--theta", "2", "--vector", f"{v},{v}",
                 "--out", str(tmp_path / "s.csv")]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0] == "index,value"
    vals = [float(l.split(",")[1]) for l in lines[1:]]
    assert vals == pytest.approx([1 - math.sqrt(2), 1 + math.sqrt(2)], abs=1e-12)
    assert f"{vals[0]:.6f}" == "-0.414214" and f"{vals[1]:.6f}" == "2.414214"
    rows = list(csv.reader(open(tmp_path / "s.csv")))
    assert rows[0] == ["index", "value"] and len(rows) == 3


def test_secular_spikes_file_rank_two(tmp_path, capsys):
    rng = np.random.default_rng(0)
    lam = np.sort(rng.standard_normal(20))
    vecs = rng.standard_normal((2, 20)) / math.sqrt(20)
    (tmp_path / "spec.json").write_text(json.dumps(lam.tolist()))
    (tmp_path / "sp.json").write_text(json.dumps({"thetas": [1.0, -2.0], "vectors": vecs.tolist()}))
    assert main(["secular", "--spectrum", str(tmp_path / "spec.json"), "--spikes", str(tmp_path / "sp.json")]) == 0
    vals = [float(l.split(",")[1]) for l in capsys.readouterr().out.strip().splitlines()[1:]]
    dense = np.linalg.eigvalsh(np.diag(lam) + vecs.T @ np.diag([1.0, -2.0]) @ vecs)
    assert np.allclose(vals, dense, atol=1e-10)


def test_secular_bad_input(tmp_path):
    spec = tmp_path / "spec.txt"
    spec.write_text("0\n1\n")
    assert main(["secular", "--spectrum", str(spec), "--theta", "0", "--vector", "1,0"]) == 2
    assert main(["secular", "--spectrum", str(spec), "--theta", "1", "--vector", "1,0,0"]) == 2


def test_check_command(tmp_path, capsys):
    from spikedrmt import laws
    from spikedrmt.ensembles import quantile_spectrum
    spec = tmp_path / "q.json"
    spec.write_text(json.dumps(quantile_spectrum(laws.semicircle(), 1000).tolist()))
    assert main(["check", "--spectrum", str(spec), "--limit", '{"name": "semicircle", "sigma": 1}',
                 "--p", "2"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert [h["side"] for h in out["h3a"]] == ["a", "b"]
    assert all(h["all_pass"] for h in out["h3a"])
    assert out["h2"]["rows"][0][3] <= 0.05
    assert main(["check", "--spectrum", str(spec)]) == 2
