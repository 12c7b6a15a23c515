import json
import subprocess
import sys
from pathlib import Path

import pytest

from fracembed.cli import (
    EXIT_CHECK_FAILED,
    EXIT_NUMERICAL,
    EXIT_OK,
    EXIT_USAGE,
    EXPERIMENTS,
    config_schema,
    load_config,
    main,
)

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def _write(tmp_path, doc, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return path


def _config(name):
    return json.loads((CONFIGS / f"{name}.json").read_text())


def test_registry_has_eleven_experiments():
    assert len(EXPERIMENTS) == 11
    named = sorted(json.loads(p.read_text())["experiment"] for p in CONFIGS.glob("*.json"))
    assert named == sorted(EXPERIMENTS)


def test_list_experiments(capsys):
    assert main(["list-experiments"]) == EXIT_OK
    assert len(capsys.readouterr().out.strip().splitlines()) == 11


def test_list_experiments_json(capsys):
    assert main(["list-experiments", "--json"]) == EXIT_OK
    reg = json.loads(capsys.readouterr().out)
    assert [e["name"] for e in reg] == list(EXPERIMENTS)
    assert all("defaults" in e and "tolerances" in e for e in reg)


def test_unknown_flag_is_usage_error(capsys):
    assert main(["run", "x.json", "--bogus"]) == EXIT_USAGE
    assert main([]) == EXIT_USAGE


@pytest.mark.parametrize("doc", [
    {"experiment": "no-such-thing"},
    {"experiment": "solve-fel", "grid": {"a": 0, "b": 1, "n": "many"}},
    {"experiment": "solve-fel", "unexpected": 1},
    {"experiment": "solve-fel", "tolerances": {"not_a_tolerance": 1e-3}},
])
def test_schema_violations_exit_2(tmp_path, doc, capsys):
    assert main(["run", str(_write(tmp_path, doc)), "--out", str(tmp_path / "o")]) == EXIT_USAGE
    assert "config error" in capsys.readouterr().err


def test_malformed_json(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{not json")
    assert main(["run", str(path)]) == EXIT_USAGE
    assert main(["run", str(tmp_path / "missing.json")]) == EXIT_USAGE


def test_bad_expression_is_config_error(tmp_path):
    doc = _config("solve-fel")
    doc["lagrangian"]["expr"] = "0.5*v^2 +"
    assert main(["run", str(_write(tmp_path, doc)), "--out", str(tmp_path / "o")]) == EXIT_USAGE


def test_defaults_merge(tmp_path):
    exp, cfg = load_config(_write(tmp_path, {"experiment": "solve-fel", "grid": {"n": 32}}))
    assert cfg["grid"] == {**exp.defaults["grid"], "n": 32}
    assert cfg["tolerances"] == exp.tolerances


def test_schema_is_closed():
    for name in EXPERIMENTS:
        assert config_schema(name)["additionalProperties"] is False


def test_failed_check_exit_1(tmp_path):
    doc = _config("solve-fel")
    doc["grid"]["n"] = 64
    doc["lagrangian"]["expr"] = "x*v"
    out = tmp_path / "o"
    assert main(["run", str(_write(tmp_path, doc)), "--out", str(out)]) == EXIT_CHECK_FAILED
    assert json.loads((out / "report.json").read_text())["status"] == "fail"


def test_numerical_failure_exit_3(tmp_path):
    doc = _config("solve-fel")
    doc["grid"]["n"] = 64
    doc["lagrangian"]["expr"] = "0.5*v^2 + log(x)"
    out = tmp_path / "o"
    code = main(["run", str(_write(tmp_path, doc)), "--out", str(out)])
    assert code == EXIT_NUMERICAL
    assert json.loads((out / "report.json").read_text())["status"] == "numerical-failure"


@pytest.mark.parametrize("name", ["product-rule", "coherence-oscillator", "hamiltonian"])
def test_quick_experiments_reproducible(tmp_path, name):
    outs = []
    for k in range(2):
        out = tmp_path / f"run{k}"
        assert main(["run", str(CONFIGS / f"{name}.json"), "--out", str(out)]) == EXIT_OK
        outs.append({p.name: p.read_bytes() for p in sorted(out.iterdir())})
    assert outs[0] == outs[1]
    assert "report.json" in outs[0]


def test_paper_literal_sign_runs(tmp_path):
    doc = _config("wave")
    doc.update(nt=256, nx=32, alphas=[1.0])
    out = tmp_path / "o"
    code = main(["run", str(_write(tmp_path, doc)), "--out", str(out), "--paper-literal-sign"])
    assert code == EXIT_OK
    rep = json.loads((out / "report.json").read_text())
    assert all(c["op"] == "info" for c in rep["report"]["checks"])


def test_console_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "fracembed.cli", "list-experiments"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0 and "whittaker" in proc.stdout
