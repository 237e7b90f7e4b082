import hashlib
import json
import subprocess
import sys
from pathlib import Path

import pytest
import yaml

from loopsoup.cli import ConfigError, FIXTURES, csv_text, main, resolve_config

SMALL_MCMC = {"seed": 4, "chains": 1, "steps": 300, "thermalization": 200, "thinning": 2}


def run_cli(tmp_path, mode, config=None, *args):
    tmp_path.mkdir(parents=True, exist_ok=True)
    out = tmp_path / "out"
    argv = [mode]
    if config is not None:
        p = tmp_path / "run.yaml"
        p.write_text(yaml.safe_dump(config))
        argv.append(str(p))
    argv += ["--output", str(out), *args]
    return main(argv), out


def read_manifest(out):
    return json.loads((out / "manifest.json").read_text())


def test_list_fixtures(capsys):
    assert main(["--list-fixtures"]) == 0
    assert set(json.loads(capsys.readouterr().out)) == set(FIXTURES)


def test_no_subcommand_is_config_error(capsys):
    assert main([]) == 2
    assert json.loads(capsys.readouterr().err)["error"] == "config"


@pytest.mark.parametrize("bad", [
    {"model": {"graph": "torus", "L": 3, "d": 1, "N": 2, "lambda": 0.5}},
    {"model": {"N": 0}},
    {"model": {"lambda": -1}},
    {"model": {"lambda": "x/y"}},
    {"potential": {"family": "power", "alpha": 1.0, "beta": 0.1, "s": 1.0}},
    {"mcmc": {"steps": 0}},
    {"checks": ["nonsense"]},
    {"colour": 3},
])
def test_invalid_configs_exit_2(tmp_path, capsys, bad):
    code, _ = run_cli(tmp_path, "verify", bad)
    assert code == 2
    err = json.loads(capsys.readouterr().err)
    assert err["error"] == "config" and err["message"]


def test_mode_mismatch_rejected():
    with pytest.raises(ConfigError):
        resolve_config({"mode": "sample"}, "verify")


def test_unreadable_config_exit_2(tmp_path):
    assert main(["verify", str(tmp_path / "missing.yaml")]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["verify", str(bad)]) == 2


def test_verify_two_vertex_passes_and_manifest_hashes(tmp_path):
    code, out = run_cli(tmp_path, "verify", None, "--fixture", "two-vertex")
    assert code == 0
    man = read_manifest(out)
    assert man["pass"] and man["mode"] == "verify" and man["schemaVersion"] == 1
    for art in man["artifacts"]:
        data = (out / art["path"]).read_bytes()
        assert hashlib.sha256(data).hexdigest() == art["sha256"]
    reports = json.loads((out / "verify.json").read_text())["reports"]
    assert {r["check"] for r in reports} >= {"weight_identity", "partition_bound", "observable:N_xy"}


def test_csv_uses_crlf(tmp_path):
    code, out = run_cli(tmp_path, "verify", None, "--fixture", "two-vertex")
    raw = (out / "verify.csv").read_bytes()
    assert raw.count(b"\r\n") == raw.count(b"\n") > 1
    assert csv_text(["a"], [[0.5]]) == "a\r\n0.5\r\n"


def test_failed_check_exits_1(tmp_path):
    # an attractive potential makes the partition bound uncertifiable
    cfg = {"fixture": "two-vertex", "checks": ["partition-bound"],
           "potential": {"family": "table", "entries": [[[0], 0.0], [[1], -1.0], [[-1], -1.0]]}}
    code, out = run_cli(tmp_path, "verify", cfg)
    assert code == 1
    assert read_manifest(out)["pass"] is False


def test_sample_is_deterministic(tmp_path):
    cfg = {"fixture": "four-cycle", "mcmc": SMALL_MCMC}
    code_a, out_a = run_cli(tmp_path / "a", "sample", cfg)
    code_b, out_b = run_cli(tmp_path / "b", "sample", cfg)
    assert code_a == code_b == 0
    for name in ("samples.csv", "sample.json"):
        assert (out_a / name).read_bytes() == (out_b / name).read_bytes()
    code_c, out_c = run_cli(tmp_path / "c", "sample", cfg, "--seed", "5")
    assert (out_a / "samples.csv").read_bytes() != (out_c / "samples.csv").read_bytes()


def test_sample_multiple_chains(tmp_path, monkeypatch):
    monkeypatch.setenv("LOOPSOUP_THREADS", "2")
    cfg = {"fixture": "two-vertex", "mcmc": {**SMALL_MCMC, "chains": 2}}
    code, out = run_cli(tmp_path, "sample", cfg)
    assert code == 0
    rows = (out / "samples.csv").read_text().splitlines()
    assert len(rows) == 1 + 2 * SMALL_MCMC["steps"]


def test_output_dir_from_environment(tmp_path, monkeypatch):
    target = tmp_path / "env-out"
    monkeypatch.setenv("LOOPSOUP_OUTPUT_DIR", str(target))
    assert main(["enumerate", "--fixture", "two-vertex"]) == 0
    assert (target / "manifest.json").exists()


@pytest.mark.parametrize("mode", ["enumerate", "twopoint", "fourier", "potential-check"])
def test_exact_modes_on_four_cycle(tmp_path, mode):
    code, out = run_cli(tmp_path, mode, None, "--fixture", "four-cycle")
    assert code == 0
    assert read_manifest(out)["pass"]


def test_bose_check(tmp_path):
    code, out = run_cli(tmp_path, "bose-check", {"fixture": "two-vertex", "options": {"mu": 0.2, "n_max": 3}})
    assert code == 0
    rep = json.loads((out / "bose_check.json").read_text())
    assert rep["relErr"] < 1e-10


def test_spin_check_records_convention(tmp_path):
    code, out = run_cli(tmp_path, "spin-check", {"fixture": "two-vertex", "options": {"beta": 0.3}})
    assert code == 0
    rep = json.loads((out / "spin_check.json").read_text())
    assert "definition" in rep["matchingConventions"]


def test_spin_check_needs_two_vertices(tmp_path):
    code, _ = run_cli(tmp_path, "spin-check", None, "--fixture", "four-cycle")
    assert code == 2


def test_verify_extended_four_cycle(tmp_path):
    code, out = run_cli(tmp_path, "verify", None, "--fixture", "ext-four-cycle")
    assert code == 0
    checks = {r["check"] for r in json.loads((out / "verify.json").read_text())["reports"]}
    assert checks == {"reflection_positivity", "chessboard"}


def test_console_script_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "loopsoup.cli", "--version"], capture_output=True, text=True)
    assert r.returncode == 0 and r.stdout.strip()
