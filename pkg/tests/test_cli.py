import json
import os
import subprocess
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]
SCRIPT = ROOT / "scripts" / "run_authsim.py"
SMOKE = ROOT / "scenarios" / "smoke.json"


def _run(*args: str) -> subprocess.CompletedProcess:
    env = {k: v for k, v in os.environ.items() if k != "AUTHSIM_SEED"}
    return subprocess.run(
        [sys.executable, str(SCRIPT), *args],
        capture_output=True,
        text=True,
        check=False,
        env=env,
    )


def _ok(result: subprocess.CompletedProcess) -> None:
    assert result.returncode == 0, f"stdout:\n{result.stdout}\nstderr:\n{result.stderr}"


def test_selftest_cli():
    result = _run("selftest")
    _ok(result)
    assert "FAIL" not in result.stdout
    assert "prbs15_period" in result.stdout


def test_validate_cli(tmp_path: Path):
    result = _run("validate", str(SMOKE))
    _ok(result)
    assert result.stdout.startswith("OK:")

    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"schema_version": 1, "channel": {"bogus": 1}}))
    result = _run("validate", str(bad))
    assert result.returncode == 2
    assert "channel.bogus" in result.stderr

    assert _run("validate", str(tmp_path / "missing.json")).returncode == 2

    broken = tmp_path / "broken.json"
    broken.write_text("{")
    assert _run("validate", str(broken)).returncode == 2


def test_run_cli_is_reproducible(tmp_path: Path):
    out1, out2 = tmp_path / "a", tmp_path / "b"
    _ok(_run("run", str(SMOKE), "--out", str(out1)))
    _ok(_run("run", str(SMOKE), "--out", str(out2)))

    names = sorted(p.name for p in out1.iterdir())
    assert names == ["costs.csv", "metrics.json", "outcomes.jsonl", "trust_trajectories.csv"]
    for name in names:
        assert (out1 / name).read_bytes() == (out2 / name).read_bytes(), name

    metrics = json.loads((out1 / "metrics.json").read_text())
    assert metrics["master_seed"] == 7
    assert metrics["scenario"] == "smoke"


def test_seed_flag_overrides_file(tmp_path: Path):
    _ok(_run("run", str(SMOKE), "--out", str(tmp_path), "--seed", "123"))
    metrics = json.loads((tmp_path / "metrics.json").read_text())
    assert metrics["master_seed"] == 123


def test_compare_baseline_cli(tmp_path: Path):
    result = _run("compare-baseline", str(SMOKE), "--out", str(tmp_path))
    _ok(result)
    lines = (tmp_path / "costs.csv").read_text().splitlines()
    assert lines[0] == "scheme,n_devices,total_cost,wall_time_s"
    assert [line.split(",")[0] for line in lines[1:]] == ["Proposed", "PufBaseline"]


def test_schema_cli():
    result = _run("schema")
    _ok(result)
    assert "properties" in json.loads(result.stdout)
