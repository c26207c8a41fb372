from __future__ import annotations

import json
from pathlib import Path

import pytest
import yaml

from weylkit.cli import EXIT_CONFIG, EXIT_NUMERIC, EXIT_OK, main

CONFIGS = Path(__file__).resolve().parents[1] / "configs"

THIRD_ORDER = {"oddorder": {"m": 1, "p": [0.0, 0.0], "q": [1.0, 0.0]}}


def _write(tmp_path: Path, cfg: dict, name: str = "job.yaml") -> str:
    path = tmp_path / name
    path.write_text(yaml.safe_dump(cfg), encoding="utf-8")
    return str(path)


def _run(capsys, *argv) -> tuple[int, dict | None, str]:
    code = main([str(a) for a in argv])
    cap = capsys.readouterr()
    summary = json.loads(cap.out) if cap.out.strip() else None
    return code, summary, cap.err


def test_indices_summary(tmp_path, capsys):
    code, summary, _ = _run(capsys, "--config", CONFIGS / "third_order_indices.yaml", "--out", tmp_path)
    assert code == EXIT_OK
    assert summary == {"n_plus": 1, "n_minus": 2}
    assert json.loads((tmp_path / "summary.json").read_text()) == summary


def test_mfun_grid(tmp_path, capsys):
    code, summary, _ = _run(capsys, "--config", CONFIGS / "third_order_mfun.yaml", "--out", tmp_path)
    assert code == EXIT_OK
    assert summary["count"] == 8 and summary["shape"] == [2, 2]
    assert summary["nevanlinna_ok"]
    rows = (tmp_path / "mfun.csv").read_text().strip().splitlines()
    assert len(rows) == 9 and rows[0].startswith("lam_re,lam_im,m00_re")


def test_check_passes_on_shipped_problem(tmp_path, capsys):
    code, summary, _ = _run(capsys, "--config", CONFIGS / "unequal_check.yaml", "--out", tmp_path)
    assert code == EXIT_OK and summary["all_pass"]
    assert all(v["pass"] for v in summary["invariants"].values())


def test_table_sampler_resolvent(tmp_path, capsys):
    code, summary, _ = _run(capsys, "--config", CONFIGS / "potential_table_resolve.yaml", "--out", tmp_path)
    assert code == EXIT_OK
    assert summary["ode_residual"] <= 1e-8
    assert summary["boundary_residual"] <= 1e-10
    assert (tmp_path / "resolvent.csv").exists()


@pytest.mark.parametrize(
    "cfg",
    [
        {"task": "mfun", "problem": {"shipped": "nonexistent"}},
        {"task": "nonsense", "problem": {"shipped": "dirichlet"}},
        {"task": "mfun", "problem": {"shipped": "dirichlet"}, "grids": {"lambdas": [[1.0, 0.0]]}},
        {"task": "resolve", "problem": {"shipped": "dirichlet"}, "grids": {"lambda": [2.0, 0.0]}},
        {"task": "sigma", "problem": {"shipped": "dirichlet"}, "grids": {"s": {"start": 1.0, "stop": 0.0, "num": 5}}},
    ],
    ids=["unknown_problem", "unknown_task", "real_lambda_grid", "real_resolvent_lambda", "reversed_s_grid"],
)
def test_config_errors_exit_2(tmp_path, capsys, cfg):
    code, summary, err = _run(capsys, "--config", _write(tmp_path, cfg), "--out", tmp_path / "out")
    assert code == EXIT_CONFIG and summary is None
    assert json.loads(err)["error"] == "ConfigError"


def test_missing_config_file_exit_2(tmp_path, capsys):
    code, _, err = _run(capsys, "--config", tmp_path / "absent.yaml")
    assert code == EXIT_CONFIG and json.loads(err)["error"] == "ConfigError"


def test_numerical_failure_exit_3(tmp_path, capsys):
    cfg = {"task": "mfun", "problem": {"oddorder": {"m": 1, "p": [0.0, 0.0], "q": [0.0, 0.0]}}}
    code, summary, err = _run(capsys, "--config", _write(tmp_path, cfg), "--out", tmp_path / "out")
    assert code == EXIT_NUMERIC and summary is None
    assert json.loads(err)["error"] == "UnsupportedSubclass"


SMALL_SIGMA = {
    "task": "sigma",
    "problem": THIRD_ORDER,
    "grids": {"s": {"start": -6.0, "stop": 6.0, "num": 25}},
    "numeric": {"mode_tol": 1e-12},
}


def _artifacts(out: Path) -> dict[str, bytes]:
    return {p.name: p.read_bytes() for p in sorted(out.iterdir())}


def test_byte_reproducible(tmp_path, capsys):
    path = _write(tmp_path, SMALL_SIGMA)
    for tag in ("a", "b"):
        assert _run(capsys, "--config", path, "--out", tmp_path / tag)[0] == EXIT_OK
    assert _artifacts(tmp_path / "a") == _artifacts(tmp_path / "b")


def test_worker_count_does_not_change_output(tmp_path, capsys, monkeypatch):
    path = _write(tmp_path, SMALL_SIGMA)
    assert _run(capsys, "--config", path, "--out", tmp_path / "w1", "--workers", 1)[0] == EXIT_OK
    monkeypatch.setenv("WEYLKIT_WORKERS", "4")
    assert _run(capsys, "--config", path, "--out", tmp_path / "w4")[0] == EXIT_OK
    assert _artifacts(tmp_path / "w1") == _artifacts(tmp_path / "w4")


def test_bad_worker_env_exit_2(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("WEYLKIT_WORKERS", "many")
    code, _, _ = _run(capsys, "--config", CONFIGS / "third_order_indices.yaml", "--out", tmp_path)
    assert code == EXIT_CONFIG


def test_task_override(tmp_path, capsys):
    code, summary, _ = _run(
        capsys, "--config", CONFIGS / "third_order_mfun.yaml", "--task", "indices", "--out", tmp_path
    )
    assert code == EXIT_OK and summary == {"n_plus": 1, "n_minus": 2}
