import json
import subprocess
import sys

import numpy as np
import pytest

from spatialrank.cli import main
from spatialrank.sr import sr_test


def _csv(path, m, header=True):
    lines = [",".join(f"c{j}" for j in range(m.shape[1]))] if header else []
    lines += [",".join(repr(float(v)) for v in row) for row in m]
    path.write_text("\n".join(lines) + "\n")
    return str(path)


@pytest.fixture
def samples(tmp_path):
    rng = np.random.default_rng(0)
    x1, x2 = rng.standard_normal((12, 15)), rng.standard_normal((10, 15))
    return x1, x2, _csv(tmp_path / "a.csv", x1), _csv(tmp_path / "b.csv", x2, header=False)


def _record(out):
    return json.loads(out.strip().splitlines()[-1])


def test_test_matches_library(samples, capsys):
    x1, x2, f1, f2 = samples
    code = main(["test", "--x1", f1, "--x2", f2])
    rec = _record(capsys.readouterr().out)
    lib = sr_test(x1, x2)
    assert rec["statistic"] == lib.statistic and rec["z_score"] == lib.z_score
    assert code == (3 if lib.reject else 0)


def test_same_file_twice_does_not_reject(samples, capsys):
    _, _, f1, _ = samples
    assert main(["test", "--x1", f1, "--x2", f1]) == 0
    rec = _record(capsys.readouterr().out)
    # with X1 == X2 the pairs (i, j) x (j, i) contribute sign products of -1
    assert rec["reject"] is False and rec["z_score"] <= 0


def test_rejection_exit_code(tmp_path, capsys):
    rng = np.random.default_rng(1)
    f1 = _csv(tmp_path / "a.csv", rng.standard_normal((10, 8)))
    f2 = _csv(tmp_path / "b.csv", rng.standard_normal((10, 8)) + 3)
    assert main(["test", "--x1", f1, "--x2", f2]) == 3
    assert main(["test", "--x1", f1, "--x2", f2, "--method", "tr"]) == 3


def test_parse_error_exit_code(tmp_path, samples, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("1,2\n3\n")
    assert main(["test", "--x1", str(bad), "--x2", samples[2]]) == 2
    assert ":2:" in capsys.readouterr().err


def test_usage_error_exit_code():
    with pytest.raises(SystemExit) as info:
        main(["test", "--x1", "a.csv"])
    assert info.value.code == 1


def test_tr_regime_error(tmp_path):
    rng = np.random.default_rng(2)
    f1 = _csv(tmp_path / "a.csv", rng.standard_normal((6, 20)))
    f2 = _csv(tmp_path / "b.csv", rng.standard_normal((6, 20)))
    assert main(["test", "--x1", f1, "--x2", f2, "--method", "tr"]) == 2


def test_simulate_writes_outputs(tmp_path, capsys):
    cfg = tmp_path / "plan.yaml"
    cfg.write_text("master_seed: 4\nreplications: 3\ngrid:\n  - scenarios: [I]\n    sizes: [[8, 6]]\n"
                   "    shifts: [null, {sparsity: 0.5, eta: 1.0}]\n    tests: [SR, TR]\n")
    out = tmp_path / "out"
    assert main(["simulate", "--config", str(cfg), "--out", str(out), "--quiet"]) == 0
    cells = (out / "cells.csv").read_text().splitlines()
    assert len(cells) == 5 and (out / "table.txt").exists() and (out / "timings.csv").exists()
    bad = tmp_path / "bad.yaml"
    bad.write_text("grid:\n  - scenarios: [I]\n    sizes: [[8]]\n")
    assert main(["simulate", "--config", str(bad), "--out", str(out)]) == 2
    assert "grid[0].sizes[0]" in capsys.readouterr().err


def test_theory_tau_scalar(capsys):
    assert main(["theory", "--check", "tau", "--p", "1", "--reps", "1000", "--inner-reps", "300"]) == 0
    out = capsys.readouterr().out
    value = float(out.split(":")[1].split("+/-")[0])
    assert abs(value - 1 / 3) < 0.03 and "reference 0.333333" in out


def test_theory_other_checks(capsys):
    assert main(["theory", "--check", "c0", "--p", "3", "--reps", "2000"]) == 0
    assert main(["theory", "--check", "moments", "--p", "3", "--reps", "5000"]) == 0
    assert main(["theory", "--check", "are", "--p", "50", "--reps", "10000", "--family", "student_t"]) == 0
    out = capsys.readouterr().out
    assert "c0:" in out and "E(u1'Mu2)^4" in out and "ARE(SR, PA)" in out


def test_power_at_zero_shift_is_alpha(capsys):
    assert main(["power", "--n1", "20", "--n2", "20", "--p", "50", "--eta", "0", "--reps", "2000"]) == 0
    vals = dict(line.split() for line in capsys.readouterr().out.splitlines())
    assert float(vals["beta_SR"]) == pytest.approx(0.05) and float(vals["beta_PA"]) == pytest.approx(0.05)


def test_console_entry_point(samples):
    _, _, f1, f2 = samples
    proc = subprocess.run([sys.executable, "-m", "spatialrank.cli", "test", "--x1", f1, "--x2", f2],
                          capture_output=True, text=True)
    assert proc.returncode in (0, 3) and "z_score" in proc.stdout
