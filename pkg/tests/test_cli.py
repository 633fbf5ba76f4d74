import json
import subprocess
import sys

import numpy as np
import pytest

from conftest import gaussian_dataset
from xferfolio.cli import main
from xferfolio.core import Frequency
from xferfolio.data_io import save_returns_csv


def _orthogonal_csv(path, means, scale=0.01, repeats=5):
    """Returns whose sample covariance is exactly proportional to I."""
    z = np.array([[1, 1], [1, -1], [-1, 1], [-1, -1]], dtype=float)
    rows = np.tile(z * scale + np.asarray(means), (repeats, 1))
    days = np.arange(np.datetime64("2020-01-01"), np.datetime64("2020-01-01") + len(rows))
    lines = ["timestamp,A,B"] + [f"{d}T00:00:00Z,{float(a)!r},{float(b)!r}" for d, (a, b) in zip(days, rows)]
    path.write_text("\n".join(lines) + "\n")
    return str(path)


def _csv(tmp_path, name, rng, mu, sigma, n=2000, prefix="A"):
    ds = gaussian_dataset(rng, mu, sigma, n, Frequency.DAY_1, name, prefix)
    p = tmp_path / f"{name}.csv"
    save_returns_csv(ds, p)
    return str(p)


def _run(capsys, argv):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


class TestOptimize:
    def test_closed_form(self, tmp_path, capsys):
        p = _orthogonal_csv(tmp_path / "r.csv", [0.002, 0.001])
        code, out, _ = _run(capsys, ["optimize", "--returns", p])
        assert code == 0
        res = json.loads(out)
        np.testing.assert_allclose(res["weights"], [2 / 3, 1 / 3], atol=1e-4)
        assert res["converged"] is True and res["asset_ids"] == ["A", "B"]

    def test_missing_file(self, tmp_path, capsys):
        code, out, err = _run(capsys, ["optimize", "--returns", str(tmp_path / "nope.csv")])
        assert code == 2 and out == "" and len(err.strip().splitlines()) == 1

    def test_unknown_frequency(self, tmp_path, capsys):
        p = _orthogonal_csv(tmp_path / "r.csv", [0.002, 0.001])
        with pytest.raises(SystemExit) as exc:
            main(["optimize", "--returns", p, "--frequency", "7-minute"])
        assert exc.value.code == 2
        assert "unknown frequency" in capsys.readouterr().err

    def test_nonconvergence_exit_code(self, tmp_path, capsys, rng):
        p = _csv(tmp_path, "r", rng, [0.1, 0.05, 0.08], np.diag([0.04, 0.02, 0.09]))
        code, out, _ = _run(capsys, ["optimize", "--returns", p, "--max-iterations", "1"])
        assert code == 3 and json.loads(out)["converged"] is False

    def test_prices_input(self, tmp_path, capsys):
        p = tmp_path / "p.csv"
        p.write_text("timestamp,A,B\n" + "".join(
            f"2020-01-{d:02d},{100 * 1.001**d + (d % 2)},{50 + (d % 3)}\n" for d in range(1, 20)))
        code, out, _ = _run(capsys, ["optimize", "--returns", str(p), "--prices"])
        assert code == 0 and abs(sum(json.loads(out)["weights"]) - 1) < 1e-9


class TestTransfer:
    def test_self_transfer(self, tmp_path, capsys, rng):
        p = _csv(tmp_path, "x", rng, [0.1, 0.05, 0.08], np.diag([0.04, 0.02, 0.09]))
        code, out, _ = _run(capsys, ["transfer", "--source", p, "--target-train", p, "--target-test", p])
        res = json.loads(out)
        assert code == 0
        assert abs(res["sharpe_transfer"] - res["sharpe_direct"]) <= 1e-6
        assert set(res["transfer_risk"]) >= {"r1", "r2", "r_trans", "degenerate_source"}
        assert res["lambda"] == 0.2

    def test_negative_lambda(self, tmp_path, capsys, rng):
        p = _csv(tmp_path, "x", rng, [0.1, 0.05], np.eye(2) * 0.04)
        with pytest.raises(SystemExit) as exc:
            main(["transfer", "--source", p, "--target-train", p, "--target-test", p, "--lambda", "-1"])
        assert exc.value.code == 2

    def test_huge_lambda(self, tmp_path, capsys, rng):
        s = _csv(tmp_path, "s", rng, [0.1, 0.05, 0.2], np.diag([0.04, 0.02, 0.09]))
        t = _csv(tmp_path, "t", rng, [0.02, 0.15, 0.05], np.diag([0.09, 0.04, 0.02]), prefix="T")
        code, out, _ = _run(capsys, ["transfer", "--source", s, "--target-train", t, "--target-test", t,
                                     "--lambda", "1e6"])
        res = json.loads(out)
        assert code == 0
        np.testing.assert_allclose(res["transferred_weights"], res["pretrained_weights"], atol=1e-3)


class TestRisk:
    def test_identical_files_sharpe_two(self, tmp_path, capsys):
        # mean 0.2/252 per day, per-day variance 0.01/252 gives annual Sharpe 2 when exact
        p = tmp_path / "one.csv"
        daily_mu, daily_sd = 0.2 / 252, 0.1 / np.sqrt(252)
        z = np.tile([1.0, -1.0], 10)
        vals = daily_mu + daily_sd * z * np.sqrt((z.size - 1) / z.size)
        days = np.arange(np.datetime64("2020-01-01"), np.datetime64("2020-01-01") + z.size)
        p.write_text("timestamp,A\n" + "".join(f"{d},{float(v)!r}\n" for d, v in zip(days, vals)))
        code, out, _ = _run(capsys, ["risk", "--source", str(p), "--target", str(p)])
        res = json.loads(out)
        assert code == 0
        assert res["r_trans"] == pytest.approx(0.5, abs=1e-9)

    def test_unit_mean_shift(self, tmp_path, capsys, rng):
        n = 100_000
        s = _csv(tmp_path, "s", rng, [1.0, 0.0], np.eye(2), n=n)
        t = _csv(tmp_path, "t", rng, [0.0, 0.0], np.eye(2), n=n)
        _, out, _ = _run(capsys, ["risk", "--source", s, "--target", t])
        # annual-mean standard error per asset is sqrt(252 / n)
        assert json.loads(out)["r2"] == pytest.approx(1.0, abs=3 * np.sqrt(2 * 252 / n))

    def test_negative_source_is_degenerate(self, tmp_path, capsys, rng):
        s = _csv(tmp_path, "s", rng, [-0.5, -0.4], np.eye(2) * 0.01)
        t = _csv(tmp_path, "t", rng, [0.1, 0.1], np.eye(2) * 0.04)
        code, out, _ = _run(capsys, ["risk", "--source", s, "--target", t])
        res = json.loads(out)
        assert code == 0 and res["degenerate_source"] is True and res["r1"] == 1e6


class TestExperiment:
    def test_reps_one(self, tmp_path, capsys):
        code, _, err = _run(capsys, ["experiment", "--synthetic", "--reps", "1", "--out", str(tmp_path / "o")])
        assert code == 2 and "need ≥ 2 repetitions" in err

    def test_synthetic_outputs(self, tmp_path, capsys):
        out_dir = tmp_path / "o"
        code, out, _ = _run(capsys, ["experiment", "--synthetic", "--similarity-sweep", "--reps", "6",
                                     "--assets", "3", "--horizon", "600", "--restarts", "2",
                                     "--out", str(out_dir), "--threads", "1"])
        assert code == 0
        assert "synthetic" in out
        names = {p.name for p in out_dir.iterdir()}
        assert names == {"records.csv", "records.jsonl", "grid_summary.json", "heatmap_risk.csv",
                         "heatmap_sharpe.csv", "run_manifest.json"}
        manifest = json.loads((out_dir / "run_manifest.json").read_text())
        assert manifest["config"]["n_repetitions"] == 6 and "wall_clock_seconds" in manifest

    def test_bad_manifest_leaves_no_outputs(self, tmp_path, capsys):
        m = tmp_path / "m.json"
        m.write_text('[{"label": "a", "frequency": "1-day", "path": "missing.csv", "role": "source_train"},'
                     ' {"label": "b", "frequency": "1-day", "path": "missing.csv", "role": "target_train"}]')
        out_dir = tmp_path / "o"
        code, _, _ = _run(capsys, ["experiment", "--manifest", str(m), "--reps", "2", "--out", str(out_dir)])
        assert code == 2
        assert not out_dir.exists() or not any(out_dir.iterdir())


def test_clean_command(tmp_path, capsys):
    src = tmp_path / "raw.csv"
    src.write_text("timestamp,A\n2020-01-02,0.01\n2020-01-03,\n")
    code, out, _ = _run(capsys, ["clean", "--input", str(src), "--output", str(tmp_path / "c.csv")])
    assert code == 0 and json.loads(out)["dropped"] == 1


def test_module_entry_point(tmp_path):
    p = _orthogonal_csv(tmp_path / "r.csv", [0.002, 0.001])
    proc = subprocess.run([sys.executable, "-m", "xferfolio", "optimize", "--returns", p],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["weights"][0] == pytest.approx(2 / 3, abs=1e-4)
