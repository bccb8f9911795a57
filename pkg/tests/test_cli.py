import csv
import io
import subprocess
import sys
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from sparse_pursuit.cli import main
from sparse_pursuit.kernel import synthetic_kernel_data, write_dataset
from sparse_pursuit.svg import gray, heatmap


def run(capsys, *argv):
    code = main(list(argv))
    cap = capsys.readouterr()
    return code, cap.out, cap.err


def table(text):
    """Data rows of a CLI CSV, header comment lines skipped."""
    rows = list(csv.reader(io.StringIO("".join(l for l in text.splitlines(True) if not l.startswith("#")))))
    return rows[0], rows[1:]


def comments(text):
    return dict(l[2:].split("=", 1) for l in text.splitlines() if l.startswith("# "))


# ---------------------------------------------------------------- recover


def test_recover_generated_instance(capsys):
    code, out, _ = run(capsys, "recover", "--alg", "rmp0", "--gen", "gaussian", "--n", "64", "--m", "128",
                       "--k", "12", "--noise", "1e-2", "--seed", "7", "--deterministic")
    assert code == 0
    head, rows = table(out)
    assert head[:3] == ["algorithm", "n", "m"] and len(rows) == 1
    rec = dict(zip(head, rows[0]))
    assert rec["algorithm"] == "rmp0" and rec["k"] == "12"
    assert len(rec["support"].split()) >= 1 and rec["exact_recovery"] in ("0", "1")
    meta = comments(out)
    assert meta["command"] == "recover" and meta["alg"] == "rmp0" and meta["seed"] == "7"
    assert "generated" not in meta


def test_recover_from_problem_file(capsys, tmp_path, rng):
    A = rng.standard_normal((10, 6))
    y = A[:, [1, 4]] @ np.array([2.0, -1.0])
    p = tmp_path / "prob.csv"
    p.write_text("\n".join(",".join(repr(float(v)) for v in row) for row in np.column_stack([A, y])))
    code, out, _ = run(capsys, "recover", "--alg", "omp", "--problem", str(p), "--delta", "1e-8")
    assert code == 0
    head, rows = table(out)
    rec = dict(zip(head, rows[0]))
    assert rec["support"] == "1 4"
    code, _, err = run(capsys, "recover", "--alg", "omp", "--problem", str(p))
    assert code == 1 and "--delta" in err


def test_recover_malformed_file(capsys, tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("1,2,3\n4,oops,6\n")
    code, _, err = run(capsys, "recover", "--alg", "omp", "--problem", str(p), "--delta", "0.1")
    assert code == 1 and "DataFormat" in err and "line 2" in err


def test_recover_solver_error_exit_code(capsys):
    code, _, err = run(capsys, "recover", "--alg", "br", "--n", "8", "--m", "16", "--k", "2")
    assert code == 2 and "NotDetermined" in err


@pytest.mark.parametrize("argv", [
    ["recover", "--alg", "lasso", "--n", "4", "--m", "4", "--k", "1"],
    ["recover", "--alg", "omp", "--n", "4", "--m", "4", "--k", "1", "--bogus"],
    [],
])
def test_usage_errors(capsys, argv):
    with pytest.raises(SystemExit) as exc:
        main(argv)
    assert exc.value.code == 1
    capsys.readouterr()


def test_missing_generator_flags(capsys):
    code, _, err = run(capsys, "recover", "--alg", "omp", "--n", "4")
    assert code == 1 and "--m" in err


# ---------------------------------------------------------------- bounds


def test_bounds_identity(capsys):
    code, out, _ = run(capsys, "bounds", "--gen", "identity", "--n", "8", "--m", "8", "--k", "2", "--deterministic")
    assert code == 0
    _, rows = table(out)
    vals = {r[0]: r[2] for r in rows}
    assert float(vals["mu"]) == 0.0
    assert float(vals["fwd_bound"]) == pytest.approx(1 / np.sqrt(2))
    assert float(vals["bwd_bound"]) == pytest.approx(1 / np.sqrt(2))
    assert "mu1(2)" in vals and "mu1(4)" in vals


def test_bounds_rejects_k_at_least_m(capsys):
    code, _, err = run(capsys, "bounds", "--gen", "identity", "--n", "8", "--m", "8", "--k", "8")
    assert code == 1 and "BadArity" in err


def test_bounds_probability_sweep(capsys, tmp_path):
    fig = tmp_path / "b.svg"
    code, out, _ = run(capsys, "bounds", "--mu1-k", "0.1", "--mu1-2k", "0.3", "--m", "16", "--k", "4",
                       "--deltas", "1:8:15", "--svg", str(fig), "--deterministic")
    assert code == 0
    _, rows = table(out)
    series = {}
    for q, d, v in rows:
        if q.startswith("prob_"):
            series.setdefault(q, []).append((float(d), float(v)))
    for name, pts in series.items():
        vals = [v for _, v in pts]
        assert vals == sorted(vals), name
    b1, b2, base = (dict(series[k]) for k in ("prob_bound1", "prob_bound2", "prob_baseline"))
    big = [d for d in b1 if 3 <= d <= 7]
    assert big and all(b1[d] >= base[d] and b2[d] >= base[d] for d in big)
    ET.parse(fig)


def test_bounds_with_support_reports_erc(capsys):
    code, out, _ = run(capsys, "bounds", "--gen", "gaussian", "--n", "12", "--m", "10", "--k", "2",
                       "--support", "0,3", "--seed", "1")
    assert code == 0 and "erc," in out


# ---------------------------------------------------------------- phase


def test_phase_single_cell_with_svg(capsys, tmp_path):
    fig = tmp_path / "p.svg"
    code, out, _ = run(capsys, "phase", "--m", "32", "--n-ratios", "0.5", "--k-ratios", "0.25", "--trials", "4",
                       "--algs", "rmp0", "--svg", str(fig), "--deterministic", "--workers", "1")
    assert code == 0
    head, rows = table(out)
    assert head == ["n_ratio", "k_ratio", "algorithm", "frequency", "half_width", "trials"]
    assert len(rows) == 1 and rows[0][2] == "rmp0" and rows[0][5] == "4"
    root = ET.parse(fig).getroot()
    assert root.tag.endswith("svg")


def test_phase_defaults_follow_protocol(capsys, monkeypatch):
    from sparse_pursuit import cli
    seen = {}
    monkeypatch.setattr(cli, "phase_grid", lambda cfg: seen.setdefault("cfg", cfg) and (_ for _ in ()).throw(
        cli.UsageError("stop")))
    code, _, _ = run(capsys, "phase")
    cfg = seen["cfg"]
    assert code == 1 and (cfg.m, cfg.trials, cfg.noise) == (128, 256, 1e-2)


def test_phase_multiple_algorithms_write_one_svg_each(capsys, tmp_path):
    fig = tmp_path / "grid.svg"
    code, _, _ = run(capsys, "phase", "--m", "16", "--n-ratios", "0.5,1", "--k-ratios", "0.25", "--trials", "2",
                     "--algs", "fr,rmp0", "--svg", str(fig), "--workers", "1")
    assert code == 0
    assert (tmp_path / "grid_fr.svg").exists() and (tmp_path / "grid_rmp0.svg").exists()


def test_phase_rejects_zero_trials(capsys):
    code, _, err = run(capsys, "phase", "--trials", "0", "--m", "16", "--n-ratios", "0.5", "--k-ratios", "0.5")
    assert code == 1 and "trial" in err


# ---------------------------------------------------------------- table


def test_table_preset_layout(capsys):
    code, out, _ = run(capsys, "table", "--preset", "table1", "--trials", "1", "--workers", "1", "--deterministic")
    assert code == 0
    head, rows = table(out)
    assert head == ["algorithm", "k", "frequency", "half_width", "trials"]
    algs = ["omp", "fr", "foba", "rmp0", "rmp0_plus", "fsbl", "rmp_sigma"]
    assert [(r[0], int(r[1])) for r in rows] == [(a, k) for a in algs for k in (12, 16, 20, 24)]
    assert comments(out)["preset"] == "table1"


def test_table_custom_ks_and_trials_file(capsys, tmp_path):
    per = tmp_path / "trials.csv"
    code, out, _ = run(capsys, "table", "--preset", "table2", "--ks", "2,3", "--n", "16", "--m", "32", "--trials", "3",
                       "--algs", "omp,rmp0", "--trials-out", str(per), "--workers", "1", "--deterministic")
    assert code == 0
    _, rows = table(out)
    assert sorted({int(r[1]) for r in rows}) == [2, 3]
    trial_rows = list(csv.reader(per.open()))
    assert trial_rows[0] == ["experiment_id", "algorithm", "n", "m", "k", "seed", "exact_recovery",
                             "residual_norm", "wall_time_ns"]
    assert len(trial_rows) == 1 + 2 * 2 * 3
    assert {r[-1] for r in trial_rows[1:]} == {"0"}


def test_table_rejects_unknown_algorithm(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["table", "--algs", "omp,lasso"])
    assert exc.value.code == 1
    assert "lasso" in capsys.readouterr().err


def test_table_output_is_byte_identical_across_runs_and_workers(capsys, tmp_path):
    args = ["table", "--preset", "table1", "--ks", "4,8", "--n", "24", "--m", "48", "--trials", "6",
            "--algs", "fr,rmp0_plus,rmp_sigma", "--deterministic", "--seed", "5"]
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(args + ["--workers", "1", "-o", str(a)]) == 0
    assert main(args + ["--workers", "3", "-o", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


# ---------------------------------------------------------------- kernel


@pytest.fixture
def kernel_csv(tmp_path):
    X, y, _ = synthetic_kernel_data(80, 2, 5, 0.05, seed=3)
    p = tmp_path / "kern.csv"
    write_dataset(p, X, y, header=["x1", "x2", "y"])
    return p


def test_kernel_frontier(capsys, tmp_path, kernel_csv):
    fig = tmp_path / "k.svg"
    code, out, _ = run(capsys, "kernel", "--data", str(kernel_csv), "--splits", "2", "--algs", "rmp0,fr",
                       "--deltas", "0.02,0.1,0.5", "--svg", str(fig), "--deterministic")
    assert code == 0
    head, rows = table(out)
    assert head == ["algorithm", "split", "delta", "sparsity", "rmse"]
    assert len(rows) == 2 * 3 * 2
    for split in ("0", "1"):
        sp = [int(r[3]) for r in rows if r[0] == "rmp0" and r[1] == split]
        assert sp == sorted(sp, reverse=True)
    ET.parse(fig)


def test_kernel_missing_file(capsys, tmp_path):
    code, _, err = run(capsys, "kernel", "--data", str(tmp_path / "none.csv"))
    assert code == 1 and "cannot read" in err


def test_kernel_rejects_zero_lengthscale(capsys, kernel_csv):
    with pytest.raises(SystemExit) as exc:
        main(["kernel", "--data", str(kernel_csv), "--ell", "0"])
    assert exc.value.code == 1
    capsys.readouterr()


# ---------------------------------------------------------------- bench


def test_bench_sorted_rows(capsys):
    code, out, _ = run(capsys, "bench", "--sizes", "32,16", "--algs", "rmp0,fr", "--repeats", "1", "--deterministic")
    assert code == 0
    _, rows = table(out)
    assert [(int(r[0]), r[3]) for r in rows] == [(16, "fr"), (16, "rmp0"), (32, "fr"), (32, "rmp0")]
    assert {r[-1] for r in rows} == {"0"}
    code, out, _ = run(capsys, "bench", "--sizes", "16", "--algs", "omp", "--repeats", "2")
    assert [r[3] for r in table(out)[1]] == ["omp"]


# ---------------------------------------------------------------- svg and entry point


def test_gray_scale_endpoints():
    assert gray(0.0) == "#000000" and gray(1.0) == "#ffffff" and gray(2.0) == "#ffffff"


def test_heatmap_has_one_rect_per_cell():
    f = np.array([[0.0, 0.5, np.nan], [1.0, 0.25, 0.75]])
    root = ET.fromstring(heatmap(f, [0.2, 0.5, 1.0], [0.1, 0.3]).encode())
    ns = "{http://www.w3.org/2000/svg}"
    fills = [r.get("fill") for r in root.iter(ns + "rect") if r.get("width") == "36"]
    assert len(fills) == 6
    assert "#000000" in fills and "#ffffff" in fills


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "sparse_pursuit", "bounds", "--gen", "identity", "--n", "4",
                          "--m", "4", "--k", "1", "--deterministic"], capture_output=True, text=True)
    assert res.returncode == 0 and res.stdout.startswith("# command=bounds")
