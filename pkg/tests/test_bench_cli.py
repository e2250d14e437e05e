import re
import subprocess
import sys

import numpy as np
import pytest

import latticelhd.emulator as emu
from latticelhd import bench
from latticelhd.bench import (
    cell_seed,
    correlation_study,
    integration_benchmark,
    integration_design,
    partitioned_baseline,
    rlhd_size_for,
    window_width_for,
)
from latticelhd.cli import main
from latticelhd.design_core import validate_lhd
from latticelhd.errors import ValidationError
from latticelhd.io import config_hash, read_design, read_sidecar, read_table
from latticelhd.rlhd import expected_size, rlhd_size


def test_cell_seeds_are_deterministic_and_distinct():
    assert cell_seed(0, 1, 2) == cell_seed(0, 1, 2)
    seeds = {cell_seed(s, a, b) for s in range(3) for a in range(10) for b in range(10)}
    assert len(seeds) == 300
    assert all(0 <= s < 2 ** 63 for s in seeds)


@pytest.mark.parametrize("method", bench.INTEGRATION_METHODS)
def test_integration_designs_are_lhds(method):
    pts = integration_design(method, 64, 3, 5, iters=100)
    assert pts.shape == (64, 3)
    assert validate_lhd(pts)


def test_integration_csv_is_byte_deterministic_and_thread_safe():
    args = (["gfunction", "prpeak"], list(bench.INTEGRATION_METHODS), [16, 32], 3)
    a = integration_benchmark(*args, seed=4, iters=100)
    b = integration_benchmark(*args, seed=4, iters=100)
    assert a.to_csv() == b.to_csv()
    c = integration_benchmark(*args, seed=4, iters=100, threads=3)
    assert [r[:4] for r in c.rows] == [r[:4] for r in a.rows]
    np.testing.assert_allclose([r[4] for r in c.rows], [r[4] for r in a.rows], rtol=1e-12, atol=1e-15)
    assert integration_benchmark(*args, seed=5, iters=100).to_csv() != a.to_csv()


def test_integration_csv_header_and_metadata():
    res = integration_benchmark(["gfunction"], ["lhd"], [8], 2, seed=9)
    lines = res.to_csv().splitlines()
    meta = re.fullmatch(r"# latticelhd (\S+) seed=9 config=([0-9a-f]{40})", lines[0])
    assert meta and meta.group(1) == bench.tool_version()
    assert meta.group(2) == config_hash(res.config)
    assert lines[1] == "function,method,n,replicate,error"
    assert len(lines) == 2 + 2


def test_integration_rejects_bad_arguments():
    with pytest.raises(ValidationError):
        integration_benchmark(["gfunction"], ["sobol"], [8], 1)
    with pytest.raises(ValidationError):
        integration_benchmark(["gfunction"], ["lhd"], [8], 0)


def test_integration_error_shrinks_with_n():
    grid = [32, 128, 512]
    res = integration_benchmark(["prpeak"], list(bench.INTEGRATION_METHODS), grid, 15, seed=1, iters=300)
    med = res.summary()
    for method in bench.INTEGRATION_METHODS:
        values = [med[("prpeak", method, n)] for n in grid]
        assert all(b < a for a, b in zip(values, values[1:])), (method, values)


def test_correlation_study_shape_and_errors():
    res = correlation_study(30, 3, 100, seed=2)
    for mat in (res.llhd, res.lhd):
        assert mat.shape == (4, 4)
        np.testing.assert_allclose(mat, mat.T)
        np.testing.assert_allclose(np.diag(mat), 1.0)
    assert correlation_study(30, 3, 100, seed=2).to_csv() == res.to_csv()
    assert res.to_csv().splitlines()[1] == "design,criterion,WS,WP,WD,WS2"
    with pytest.raises(ValidationError):
        correlation_study(30, 3, 99)


def test_size_helpers():
    n = rlhd_size_for(2000, 100, 3)
    assert n % 100 == 0 and n == 300
    for n_target in (500, 3000, 20000):
        n = rlhd_size_for(n_target, 50, 2)
        ratios = [abs(np.log(expected_size(k, 50, 2) / n_target)) for k in (n - 50, n, n + 50) if k >= 50]
        assert abs(np.log(expected_size(n, 50, 2) / n_target)) == min(ratios)
    # a width-w window holds about w^d / m^(d-1) points
    w = window_width_for(50, 100, 3)
    assert w ** 3 / 100 ** 2 >= 50 > (w - 1) ** 3 / 100 ** 2


def test_partitioned_baseline_runs_one_model_per_cell():
    X = np.random.default_rng(0).random((30, 2))
    with pytest.raises(ValidationError):
        partitioned_baseline("borehole", 64, X, 0)
    X = np.random.default_rng(0).random((30, 3))
    pred, info = partitioned_baseline("ackley", 400, X, 1)
    assert pred.shape == (30,) and np.all(np.isfinite(pred))
    assert info["cells"] == 8 and info["m"] == 50
    assert info["n_factorizations"] >= 8


def test_emulation_benchmark_small_run():
    rep = bench.emulation_benchmark("ackley", n_target=300, m=20, n_test=50, seed=3, search_iters=200)
    assert rep.spec.n % 20 == 0 and rep.size == rlhd_size(rep.spec)
    assert rep.train_residual < 1e-6
    assert np.isfinite(rep.rmse) and np.isfinite(rep.pd_rmse)
    text = bench.emulation_csv([rep], 3, {"n_target": 300})
    assert text.splitlines()[1] == ",".join(bench.EMULATION_HEADER)
    with pytest.raises(ValidationError):
        bench.emulation_benchmark("borehole")


# ------------------------------------------------------------------ command line

def run(argv, capsys):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def test_generate_and_evaluate(tmp_path, capsys):
    path = tmp_path / "llhd.csv"
    code, _, err = run(["--seed", 3, "--out", path, "generate", "--method", "llhd", "--n", 31, "--d", 3,
                        "--iters", 300], capsys)
    assert code == 0
    pts = read_design(path)
    assert pts.shape == (31, 3) and validate_lhd(pts)
    meta = read_sidecar(path.with_suffix(".json"))
    assert meta["type"] == "llhd" and meta["seed"] == 3 and meta["criterion"] == "WD"
    progress = [ln for ln in err.splitlines() if ln]
    assert progress and all(re.fullmatch(r"\d+,\S+", ln) for ln in progress)
    code, out, _ = run(["evaluate", "--design", path, "--criteria", "WD,WS2"], capsys)
    assert code == 0
    rows = dict(line.split(",") for line in out.splitlines()[1:])
    assert float(rows["WD"]) == pytest.approx(meta["value"], rel=1e-12)


def test_generate_olhd_progress_lines(tmp_path, capsys):
    code, _, err = run(["generate", "--method", "olhd", "--n", 20, "--d", 2, "--iters", 200,
                        "--stride", 50, "--out", tmp_path / "o.csv"], capsys)
    assert code == 0
    lines = [ln.split(",") for ln in err.splitlines()]
    iters = [int(t) for t, _ in lines]
    best = [float(b) for _, b in lines]
    assert iters == sorted(iters) and len(iters) >= 4
    assert all(b <= a for a, b in zip(best, best[1:]))


@pytest.mark.parametrize("method", ["lhd", "plhd"])
def test_generate_other_methods(method, tmp_path, capsys):
    code, _, _ = run(["generate", "--method", method, "--n", 13, "--d", 3, "--out", tmp_path / "g.csv"], capsys)
    assert code == 0
    assert validate_lhd(read_design(tmp_path / "g.csv"))


def test_generate_sliced(tmp_path, capsys):
    code, _, _ = run(["generate", "--method", "sliced-llhd", "--n", 24, "--d", 2, "--slices", 3,
                      "--iters", 100, "--out", tmp_path / "s.csv"], capsys)
    assert code == 0
    assert read_sidecar(tmp_path / "s.json")["slices"] == 3


def test_reduce_output(capsys):
    code, out, _ = run(["reduce", "--n", 5, "--v", "1,2"], capsys)
    assert code == 0
    rows = dict(line.split(",") for line in out.splitlines()[1:])
    assert rows["a"] == "1 2" and float(rows["separation"]) == pytest.approx(0.4472136, abs=1e-7)
    assert float(rows["fill"]) == pytest.approx(0.31623, abs=1e-5)


def test_validation_errors_exit_2(tmp_path, capsys):
    assert run(["reduce", "--n", 6, "--v", "1,2"], capsys)[0] == 2
    assert run(["reduce", "--n", 7, "--v", "1,2,3"], capsys)[0] == 2
    assert run(["generate", "--method", "llhd", "--n", 5], capsys)[0] == 2
    assert run(["evaluate", "--design", tmp_path / "missing.csv"], capsys)[0] == 2
    with pytest.raises(SystemExit) as exc:
        main(["generate", "--method", "nope"])
    assert exc.value.code == 2


def make_rlhd_case(tmp_path, capsys):
    design = tmp_path / "r.csv"
    code, _, _ = run(["generate", "--method", "rlhd", "--n", 40, "--m", 8, "--v", "1,3", "--delta", "2,5",
                      "--out", design], capsys)
    assert code == 0
    pts = read_design(design)
    y = np.sin(3 * pts[:, 0]) + pts[:, 1] ** 2
    (tmp_path / "y.csv").write_text("y\n" + "\n".join("%.17g" % v for v in y) + "\n")
    return design, pts, y


def test_emulate_reproduces_training_outputs(tmp_path, capsys):
    design, pts, y = make_rlhd_case(tmp_path, capsys)
    perm = np.random.default_rng(0).permutation(len(y))
    (tmp_path / "p.csv").write_text("x1,x2\n" + "\n".join("%.17g,%.17g" % tuple(p) for p in pts[perm]) + "\n")
    (tmp_path / "yp.csv").write_text("y\n" + "\n".join("%.17g" % v for v in y[perm]) + "\n")
    code, _, err = run(["emulate", "--design", tmp_path / "p.csv", "--sidecar", tmp_path / "r.json",
                        "--outputs", tmp_path / "yp.csv", "--test", design, "--pred", tmp_path / "pred.csv",
                        "--theta", "0.1,0.1"], capsys)
    assert code == 0
    header, pred = read_table(tmp_path / "pred.csv")
    assert header == ["mean", "variance"]
    np.testing.assert_allclose(pred[:, 0], y, atol=1e-6)
    assert np.all(pred[:, 1] >= 0)
    code, _, err = run(["emulate", "--design", design, "--sidecar", tmp_path / "r.json",
                        "--outputs", tmp_path / "y.csv", "--test", design, "--pred", tmp_path / "a.csv"], capsys)
    assert code == 0 and err.startswith("theta=")


def test_emulate_rejects_incomplete_design(tmp_path, capsys):
    design, pts, y = make_rlhd_case(tmp_path, capsys)
    (tmp_path / "short.csv").write_text("x1,x2\n" + "\n".join("%.17g,%.17g" % tuple(p) for p in pts[1:]) + "\n")
    (tmp_path / "ys.csv").write_text("y\n" + "\n".join("%.17g" % v for v in y[1:]) + "\n")
    code, _, err = run(["emulate", "--design", tmp_path / "short.csv", "--sidecar", tmp_path / "r.json",
                        "--outputs", tmp_path / "ys.csv", "--test", design, "--theta", "0.1,0.1"], capsys)
    assert code == 2 and "rows" in err


def test_numerical_failure_exits_3(tmp_path, capsys, monkeypatch):
    design, _, _ = make_rlhd_case(tmp_path, capsys)

    def failing(*args, **kwargs):
        raise emu.LinAlgError("not positive definite")

    monkeypatch.setattr(emu, "cho_factor", failing)
    with pytest.warns(RuntimeWarning, match="raising nugget"):
        code, _, err = run(["emulate", "--design", design, "--sidecar", tmp_path / "r.json",
                            "--outputs", tmp_path / "y.csv", "--test", design, "--theta", "0.1,0.1"], capsys)
    assert code == 3 and "numerical failure" in err


def test_bench_commands_write_csv(tmp_path, capsys):
    code, out, _ = run(["--seed", 1, "bench-integrate", "--functions", "gfunction", "--methods", "lhd,plhd",
                        "--n-grid", "8,16", "--replicates", 2], capsys)
    assert code == 0
    assert out.startswith("# latticelhd ") and len(out.splitlines()) == 2 + 8
    code, out, _ = run(["corr-study", "--n", 20, "--d", 2, "--num-designs", 100], capsys)
    assert code == 0 and len(out.splitlines()) == 2 + 8


def test_console_script_entry_point():
    proc = subprocess.run([sys.executable, "-m", "latticelhd.cli", "reduce", "--n", "7", "--v", "1,3"],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and "separation" in proc.stdout
