import json
import math
from fractions import Fraction

import numpy as np
import pytest
from scipy.stats import qmc

from latticelhd.errors import ValidationError
from latticelhd.functions import FUNCTIONS, evaluate_function, get_function, reference_mean
from latticelhd.io import (
    config_hash,
    design_csv,
    format_table,
    read_column,
    read_design,
    read_sidecar,
    read_table,
    sidecar_dict,
    spec_from_sidecar,
    write_design,
    write_sidecar,
)
from latticelhd.lattice_designs import LatticeSpec, lattice_points, slice_extract
from latticelhd.rlhd import RlhdSpec


def sobol_mean(name, log2n=18):
    x = qmc.Sobol(get_function(name).d, scramble=True, seed=1).random_base2(log2n)
    return float(np.mean(evaluate_function(name, x)))


def test_ackley_minimum_at_domain_origin():
    assert evaluate_function("ackley", [[0.5, 0.5, 0.5]])[0] == pytest.approx(0.0, abs=1e-12)
    assert np.all(evaluate_function("ackley", np.random.default_rng(0).random((100, 3))) > 0)


def test_known_values():
    # Shekel's global minimum sits at (4, 4, 4, 4) on [0, 10]^4
    assert evaluate_function("shekel", [[0.4] * 4])[0] == pytest.approx(-10.5363, abs=1e-4)
    # two-dimensional Michalewicz minimum is -1.8013 at (2.20, 1.57); here only the first two terms matter
    z = np.array([[2.20290552, 1.57079633, 0, 0, 0, 0]]) / np.pi
    assert evaluate_function("michalewicz", z)[0] == pytest.approx(-1.8013, abs=1e-4)
    assert evaluate_function("gfunction", [[0.5] * 5])[0] == pytest.approx(np.prod([a / (1 + a) for a in (-0.5, 0, 0.5, 1, 1.5)]))
    # borehole at the centre of its box, from the closed form by hand
    rw, r, Tu, Hu, Tl, Hl, L, Kw = 0.1, 25050, 89335, 1050, 89.55, 760, 1400, 10950
    lnr = math.log(r / rw)
    expected = 2 * math.pi * Tu * (Hu - Hl) / (lnr * (1 + 2 * L * Tu / (lnr * rw ** 2 * Kw) + Tu / Tl))
    assert evaluate_function("borehole", [[0.5] * 8])[0] == pytest.approx(expected, rel=1e-12)


def test_evaluate_rejects_bad_input():
    with pytest.raises(ValidationError, match="unknown"):
        evaluate_function("rosenbrock", [[0.5]])
    with pytest.raises(ValidationError, match="d=3"):
        evaluate_function("ackley", [[0.5, 0.5]])
    with pytest.raises(ValidationError):
        evaluate_function("ackley", [[0.5, 0.5, 1.5]])


def test_evaluation_is_deterministic_and_vectorised():
    rng = np.random.default_rng(1)
    for name, f in FUNCTIONS.items():
        X = rng.random((20, f.d))
        batch = evaluate_function(name, X)
        rows = np.array([evaluate_function(name, x)[0] for x in X])
        np.testing.assert_array_equal(evaluate_function(name, X), batch)
        # a matrix product over a batch may round differently from one row
        np.testing.assert_allclose(batch, rows, rtol=1e-12, atol=1e-14)
        assert np.all(np.isfinite(batch))


@pytest.mark.parametrize("name", ["prpeak", "oscil", "gfunction"])
def test_analytic_means_match_quasi_monte_carlo(name):
    value, source = reference_mean(name)
    assert source == "analytic"
    assert value == pytest.approx(sobol_mean(name), rel=2e-3, abs=2e-4)


def test_gfunction_mean_is_one():
    assert reference_mean("gfunction")[0] == 1.0


@pytest.mark.parametrize("name", ["borehole", "ackley", "shekel", "michalewicz"])
def test_stored_lattice_means_match_quasi_monte_carlo(name):
    value, source = reference_mean(name)
    assert "lattice" in source and "seed" in source
    assert value == pytest.approx(sobol_mean(name, 20), rel=1e-4, abs=1e-4)


def test_table_format_and_round_trip(tmp_path):
    text = format_table(["a", "b"], [[0.1, 2], [1 / 3, "x"]], comment="hello")
    assert text.splitlines() == ["# hello", "a,b", "0.10000000000000001,2", "0.33333333333333331,x"]
    pts = np.random.default_rng(2).random((7, 3))
    path = tmp_path / "d.csv"
    write_design(path, pts, comment="meta")
    np.testing.assert_array_equal(read_design(path), pts)
    assert design_csv(pts).startswith("x1,x2,x3\n")


def test_readers_reject_malformed_files(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("a,b\n1,2\n")
    with pytest.raises(ValidationError, match="header"):
        read_design(bad)
    with pytest.raises(ValidationError, match="one column"):
        read_column(bad)
    bad.write_text("x1\nfoo\n")
    with pytest.raises(ValidationError):
        read_table(bad)
    bad.write_text("# only a comment\n")
    with pytest.raises(ValidationError, match="empty"):
        read_table(bad)
    with pytest.raises(ValidationError):
        read_table(tmp_path / "missing.csv")


def test_sidecar_round_trip(tmp_path):
    spec = RlhdSpec(50, 18, (1, 7), (13, 12))
    meta = sidecar_dict(spec, "WD", 0.5, 7)
    assert list(meta)[:9] == ["type", "n", "d", "v", "delta", "m", "criterion", "value", "seed"]
    write_sidecar(tmp_path / "s.json", meta)
    back = read_sidecar(tmp_path / "s.json")
    assert spec_from_sidecar(back) == spec
    lat = slice_extract(LatticeSpec(4, (1,), (0,)), 2, 0)
    meta = json.loads(json.dumps(sidecar_dict(lat, None, float("inf"), None)))
    assert meta["value"] is None
    back = spec_from_sidecar(meta)
    assert back.delta == (Fraction(7, 4),)
    np.testing.assert_array_equal(lattice_points(back).points, lattice_points(lat).points)
    with pytest.raises(ValidationError):
        spec_from_sidecar({"type": "lhd"})
    with pytest.raises(ValidationError):
        spec_from_sidecar({"type": "rlhd", "n": 5})


def test_config_hash_is_git_blob_sha1():
    assert config_hash({}) == "9e26dfeeb6e641a33dae4961196235bdb965b21b"  # git hash-object of "{}"
    assert config_hash({"b": 1, "a": 2}) == config_hash({"a": 2, "b": 1})
