import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from latticelhd.design_core import (
    CriterionKind,
    Design,
    _wd_factor,
    criterion_full,
    fill_distance_grid,
    validate_lhd,
    wrap_dist,
    wrap_dist_1d,
)
from latticelhd.errors import CapabilityError, ValidationError
from latticelhd.lattice_designs import LatticeSpec, lattice_points
from latticelhd.optimizers import random_lhd

LAT5 = lattice_points(LatticeSpec(5, (1, 2), (0, 0)))


def brute_ws(pts, wrap=True):
    best = np.inf
    for a, b in itertools.combinations(pts, 2):
        diff = np.abs(a - b)
        if wrap:
            diff = np.minimum(diff, 1 - diff)
        best = min(best, np.sqrt(np.sum(diff ** 2)))
    return 1 / best


@pytest.mark.parametrize("z, expected", [(0.5, 0.5), (0.9, 0.1), (-0.3, 0.3), (2.25, 0.25), (0.0, 0.0)])
def test_wrap_dist_1d_examples(z, expected):
    assert wrap_dist_1d(z) == pytest.approx(expected, abs=1e-15)


@given(st.floats(-1e3, 1e3, allow_nan=False))
def test_wrap_dist_1d_range_even_periodic(z):
    w = wrap_dist_1d(z)
    assert 0.0 <= w <= 0.5
    assert w == pytest.approx(wrap_dist_1d(-z), abs=1e-12)
    assert w == pytest.approx(wrap_dist_1d(z + 1.0), abs=1e-9)


def test_wrap_dist_vector_is_euclidean_of_components():
    assert wrap_dist([0.9, -0.3]) == pytest.approx(np.hypot(0.1, 0.3))


def test_validate_lhd_examples():
    assert validate_lhd([0.25, 0.75])
    assert not validate_lhd([0.25, 0.25])
    assert validate_lhd(LAT5)
    assert sorted(LAT5.points[:, 1]) == pytest.approx([0.1, 0.3, 0.5, 0.7, 0.9])


def test_design_rejects_out_of_range_and_false_lhd_flag():
    with pytest.raises(ValidationError):
        Design([[0.2, 1.2]])
    with pytest.raises(ValidationError):
        Design([[0.2], [0.3]], is_lhd=True)
    d = Design([[0.25], [0.75]], is_lhd=True)
    assert (d.n, d.d) == (2, 1)
    with pytest.raises(ValueError):
        d.points[0, 0] = 0.5


def test_criterion_examples():
    two = [0.25, 0.75]
    assert criterion_full(two, "WD") == pytest.approx(0.2041241, abs=1e-7)
    assert criterion_full(two, "WD") == pytest.approx(np.sqrt(5.5 / 4 - 4 / 3), rel=1e-12)
    assert criterion_full(two, "WA") == pytest.approx(2.0, rel=1e-12)
    assert criterion_full(two, "WP") == pytest.approx(4.0, rel=1e-12)
    assert criterion_full(LAT5, "WS") == pytest.approx(2.2360680, abs=1e-7)
    assert criterion_full(LAT5, "WS") == pytest.approx(brute_ws(LAT5.points), rel=1e-12)


def test_criterion_parse():
    assert CriterionKind.parse("ws2") is CriterionKind.WS2
    with pytest.raises(ValidationError):
        CriterionKind.parse("XX")


def test_criterion_preconditions():
    with pytest.raises(ValidationError):
        criterion_full([0.5], "WS")
    with pytest.raises(ValidationError):
        criterion_full([0.25, 0.75], "WS2")
    with pytest.raises(ValidationError):
        criterion_full([[0.2, 1.5], [0.3, 0.1]], "WD")


def test_coincident_points_give_infinity():
    pts = [[0.1, 0.2], [0.1, 0.2], [0.6, 0.7]]
    assert criterion_full(pts, "WS") == np.inf
    assert criterion_full([[0.1, 0.2], [0.1, 0.7]], "WP") == np.inf


def test_bivariate_is_sum_over_projections():
    X = random_lhd(12, 4, 3).points
    for kind, base in (("WS2", "WS"), ("RS2", "RS")):
        total = sum(criterion_full(X[:, [k, l]], base) for k, l in itertools.combinations(range(4), 2))
        assert criterion_full(X, kind) == pytest.approx(total, rel=1e-12)


def test_wrap_criteria_dominate_euclidean():
    for seed in range(100):
        X = random_lhd(15, 3, seed)
        assert criterion_full(X, "WS") >= criterion_full(X, "RS") - 1e-12


def test_permutation_invariance():
    rng = np.random.default_rng(0)
    X = random_lhd(20, 4, 1).points
    Y = X[rng.permutation(20)][:, rng.permutation(4)]
    for kind in ("WS", "WA", "WP", "WD", "RS", "AS", "WS2", "RS2"):
        assert criterion_full(Y, kind) == pytest.approx(criterion_full(X, kind), rel=1e-12, abs=1e-12)


def test_wrap_shift_invariance():
    rng = np.random.default_rng(1)
    for _ in range(100):
        X = rng.random((10, 3))
        Y = np.mod(X + rng.random(3), 1.0)
        for kind in ("WS", "WA", "WP", "WD"):
            assert criterion_full(Y, kind) == pytest.approx(criterion_full(X, kind), rel=1e-9)


def test_wd_factor_expansion():
    u = np.random.default_rng(2).uniform(-1, 1, 1000)
    w = np.abs(u + 0.5 - np.round(u + 0.5))
    np.testing.assert_allclose(_wd_factor(u), 1.25 + w ** 2, atol=1e-12)
    np.testing.assert_allclose(_wd_factor(u), 1.5 - np.abs(u) * (1 - np.abs(u)), atol=1e-12)


def test_wd_against_pairwise_definition():
    X = np.random.default_rng(3).random((9, 3))
    total = 0.0
    for a in X:
        for b in X:
            u = np.abs(a - b)
            total += np.prod(1.5 - u * (1 - u))
    expected = np.sqrt(total / 81 - (4 / 3) ** 3)
    assert criterion_full(X, "WD") == pytest.approx(expected, rel=1e-12)


def test_log_domain_matches_direct_products_at_high_dimension():
    # d = 21 takes the log path; the same values computed by plain products
    X = random_lhd(8, 21, 5).points
    direct_wd = 0.0
    for a in X:
        for b in X:
            u = np.abs(a - b)
            direct_wd += np.prod(1.5 - u * (1 - u))
    direct_wd = np.sqrt(direct_wd / 64 - (4 / 3) ** 21)
    assert criterion_full(X, "WD") == pytest.approx(direct_wd, rel=1e-8)
    s = 0.0
    for a, b in itertools.combinations(X, 2):
        w = np.abs(a - b)
        w = np.minimum(w, 1 - w)
        s += np.prod(w ** -2.0)
    assert criterion_full(X, "WP") == pytest.approx((s / 28) ** (1 / 21), rel=1e-9)


def test_fill_distance_examples():
    res = 400
    assert fill_distance_grid([[0.5, 0.5]], res, wrap=True) == pytest.approx(np.sqrt(0.5), abs=np.sqrt(2) / (2 * res))
    assert fill_distance_grid([0.5], res, wrap=False) == pytest.approx(0.5, abs=1 / (2 * res))
    assert fill_distance_grid(LAT5, 1000, wrap=True) == pytest.approx(0.3162, abs=np.sqrt(2) / 2000 + 1e-4)


def test_fill_distance_rejects_high_dimension_and_coarse_grid():
    with pytest.raises(CapabilityError):
        fill_distance_grid(np.full((2, 4), 0.5), 32, wrap=True)
    with pytest.raises(ValidationError):
        fill_distance_grid([[0.5, 0.5]], 8, wrap=True)


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 30), st.integers(1, 5), st.integers(0, 2 ** 32))
def test_random_lhd_is_lhd(n, d, seed):
    assert validate_lhd(random_lhd(n, d, seed))
