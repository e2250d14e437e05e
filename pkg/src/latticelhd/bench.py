"""Desk-scale experiments: criterion correlations, integration error and emulation RMSE.

Every cell of a benchmark draws its randomness from its own stream,
``SeedSequence(seed, spawn_key=cell)``, so results do not depend on the
order or the thread in which cells run.
"""
from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import metadata

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve
from scipy.optimize import minimize

from .design_core import criterion_full
from .emulator import (
    GpHyperParams,
    corr_matrix,
    estimate_lengthscales,
    factorize,
    fit_shared_model,
    predict_batch,
)
from .errors import ValidationError
from .functions import FUNCTIONS, evaluate_function, get_function, reference_mean
from .io import config_hash, format_table
from .lattice_designs import LatticeSpec, coprime_residues, lattice_criterion, lattice_points, ws2_fast
from .optimizers import LlhdSearchConfig, SaConfig, korobov_search, llhd_optimize, random_lhd, sa_optimize_lhd
from .rlhd import RlhdSpec, rlhd_points

INTEGRATION_METHODS = ("lhd", "olhd-wd", "llhd-wd", "llhd-ws2", "plhd")
CORRELATION_KINDS = ("WS", "WP", "WD", "WS2")
EMULATION_FUNCTIONS = ("ackley", "shekel", "michalewicz")


def tool_version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "0+unknown"


def cell_seed(seed: int, *key: int) -> int:
    """Integer seed of one benchmark cell."""
    return int(np.random.SeedSequence(seed, spawn_key=key).generate_state(1, np.uint64)[0] >> 1)


def metadata_comment(seed: int, config: dict) -> str:
    return f"latticelhd {tool_version()} seed={seed} config={config_hash(config)}"


def _map(fn, items, threads: int):
    if threads is None or threads <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------- integration

@lru_cache(maxsize=None)
def _korobov_generator(n: int, d: int) -> tuple:
    spec, _ = korobov_search(n, d, "WD")
    return spec.v


def integration_design(method: str, n: int, d: int, seed: int, iters: int = 2000) -> np.ndarray:
    """Points of one replicate design for the integration benchmark."""
    if method == "lhd":
        return random_lhd(n, d, seed).points
    if method == "olhd-wd":
        return sa_optimize_lhd(SaConfig(n, d, T=iters, kind="WD", seed=seed)).points
    if method in ("llhd-wd", "llhd-ws2"):
        kind = "WD" if method == "llhd-wd" else "WS2"
        return llhd_optimize(LlhdSearchConfig(n, d, T=iters, kind=kind, seed=seed))[1].points
    if method == "plhd":
        # optimized power generator with a random shift per replicate
        delta = np.random.default_rng(seed).integers(0, n, size=d)
        return lattice_points(LatticeSpec(n, _korobov_generator(n, d), delta)).points
    raise ValidationError(f"unknown integration method {method!r}; choose from {INTEGRATION_METHODS}")


@dataclass
class IntegrationResult:
    rows: list                      # (function, method, n, replicate, error)
    config: dict
    seed: int

    def to_csv(self) -> str:
        body = [(f, m, n, r, float(e)) for f, m, n, r, e in self.rows]
        return format_table(["function", "method", "n", "replicate", "error"], body,
                            metadata_comment(self.seed, self.config))

    def errors(self, function: str, method: str, n: int) -> np.ndarray:
        return np.array([e for f, m, nn, _, e in self.rows if (f, m, nn) == (function, method, n)])

    def summary(self, stat=np.median) -> dict:
        keys = sorted({(f, m, n) for f, m, n, _, _ in self.rows})
        return {k: float(stat(self.errors(*k))) for k in keys}


def integration_benchmark(functions, methods, n_grid, replicates: int, seed: int = 0,
                          threads: int = 1, iters: int = 2000) -> IntegrationResult:
    """Absolute integration error |mean f(design) - reference mean| per replicate.

    Parameters
    ----------
    functions, methods : sequence of str
        Test-function names and design methods (subset of ``INTEGRATION_METHODS``).
    n_grid : sequence of int
        Design sizes.
    replicates : int
        Independent designs per (function, method, n) cell.
    iters : int
        Search budget of the optimized methods.
    """
    functions, methods, n_grid = list(functions), list(methods), [int(n) for n in n_grid]
    if replicates < 1:
        raise ValidationError("replicates must be at least 1")
    for m in methods:
        if m not in INTEGRATION_METHODS:
            raise ValidationError(f"unknown integration method {m!r}; choose from {INTEGRATION_METHODS}")
    fns = [get_function(f) for f in functions]
    refs = {f.name: reference_mean(f.name)[0] for f in fns}
    cells = [(fi, mi, ni, r) for fi in range(len(fns)) for mi in range(len(methods))
             for ni in range(len(n_grid)) for r in range(replicates)]

    def run(cell):
        fi, mi, ni, r = cell
        f, method, n = fns[fi], methods[mi], n_grid[ni]
        # the design depends on the function only through its dimension
        pts = integration_design(method, n, f.d, cell_seed(seed, f.d, mi, ni, r), iters)
        est = math.fsum(evaluate_function(f.name, pts)) / n
        return f.name, method, n, r, abs(est - refs[f.name])

    rows = _map(run, cells, threads)
    config = {"functions": functions, "methods": methods, "n_grid": n_grid,
              "replicates": replicates, "iters": iters}
    return IntegrationResult(rows, config, seed)


# ---------------------------------------------------------------- correlations

@dataclass
class CorrelationResult:
    kinds: tuple
    llhd: np.ndarray
    lhd: np.ndarray
    values: dict = field(default_factory=dict)
    config: dict = field(default_factory=dict)
    seed: int = 0

    def to_csv(self) -> str:
        rows = []
        for label, mat in (("llhd", self.llhd), ("lhd", self.lhd)):
            for a, row in zip(self.kinds, mat):
                rows.append([label, a, *[float(x) for x in row]])
        return format_table(["design", "criterion", *self.kinds], rows,
                            metadata_comment(self.seed, self.config))


def random_llhd_spec(n: int, d: int, rng: np.random.Generator) -> LatticeSpec:
    """Lattice design with d distinct random generator entries and a random shift."""
    P = coprime_residues(n)
    if d > len(P):
        raise ValidationError(f"only {len(P)} residues coprime to n={n}, need {d} distinct")
    v = rng.choice(P, size=d, replace=False)
    return LatticeSpec(n, v, rng.integers(0, n, size=d))


def correlation_study(n: int, d: int, num_designs: int = 1000, seed: int = 0) -> CorrelationResult:
    """Sample correlations of WS, WP, WD and WS2 over random lattice designs and random LHDs."""
    if num_designs < 100:
        raise ValidationError("num_designs must be at least 100")
    if d < 2:
        raise ValidationError("WS2 needs d >= 2")
    rng_l = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(0,)))
    vals_l = np.empty((num_designs, 4))
    for t in range(num_designs):
        spec = random_llhd_spec(n, d, rng_l)
        vals_l[t, :3] = [lattice_criterion(spec, k) for k in ("WS", "WP", "WD")]
        vals_l[t, 3] = ws2_fast(n, spec.v)
    vals_r = np.empty((num_designs, 4))
    for t in range(num_designs):
        design = random_lhd(n, d, cell_seed(seed, 1, t))
        vals_r[t] = [criterion_full(design, k) for k in CORRELATION_KINDS]
    config = {"n": n, "d": d, "num_designs": num_designs}
    return CorrelationResult(CORRELATION_KINDS, np.corrcoef(vals_l, rowvar=False),
                             np.corrcoef(vals_r, rowvar=False),
                             {"llhd": vals_l, "lhd": vals_r}, config, seed)


# ---------------------------------------------------------------- emulation

def rlhd_size_for(n_target: int, m: int, d: int) -> int:
    """Multiple of m whose RLHD size n^d / m^(d-1) is closest to n_target on a log scale.

    With m dividing n the windows at corners m*z tile the cube, so every
    point of the cube (and every training site) lies in some window of the
    translation lattice.
    """
    k = (n_target / m) ** (1.0 / d)
    cands = {max(1, math.floor(k)), max(1, math.ceil(k))}
    return m * min(cands, key=lambda j: (abs(math.log(j ** d * m / n_target)), j))


def window_width_for(points: int, m: int, d: int) -> int:
    """Width (grid cells) of a window expected to hold about ``points`` design points."""
    return max(2, math.ceil((points * m ** (d - 1)) ** (1.0 / d)))


def _ok_predict(points, y, params: GpHyperParams, X):
    """Ordinary-kriging mean at X from one fitted training set."""
    factor, _ = factorize(points, params)
    ones = cho_solve(factor, np.ones(len(y)), check_finite=False)
    beta = ones @ y / ones.sum()
    alpha = cho_solve(factor, y - beta, check_finite=False)
    return beta + corr_matrix(X, params, points) @ alpha


def _region_nll(log_theta, regions, eta):
    """Negative profile likelihood summed over independent regions, sigma^2 pooled."""
    theta = tuple(np.exp(log_theta))
    total_quad, total_n, total_logdet = 0.0, 0, 0.0
    for pts, y in regions:
        R = corr_matrix(pts, GpHyperParams(theta, eta))
        try:
            c = cho_factor(R, lower=True, check_finite=False)
        except LinAlgError:
            return 1e100
        ones = cho_solve(c, np.ones(len(y)), check_finite=False)
        resid = y - ones @ y / ones.sum()
        total_quad += float(resid @ cho_solve(c, resid, check_finite=False))
        total_logdet += 2.0 * float(np.sum(np.log(np.diag(c[0]))))
        total_n += len(y)
    if not total_quad > 0:
        return 1e100
    return 0.5 * (total_n * math.log(total_quad / total_n) + total_logdet)


def partitioned_baseline(function: str, n_total: int, X_test, seed: int, eta: float = 1e-8,
                         maxfev: int = 200):
    """Split the cube into 2^d halves-per-axis cells, one random LHD and local model per cell.

    Lengthscales maximize the likelihood pooled over all cells.  Returns
    (predictions, info).
    """
    d = get_function(function).d
    X = np.atleast_2d(np.asarray(X_test, dtype=np.float64))
    if X.shape[1] != d:
        raise ValidationError(f"{function} takes d={d} inputs, test points have {X.shape[1]}")
    cells = 2 ** d
    m = max(n_total // cells, 3)
    corners = np.array([[(c >> k) & 1 for k in range(d)] for c in range(cells)], dtype=np.float64) / 2
    regions = []
    for c in range(cells):
        pts = corners[c] + random_lhd(m, d, cell_seed(seed, c)).points / 2
        regions.append((pts, evaluate_function(function, pts)))
    x0 = np.full(d, math.log(0.25))
    step = math.log(100.0)
    simplex = np.vstack([x0] + [x0 - step * np.eye(d)[k] for k in range(d)])
    res = minimize(_region_nll, x0, args=(regions, eta), method="Nelder-Mead",
                   options={"maxfev": maxfev, "initial_simplex": simplex, "xatol": 1e-4, "fatol": 1e-8})
    params = GpHyperParams(tuple(np.exp(res.x)), eta)
    cell_of = (np.minimum(np.floor(X * 2), 1).astype(int) << np.arange(d)).sum(axis=1)
    pred = np.empty(len(X))
    for c in range(cells):
        mask = cell_of == c
        if mask.any():
            pts, y = regions[c]
            pred[mask] = _ok_predict(pts, y, params, X[mask])
    return pred, {"m": m, "cells": cells, "theta": params.theta, "n_factorizations": cells}


@dataclass
class EmulationReport:
    function: str
    spec: RlhdSpec
    size: int
    theta: tuple
    rmse: float
    pd_rmse: float
    train_residual: float
    n_factorizations: int
    timings: dict
    pd_info: dict

    def to_row(self) -> list:
        return [self.function, self.spec.n, self.spec.m, self.size, self.rmse, self.pd_rmse,
                self.train_residual, self.n_factorizations]


EMULATION_HEADER = ["function", "n", "m", "size", "rmse", "pd_rmse", "train_residual", "factorizations"]


def emulation_benchmark(function: str, n_target: int = 2000, m: int = 100, q_window: int = None,
                        n_test: int = 200, seed: int = 0, B: int = 10, search_iters: int = 2000,
                        run_baseline: bool = True) -> EmulationReport:
    """RLHD local emulation of a test function against the partitioned baseline.

    The window generator comes from a WD lattice search at size m.  The
    lengthscales are estimated by composite likelihood on B translated
    windows of width ``q_window`` grid cells (default: wide enough to hold
    about 50 points).
    Both arms are scored on the same ``n_test`` uniform test points.
    """
    if function not in EMULATION_FUNCTIONS:
        raise ValidationError(f"emulation functions are {EMULATION_FUNCTIONS}")
    d = get_function(function).d
    timings = {}
    t0 = time.perf_counter()
    v_spec, _ = llhd_optimize(LlhdSearchConfig(m, d, T=search_iters, kind="WD", seed=cell_seed(seed, 0)))
    n = rlhd_size_for(n_target, m, d)
    delta = np.random.default_rng(cell_seed(seed, 1)).integers(0, m, size=d)
    spec = RlhdSpec(n, m, v_spec.v, delta)
    design, index = rlhd_points(spec)
    y = evaluate_function(function, design.points)
    timings["design"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    q = min(window_width_for(50, m, d), n) if q_window is None else int(q_window)
    params = estimate_lengthscales(spec, y, q_window=q, B=B, seed=cell_seed(seed, 2), index=index)
    timings["estimate"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    model = fit_shared_model(spec, y, params, index)
    X = np.random.default_rng(cell_seed(seed, 3)).random((n_test, d))
    truth = evaluate_function(function, X)
    pred = predict_batch(model, X, return_variance=False)
    rmse = float(np.sqrt(np.mean((pred - truth) ** 2)))
    train = predict_batch(model, design.points, return_variance=False)
    residual = float(np.max(np.abs(train - y)))
    timings["fit_predict"] = time.perf_counter() - t0

    pd_rmse, pd_info = math.nan, {}
    if run_baseline:
        t0 = time.perf_counter()
        pd_pred, pd_info = partitioned_baseline(function, design.n, X, cell_seed(seed, 4))
        pd_rmse = float(np.sqrt(np.mean((pd_pred - truth) ** 2)))
        timings["baseline"] = time.perf_counter() - t0
    return EmulationReport(function, spec, design.n, params.theta, rmse, pd_rmse, residual,
                           model.n_factorizations, timings, pd_info)


def emulation_csv(reports, seed: int, config: dict) -> str:
    return format_table(EMULATION_HEADER, [r.to_row() for r in reports], metadata_comment(seed, config))


__all__ = [
    "INTEGRATION_METHODS", "CORRELATION_KINDS", "EMULATION_FUNCTIONS", "FUNCTIONS",
    "integration_benchmark", "integration_design", "IntegrationResult",
    "correlation_study", "CorrelationResult", "random_llhd_spec",
    "emulation_benchmark", "partitioned_baseline", "EmulationReport", "emulation_csv",
    "rlhd_size_for", "cell_seed", "metadata_comment", "tool_version",
]
