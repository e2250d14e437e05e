"""Local Gaussian-process emulation on a regularly repeated lattice design.

Every prediction window is a translate of the window at corner 0, so a
single m x m correlation matrix (and a single Cholesky factorization) serves
all local models.  Predictions use ordinary kriging (constant mean estimated
by generalized least squares) with an anisotropic Gaussian correlation.
"""
from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve
from scipy.optimize import minimize

from .errors import NumericalError, ValidationError
from .rlhd import PointIndex, RlhdSpec, box_keys, nearest_corners, relative_sites, rlhd_points

log = logging.getLogger(__name__)

MAX_NUGGET = 1e-4
# grid-unit tolerance for recognising a query as a training site
_SITE_TOL = 1e-7


@dataclass(frozen=True)
class GpHyperParams:
    theta: tuple
    eta: float = 1e-8

    def __post_init__(self):
        theta = tuple(float(t) for t in np.atleast_1d(self.theta))
        if not all(t > 0 and math.isfinite(t) for t in theta):
            raise ValidationError(f"lengthscales must be positive, got {theta}")
        if self.eta < 0:
            raise ValidationError("nugget must be non-negative")
        object.__setattr__(self, "theta", theta)


def corr_matrix(points, params: GpHyperParams, other=None) -> np.ndarray:
    """Gaussian correlation exp(-sum_k (h_k / theta_k)^2).

    Without ``other`` this is the k x k matrix of ``points`` with the nugget
    added to the diagonal; with ``other`` it is the nugget-free
    cross-correlation between the two point sets.
    """
    a = np.atleast_2d(np.asarray(points, dtype=np.float64)) / np.asarray(params.theta)
    b = a if other is None else np.atleast_2d(np.asarray(other, dtype=np.float64)) / np.asarray(params.theta)
    sq = np.sum((a[:, None, :] - b[None, :, :]) ** 2, axis=-1)
    R = np.exp(-sq)
    if other is None:
        R[np.diag_indices_from(R)] += params.eta
    return R


def factorize(points, params: GpHyperParams):
    """Cholesky factor of the correlation matrix, doubling the nugget on failure.

    Returns (factor, nugget actually used).
    """
    eta = params.eta
    R0 = corr_matrix(points, GpHyperParams(params.theta, 0.0))
    while True:
        R = R0.copy()
        R[np.diag_indices_from(R)] += eta
        try:
            return cho_factor(R, lower=True, check_finite=False), eta
        except LinAlgError:
            nxt = max(2.0 * eta, 1e-8)
            if nxt > MAX_NUGGET:
                raise NumericalError(
                    f"correlation matrix not positive definite with nugget {eta:.3g} "
                    f"(condition estimate {np.linalg.cond(R):.3g})") from None
            warnings.warn(f"raising nugget from {eta:.3g} to {nxt:.3g}", RuntimeWarning, stacklevel=2)
            eta = nxt


@dataclass(frozen=True, eq=False)
class LocalGpModel:
    spec: RlhdSpec
    params: GpHyperParams
    sites: np.ndarray          # (m, d) window-relative training sites, torus units
    site_offsets: np.ndarray   # (m, d) integer offsets of the sites from the corner
    factor: tuple
    eta: float
    outputs: np.ndarray
    index: PointIndex
    ones_solve: np.ndarray
    ones_quad: float
    n_factorizations: int = 1
    info: dict = field(default_factory=dict)


def fit_shared_model(spec: RlhdSpec, outputs, params: GpHyperParams, index: PointIndex = None) -> LocalGpModel:
    """Fit the shared local model: one factorization of the m x m correlation matrix.

    ``outputs`` is aligned with the rows of :func:`rlhd_points` (or with
    ``index`` when given).  NaN outputs are reported by integer key.
    """
    if index is None:
        _, index = rlhd_points(spec)
    y = np.asarray(outputs, dtype=np.float64).ravel()
    if len(y) != len(index):
        raise ValidationError(f"expected {len(index)} outputs, got {len(y)}")
    missing = np.flatnonzero(~np.isfinite(y))
    if missing.size:
        raise ValidationError(f"missing output for design point {tuple(index.keys[missing[0]].tolist())}")
    if len(params.theta) != spec.d:
        raise ValidationError(f"need {spec.d} lengthscales, got {len(params.theta)}")
    offsets = relative_sites(spec)
    sites = (offsets + 0.5) / spec.n
    factor, eta = factorize(sites, params)
    ones_solve = cho_solve(factor, np.ones(spec.m), check_finite=False)
    y = y.copy()
    y.setflags(write=False)
    return LocalGpModel(spec, params, sites, offsets, factor, eta, y, index,
                        ones_solve, float(ones_solve.sum()))


def window_outputs(model: LocalGpModel, corners: np.ndarray) -> np.ndarray:
    """(m, W) outputs of the windows at the given integer corners, rows in site order."""
    keys = corners[:, None, :] + model.site_offsets[None, :, :]
    rows = model.index.lookup(keys.reshape(-1, model.spec.d))
    return model.outputs[rows].reshape(len(corners), model.spec.m).T


def predict_batch(model: LocalGpModel, X, return_variance: bool = True):
    """Kriging mean (and variance) at each row of X using its nearest window.

    Windows are chosen among translation-lattice corners, preferring ones
    that contain the query.
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    spec = model.spec
    corners = nearest_corners(X, spec, contain=True)
    uniq, inv = np.unique(corners, axis=0, return_inverse=True)
    inv = inv.ravel()
    Y = window_outputs(model, uniq)                                   # (m, W)
    beta = (model.ones_solve @ Y) / model.ones_quad                   # (W,)
    resid = Y - beta
    alpha = cho_solve(model.factor, resid, check_finite=False)        # (m, W)
    u = X - corners / spec.n
    r = corr_matrix(u, model.params, model.sites)                    # (N, m)
    # the nugget is numerical jitter, not noise: a query on a training site
    # sees it too, which makes the predictor interpolate exactly
    grid = u * spec.n - 0.5
    on_site = np.all(np.abs(grid[:, None, :] - model.site_offsets[None, :, :]) < _SITE_TOL, axis=-1)
    r[on_site] += model.eta
    mean = beta[inv] + np.einsum("ij,ji->i", r, alpha[:, inv])
    if not return_variance:
        return mean
    sigma2 = np.sum(resid * alpha, axis=0) / spec.m                   # (W,)
    rs = cho_solve(model.factor, r.T, check_finite=False)             # (m, N)
    quad = np.einsum("ij,ji->i", r, rs)
    g = 1.0 - model.ones_solve @ r.T
    var = sigma2[inv] * (1.0 - quad + g * g / model.ones_quad)
    if np.any(var < -1e-10 * np.maximum(sigma2[inv], 1.0)):
        log.debug("negative kriging variance clipped to zero")
    return mean, np.maximum(var, 0.0)


def predict(model: LocalGpModel, x):
    """Kriging (mean, variance) at a single point."""
    mean, var = predict_batch(model, np.asarray(x, dtype=np.float64)[None, :])
    return float(mean[0]), float(var[0])


def draw_translate_corners(spec: RlhdSpec, width: int, B: int, rng: np.random.Generator) -> np.ndarray:
    """B random integer corners of the translation lattice with the width-`width` box inside the cube."""
    n, m = spec.n, spec.m
    v = np.asarray(spec.v, dtype=np.int64)
    out = []
    while len(out) < B:
        i = int(rng.integers(m))
        o = (i * v) % m
        zmax = (n - width - o) // m
        if np.any(zmax < 0):
            continue
        out.append(o + m * rng.integers(0, zmax + 1))
    return np.array(out, dtype=np.int64)


def composite_windows(spec: RlhdSpec, q_window: int, B: int, seed, max_redraws: int = 20):
    """Keys of B translated width-q windows used for lengthscale estimation.

    Returns (relative offsets (k, d), keys (B, k, d)); rows of every window
    are ordered identically by their offset from the corner.
    """
    q = int(q_window)
    if not 1 <= q <= spec.n:
        raise ValidationError(f"window width must lie in 1..n, got {q}")
    if B < 1:
        raise ValidationError("need at least one window")
    rng = np.random.default_rng(seed)
    for _ in range(max_redraws + 1):
        corners = draw_translate_corners(spec, q, B, rng)
        windows = []
        for L in corners:
            keys = box_keys(spec, L, q)
            rel = keys - L
            order = np.lexsort(rel.T[::-1])
            windows.append((rel[order], keys[order]))
        if len(windows[0][0]) >= 3:
            break
    else:
        raise ValidationError(f"windows of width {q} hold fewer than 3 points")
    rel = windows[0][0]
    for other, _ in windows[1:]:
        if other.shape != rel.shape or np.any(other != rel):
            raise NumericalError("translated windows differ in configuration")
    return rel, np.stack([k for _, k in windows])


def composite_nll(log_theta, sites: np.ndarray, Y: np.ndarray, eta: float) -> float:
    """Negative profile composite log-likelihood of B windows sharing one configuration.

    Each window has its own GLS mean; the process variance is pooled.
    """
    theta = np.exp(np.asarray(log_theta, dtype=np.float64))
    R = corr_matrix(sites, GpHyperParams(tuple(theta), eta))
    try:
        c, low = cho_factor(R, lower=True, check_finite=False)
    except LinAlgError:
        return 1e100
    k, B = Y.shape
    logdet = 2.0 * np.sum(np.log(np.diag(c)))
    ones = cho_solve((c, low), np.ones(k), check_finite=False)
    beta = (ones @ Y) / ones.sum()
    resid = Y - beta
    quad = np.sum(resid * cho_solve((c, low), resid, check_finite=False))
    sigma2 = quad / (B * k)
    if not sigma2 > 0:
        return 1e100
    return 0.5 * (B * k * math.log(sigma2) + B * logdet)


def estimate_lengthscales(spec: RlhdSpec, outputs, q_window: int = 50, B: int = 10, seed=0,
                          index: PointIndex = None, eta: float = 1e-8, maxfev: int = 200,
                          return_info: bool = False):
    """Composite-likelihood lengthscales from B translated windows of width q_window/n.

    All windows share one configuration, so each objective evaluation
    factorizes a single matrix.  Nelder-Mead over log-lengthscales starts
    at half the window width m/(2n).  The initial simplex is that point plus
    one vertex per axis two orders of magnitude below it; the first
    reflections then probe the same distance above.
    """
    if index is None:
        _, index = rlhd_points(spec)
    y = np.asarray(outputs, dtype=np.float64).ravel()
    rel, keys = composite_windows(spec, q_window, B, seed)
    rows = index.lookup(keys.reshape(-1, spec.d))
    Y = y[rows].reshape(B, len(rel)).T
    sites = (rel + 0.5) / spec.n
    d = spec.d
    x0 = np.full(d, math.log(spec.m / (2.0 * spec.n)))
    step = math.log(100.0)
    simplex = np.vstack([x0] + [x0 - step * np.eye(d)[k] for k in range(d)])
    trace = []

    def record(xk):
        trace.append(composite_nll(xk, sites, Y, eta))

    res = minimize(composite_nll, x0, args=(sites, Y, eta), method="Nelder-Mead",
                   callback=record,
                   options={"maxfev": maxfev, "initial_simplex": simplex,
                            "xatol": 1e-4, "fatol": 1e-8})
    params = GpHyperParams(tuple(np.exp(res.x)), eta)
    if return_info:
        return params, {"trace": trace, "nfev": res.nfev, "nll": float(res.fun),
                        "window_points": len(rel), "keys": keys}
    return params
