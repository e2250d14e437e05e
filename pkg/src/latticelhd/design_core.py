"""Point sets in the unit cube, wrap-around geometry and definitional criteria.

Every criterion here is evaluated from its definition over all pairs of
points (O(n^2 d)); the lattice shortcuts elsewhere in the package are checked
against these functions.  All criteria are lower-is-better.
"""
from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass, field
from typing import Any, Iterator

import numpy as np
from scipy.spatial import cKDTree
from scipy.special import logsumexp

from .errors import CapabilityError, ValidationError

LHD_TOL = 1e-12
# products over d coordinates switch to log accumulation above this dimension
LOG_DOMAIN_MIN_D = 21
DEFAULT_P = 50
_MAX_PAIRS_PER_BLOCK = 1 << 20


class CriterionKind(str, enum.Enum):
    WS = "WS"
    WA = "WA"
    WP = "WP"
    WD = "WD"
    RS = "RS"
    AS = "AS"
    WS2 = "WS2"
    RS2 = "RS2"
    WF2 = "WF2"

    @classmethod
    def parse(cls, kind: "str | CriterionKind") -> "CriterionKind":
        if isinstance(kind, cls):
            return kind
        try:
            return cls(str(kind).upper())
        except ValueError:
            raise ValidationError(f"unknown criterion {kind!r}") from None

    @property
    def is_bivariate(self) -> bool:
        return self in (CriterionKind.WS2, CriterionKind.RS2, CriterionKind.WF2)


@dataclass(frozen=True)
class Design:
    """An n x d point set in [0, 1]^d.

    ``is_lhd=True`` certifies that every column is a permutation of the
    stratum centers (2i - 1) / (2n); the certificate is checked on creation.
    """

    points: np.ndarray
    provenance: dict[str, Any] = field(default_factory=dict)
    is_lhd: bool = False

    def __post_init__(self):
        pts = np.array(self.points, dtype=np.float64, ndmin=2)
        if pts.ndim != 2:
            raise ValidationError("points must be a 2-D array")
        if not np.all(np.isfinite(pts)):
            raise ValidationError("points must be finite")
        if pts.size and (pts.min() < 0.0 or pts.max() > 1.0):
            raise ValidationError("coordinates must lie in [0, 1]")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        if self.is_lhd and not validate_lhd(self):
            raise ValidationError("design flagged is_lhd is not a Latin hypercube")

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]

    def project(self, cols) -> "Design":
        return Design(self.points[:, list(cols)], dict(self.provenance), self.is_lhd)


def _as_points(design) -> np.ndarray:
    if isinstance(design, Design):
        return design.points
    pts = np.array(design, dtype=np.float64, ndmin=2)
    if pts.ndim == 2 and pts.shape[0] == 1 and np.asarray(design).ndim == 1:
        # a bare 1-D sequence is read as n points in one dimension
        pts = pts.T
    if not np.all(np.isfinite(pts)):
        raise ValidationError("points must be finite")
    if pts.size and (pts.min() < 0.0 or pts.max() > 1.0):
        raise ValidationError("coordinates must lie in [0, 1]")
    return pts


def wrap_dist_1d(z):
    """Distance from ``z`` to the nearest integer, elementwise."""
    z = np.asarray(z, dtype=np.float64)
    out = np.abs(z - np.round(z))
    return float(out) if out.ndim == 0 else out


def wrap_dist(z) -> float:
    """Wrap-around (toroidal) norm of a difference vector."""
    return float(np.sqrt(np.sum(wrap_dist_1d(np.atleast_1d(z)) ** 2)))


def validate_lhd(design, tol: float = LHD_TOL) -> bool:
    pts = _as_points(design)
    n = pts.shape[0]
    if n == 0:
        return False
    centers = (2.0 * np.arange(1, n + 1) - 1.0) / (2.0 * n)
    cols = np.sort(pts, axis=0)
    return bool(np.all(np.abs(cols - centers[:, None]) <= tol))


def _pair_blocks(n: int) -> Iterator[tuple[np.ndarray, np.ndarray]]:
    """Yield (I, J) index arrays covering i < j in a fixed order."""
    if n * (n - 1) // 2 <= _MAX_PAIRS_PER_BLOCK:
        yield np.triu_indices(n, 1)
        return
    rows_per_block = max(1, _MAX_PAIRS_PER_BLOCK // max(n, 1))
    for start in range(0, n - 1, rows_per_block):
        stop = min(n - 1, start + rows_per_block)
        I, J = [], []
        for i in range(start, stop):
            J.append(np.arange(i + 1, n))
            I.append(np.full(n - i - 1, i))
        yield np.concatenate(I), np.concatenate(J)


def _pair_diffs(pts: np.ndarray, wrap: bool) -> Iterator[np.ndarray]:
    for I, J in _pair_blocks(pts.shape[0]):
        diff = pts[I] - pts[J]
        yield wrap_dist_1d(diff) if wrap else np.abs(diff)


def _separation(pts, wrap):
    best = np.inf
    for diff in _pair_diffs(pts, wrap):
        best = min(best, float(np.min(np.sum(diff * diff, axis=1))))
    if best == 0.0:
        return np.inf
    return 1.0 / np.sqrt(best)


def _approx_separation(pts, wrap, p):
    chunks = []
    for diff in _pair_diffs(pts, wrap):
        s = np.sum(diff * diff, axis=1)
        if np.any(s == 0.0):
            return np.inf
        chunks.append(logsumexp(-0.5 * p * np.log(s)))
    return float(np.exp(logsumexp(chunks) / p))


def _projective(pts, d):
    n = pts.shape[0]
    npairs = n * (n - 1) / 2.0
    if d < LOG_DOMAIN_MIN_D:
        total = 0.0
        for diff in _pair_diffs(pts, True):
            if np.any(diff == 0.0):
                return np.inf
            total += float(np.sum(np.prod(diff ** -2.0, axis=1)))
        return (total / npairs) ** (1.0 / d)
    chunks = []
    for diff in _pair_diffs(pts, True):
        if np.any(diff == 0.0):
            return np.inf
        chunks.append(logsumexp(-2.0 * np.sum(np.log(diff), axis=1)))
    return float(np.exp((logsumexp(chunks) - np.log(npairs)) / d))


def _wd_factor(u):
    # 1.25 + w(u + 1/2)^2 for u in [-1, 1]
    u = np.abs(u)
    return 1.5 - u * (1.0 - u)


def _discrepancy(pts, d):
    n = pts.shape[0]
    if d < LOG_DOMAIN_MIN_D:
        off = 0.0
        for I, J in _pair_blocks(n):
            off += float(np.sum(np.prod(_wd_factor(pts[I] - pts[J]), axis=1)))
        sq = (n * 1.5 ** d + 2.0 * off) / n ** 2 - (4.0 / 3.0) ** d
        return float(np.sqrt(max(sq, 0.0)))
    # normalise each factor by 4/3 so the products stay near 1
    scale = np.log(0.75)
    off = 0.0
    for I, J in _pair_blocks(n):
        logs = np.sum(np.log(_wd_factor(pts[I] - pts[J])) + scale, axis=1)
        off += float(np.sum(np.exp(logs)))
    ratio = (n * np.exp(d * (np.log(1.5) + scale)) + 2.0 * off) / n ** 2 - 1.0
    if ratio <= 0.0:
        return 0.0
    return float(np.exp(0.5 * (d * np.log(4.0 / 3.0) + np.log(ratio))))


def _base_criterion(pts, kind, p):
    d = pts.shape[1]
    if kind is CriterionKind.WS:
        return _separation(pts, True)
    if kind is CriterionKind.RS:
        return _separation(pts, False)
    if kind is CriterionKind.WA:
        return _approx_separation(pts, True, p)
    if kind is CriterionKind.AS:
        return _approx_separation(pts, False, p)
    if kind is CriterionKind.WP:
        return _projective(pts, d)
    if kind is CriterionKind.WD:
        return _discrepancy(pts, d)
    raise ValidationError(f"{kind} is not a base criterion")


def criterion_full(design, kind, p: float = DEFAULT_P, resolution: int = 256) -> float:
    """Evaluate a space-filling criterion from its pairwise definition.

    Parameters
    ----------
    design : Design or array_like, shape (n, d)
    kind : str or CriterionKind
        One of WS, WA, WP, WD, RS, AS, WS2, RS2, WF2.
    p : float
        Exponent of the approximate separation criteria (WA, AS).
    resolution : int
        Grid resolution passed to :func:`fill_distance_grid` for WF2.

    Returns
    -------
    float
        Criterion value; ``inf`` when coincident points make it unbounded.
    """
    kind = CriterionKind.parse(kind)
    pts = _as_points(design)
    n, d = pts.shape
    if kind is CriterionKind.WD:
        if n < 1:
            raise ValidationError("WD needs at least one point")
    elif n < 2:
        raise ValidationError(f"{kind.value} needs at least two points")
    if not kind.is_bivariate:
        return _base_criterion(pts, kind, p)
    if d < 2:
        raise ValidationError(f"{kind.value} needs d >= 2")
    total = 0.0
    for k, l in itertools.combinations(range(d), 2):
        proj = pts[:, [k, l]]
        if kind is CriterionKind.WF2:
            total += fill_distance_grid(proj, resolution, wrap=True)
        else:
            base = CriterionKind.WS if kind is CriterionKind.WS2 else CriterionKind.RS
            total += _base_criterion(proj, base, p)
    return total


def fill_distance_grid(design, resolution: int, wrap: bool) -> float:
    """Grid estimate of the fill distance (covering radius) of a design.

    The supremum over the cube is replaced by a maximum over the grid
    {0, 1/resolution, ..., 1}^d (on the torus the last node is dropped as
    it coincides with 0), so the result undershoots the true value by at
    most ``sqrt(d) / (2 * resolution)``.
    """
    pts = _as_points(design)
    d = pts.shape[1]
    if d > 3:
        raise CapabilityError("grid fill distance is limited to d <= 3")
    if resolution < 16:
        raise ValidationError("resolution must be at least 16")
    axis = np.arange(resolution + (0 if wrap else 1)) / resolution
    if wrap:
        tree = cKDTree(np.mod(pts, 1.0), boxsize=1.0)
    else:
        tree = cKDTree(pts)
    worst = 0.0
    # slab over the first axis to bound memory for d = 3
    for x0 in np.array_split(axis, max(1, len(axis) ** d // 2_000_000)):
        grids = np.meshgrid(x0, *([axis] * (d - 1)), indexing="ij")
        query = np.stack([g.ravel() for g in grids], axis=1)
        dist, _ = tree.query(query, k=1)
        worst = max(worst, float(dist.max()))
    return worst
