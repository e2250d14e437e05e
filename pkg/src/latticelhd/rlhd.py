"""Regularly repeated lattice designs.

R(n, m, v, delta) is the set of points (c + 1/2) / n of [0, 1]^d whose
integer coordinates c in {0..n-1}^d satisfy c = i*v + delta (mod m) for one
residue i.  Every box of width m/n aligned to the 1/n grid holds an m-point
Latin hypercube, and boxes whose corners differ by an element of the
translation lattice {z*m + i*v} hold identical configurations.

All membership arithmetic is done on the integer coordinates.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .design_core import Design
from .errors import ValidationError

DEFAULT_SIZE_CAP = 10_000_000
_GRID_TOL = 1e-9


@dataclass(frozen=True)
class RlhdSpec:
    """Parameters (n, m, v, delta); delta is reduced mod m, which leaves the design unchanged."""

    n: int
    m: int
    v: tuple
    delta: tuple = None

    def __post_init__(self):
        n, m = int(self.n), int(self.m)
        if not 1 < m <= n:
            raise ValidationError(f"need 1 < m <= n, got m={m}, n={n}")
        v = tuple(int(g) for g in np.atleast_1d(self.v))
        bad = [g for g in v if math.gcd(g, m) != 1]
        if bad:
            raise ValidationError(f"generator entries {bad} are not coprime to m={m}")
        delta = (0,) * len(v) if self.delta is None else tuple(int(s) for s in np.atleast_1d(self.delta))
        if len(delta) != len(v):
            raise ValidationError("v and delta must have the same length")
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "m", m)
        object.__setattr__(self, "v", v)
        object.__setattr__(self, "delta", tuple(s % m for s in delta))

    @property
    def d(self) -> int:
        return len(self.v)

    def to_dict(self) -> dict:
        return {"type": "rlhd", "n": self.n, "m": self.m, "d": self.d,
                "v": list(self.v), "delta": list(self.delta)}


def _offsets(spec: RlhdSpec, with_shift: bool = True) -> np.ndarray:
    """(m, d) array of (i*v + delta) mod m for residues i = 0..m-1."""
    i = np.arange(spec.m, dtype=np.int64)[:, None]
    shift = np.asarray(spec.delta, dtype=np.int64) if with_shift else 0
    return (i * np.asarray(spec.v, dtype=np.int64) + shift) % spec.m


def relative_sites(spec: RlhdSpec) -> np.ndarray:
    """Integer offsets (r*v + delta) mod m of the m points of the window at corner 0."""
    return _offsets(spec)


def expected_size(n: int, m: int, d: int) -> float:
    """Average size n^d / m^(d-1) of R(n, m, v, delta) over uniform shifts."""
    return n ** d / m ** (d - 1)


def rlhd_size(spec: RlhdSpec) -> int:
    """Exact number of points, without enumerating them."""
    counts = (spec.n - 1 - _offsets(spec)) // spec.m + 1
    return int(sum(math.prod(int(c) for c in row) for row in counts))


def iter_rlhd_keys(spec: RlhdSpec) -> Iterator[np.ndarray]:
    """Integer coordinates of the design, one block per residue, in (i, z) order."""
    n, m = spec.n, spec.m
    for row in _offsets(spec):
        axes = [np.arange(o, n, m, dtype=np.int64) for o in row]
        grids = np.meshgrid(*axes, indexing="ij")
        yield np.stack([g.ravel() for g in grids], axis=1)


class PointIndex:
    """Lookup from integer coordinates round(x*n - 1/2) to row numbers."""

    def __init__(self, keys: np.ndarray, n: int):
        self.keys = np.asarray(keys, dtype=np.int64)
        self.n = n
        d = self.keys.shape[1]
        self._packed = d * math.log2(max(n, 2)) < 62
        if self._packed:
            codes = self._encode(self.keys)
            self._order = np.argsort(codes, kind="stable")
            self._sorted = codes[self._order]
            if np.any(np.diff(self._sorted) == 0):
                raise ValidationError("duplicate design points")
        else:
            self._map = {tuple(k): r for r, k in enumerate(self.keys.tolist())}
            if len(self._map) != len(self.keys):
                raise ValidationError("duplicate design points")

    def __len__(self) -> int:
        return len(self.keys)

    def _encode(self, keys: np.ndarray) -> np.ndarray:
        weights = self.n ** np.arange(keys.shape[1], dtype=np.int64)
        return keys @ weights

    def lookup(self, keys) -> np.ndarray:
        """Row numbers of the given integer keys; KeyError names the first missing key."""
        keys = np.atleast_2d(np.asarray(keys, dtype=np.int64))
        if self._packed:
            codes = self._encode(keys)
            pos = np.searchsorted(self._sorted, codes)
            pos_c = np.minimum(pos, len(self._sorted) - 1)
            hit = self._sorted[pos_c] == codes
            if not hit.all():
                raise KeyError(tuple(keys[np.argmin(hit)].tolist()))
            return self._order[pos_c]
        rows = []
        for k in keys.tolist():
            try:
                rows.append(self._map[tuple(k)])
            except KeyError:
                raise KeyError(tuple(k)) from None
        return np.asarray(rows, dtype=np.int64)

    def __getitem__(self, key) -> int:
        return int(self.lookup([key])[0])

    def __contains__(self, key) -> bool:
        try:
            self.lookup([key])
        except KeyError:
            return False
        return True


def rlhd_points(spec: RlhdSpec, cap: int = DEFAULT_SIZE_CAP) -> tuple[Design, PointIndex]:
    """Enumerate the design (rows ordered by residue, then grid position) and index it."""
    projected = expected_size(spec.n, spec.m, spec.d)
    if projected > cap:
        raise ValidationError(
            f"projected RLHD size {projected:.4g} exceeds the cap of {cap}; "
            "use iter_rlhd_keys to stream it")
    keys = np.concatenate(list(iter_rlhd_keys(spec)), axis=0)
    design = Design((keys + 0.5) / spec.n, {"generator": "rlhd", **spec.to_dict()})
    return design, PointIndex(keys, spec.n)


def to_grid(l, n: int) -> np.ndarray:
    """Integer grid coordinates of a vector on the 1/n grid."""
    scaled = np.asarray(l, dtype=np.float64) * n
    ints = np.round(scaled)
    if np.any(np.abs(scaled - ints) > _GRID_TOL):
        raise ValidationError(f"{l} is not on the 1/n grid (n={n})")
    return ints.astype(np.int64)


def box_keys(spec: RlhdSpec, lo, width: int) -> np.ndarray:
    """Integer keys of the design points inside the box [lo, lo + width)^d (integer units)."""
    lo = np.asarray(lo, dtype=np.int64)
    n, m = spec.n, spec.m
    blocks = []
    for row in _offsets(spec):
        first = lo + (row - lo) % m
        stop = np.minimum(lo + width, n)
        axes = [np.arange(f, s, m, dtype=np.int64) for f, s in zip(first, stop)]
        if any(len(a) == 0 for a in axes):
            continue
        grids = np.meshgrid(*axes, indexing="ij")
        blocks.append(np.stack([g.ravel() for g in grids], axis=1))
    if not blocks:
        return np.zeros((0, spec.d), dtype=np.int64)
    return np.concatenate(blocks, axis=0)


def window_keys(spec: RlhdSpec, corner) -> np.ndarray:
    """Integer keys of the m points in the width-m window at an integer corner.

    Row i holds the point of residue i: corner + ((i*v + delta - corner) mod m).
    """
    L = np.asarray(corner, dtype=np.int64)
    if np.any(L < 0) or np.any(L > spec.n - spec.m):
        raise ValidationError(f"corner {L.tolist()} leaves the unit cube")
    return L + (_offsets(spec) - L) % spec.m


def local_window(spec: RlhdSpec, l) -> Design:
    """The m design points inside prod_k [l_k, l_k + m/n], built from the closed form.

    Equals L(m, v, delta - l*n) * (m/n) + l, an m-point Latin hypercube of
    the window; no global enumeration is needed.
    """
    keys = window_keys(spec, to_grid(l, spec.n))
    return Design((keys + 0.5) / spec.n, {"generator": "rlhd-window", "corner": list(np.asarray(l, float))})


def translate_member_int(dL, spec: RlhdSpec) -> bool:
    dL = np.asarray(dL, dtype=np.int64)
    v = np.asarray(spec.v, dtype=np.int64)
    m = spec.m
    i = (int(dL[0]) * pow(int(v[0]), -1, m)) % m
    return bool(np.all((dL - i * v) % m == 0))


def translate_member(dl, spec: RlhdSpec) -> bool:
    """Whether a grid vector lies in the translation lattice {z*m/n + i*v/n}."""
    return translate_member_int(to_grid(dl, spec.n), spec)


def nearest_corners(X, spec: RlhdSpec, contain: bool = False) -> np.ndarray:
    """Integer corners in the translation lattice whose window center is nearest each query.

    For a fixed residue i the per-axis problems decouple, so each axis is
    solved by clamped rounding and the best residue is kept (first on
    ties).  With ``contain=True`` only windows that contain the query are
    considered, falling back to the unrestricted choice when none exists.
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    n, m = spec.n, spec.m
    o = _offsets(spec, with_shift=False).astype(np.float64)          # (m, d)
    zmax = np.floor((n - m - o) / m)                                  # (m, d)
    out = np.empty(X.shape, dtype=np.int64)
    chunk = max(1, 2_000_000 // (m * spec.d))
    for s in range(0, len(X), chunk):
        xs = X[s:s + chunk, None, :] * n                              # (N, 1, d)
        target = (xs - 0.5 * m - o) / m
        corners, dist = _clamped(target, o, xs, m, np.zeros_like(zmax), zmax)
        if contain:
            lo = np.maximum(np.ceil((xs - m - o) / m), 0.0)
            hi = np.minimum(np.floor((xs - o) / m), zmax)
            c2, d2 = _clamped(target, o, xs, m, lo, hi)
            found = np.isfinite(d2).any(axis=1)
            corners[found], dist[found] = c2[found], d2[found]
        best = np.argmin(dist, axis=1)
        out[s:s + chunk] = corners[np.arange(len(best)), best].astype(np.int64)
    return out


def _clamped(target, o, xs, m, lo, hi):
    ok = np.all(lo <= hi, axis=-1)
    z = np.clip(np.round(target), lo, hi)
    corners = o + m * z
    dist = np.sum((corners + 0.5 * m - xs) ** 2, axis=-1)
    dist = np.where(ok, dist, np.inf)
    return corners, dist


def nearest_window_corner(x, spec: RlhdSpec, contain: bool = False) -> np.ndarray:
    """Corner (torus units) of the translation-lattice window centered nearest to x."""
    return nearest_corners([x], spec, contain)[0] / spec.n
