"""Good-lattice-point Latin hypercube designs and their fast criteria.

A lattice design L(n, v, delta) has rows frac(i*v/n + delta/n + 1/(2n)) for
i = 0..n-1.  Its pairwise differences only depend on i - j (mod n), which
turns O(n^2 d) criteria into O(n d) sums, and its bivariate projections are
2-D integer lattices whose shortest vector and covering radius follow from a
Gauss-Lagrange reduced basis.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np
from scipy.special import logsumexp

from .design_core import DEFAULT_P, LOG_DOMAIN_MIN_D, CriterionKind, Design
from .errors import ValidationError

FAST_KINDS = (CriterionKind.WS, CriterionKind.WA, CriterionKind.WP, CriterionKind.WD)


def _shift_value(x):
    if isinstance(x, Fraction):
        return int(x) if x.denominator == 1 else x
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, float) and x.is_integer():
        return int(x)
    raise ValidationError(f"shift entries must be integers or Fractions, got {x!r}")


def fold(n: int, g: int) -> int:
    """Representative of {g, n - g} (mod n) in 0..n//2."""
    g %= n
    return min(g, n - g)


@dataclass(frozen=True)
class LatticeSpec:
    """Parameters (n, v, delta) of a lattice design.

    ``delta`` is reduced mod n on construction.  It may hold Fractions, which
    is how the slices of a lattice design are represented.
    """

    n: int
    v: tuple
    delta: tuple = None

    def __post_init__(self):
        n = int(self.n)
        if n < 1:
            raise ValidationError("n must be positive")
        v = tuple(int(g) for g in np.atleast_1d(self.v))
        if not v:
            raise ValidationError("generator must have at least one entry")
        bad = [g for g in v if math.gcd(g, n) != 1]
        if bad:
            raise ValidationError(f"generator entries {bad} are not coprime to n={n}")
        delta = (0,) * len(v) if self.delta is None else tuple(np.atleast_1d(self.delta).tolist())
        if len(delta) != len(v):
            raise ValidationError("v and delta must have the same length")
        delta = tuple(_shift_value(Fraction(_shift_value(s)) % n) for s in delta)
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "v", v)
        object.__setattr__(self, "delta", delta)

    @property
    def d(self) -> int:
        return len(self.v)

    @property
    def integer_shift(self) -> bool:
        return all(isinstance(s, int) for s in self.delta)

    def canonical(self) -> "LatticeSpec":
        """Fold every generator into 1..n//2 (a reflection of the affected columns)."""
        return LatticeSpec(self.n, tuple(fold(self.n, g) for g in self.v), self.delta)

    def to_dict(self) -> dict:
        return {
            "type": "llhd",
            "n": self.n,
            "d": self.d,
            "v": list(self.v),
            "delta": [s if isinstance(s, int) else str(s) for s in self.delta],
        }


@dataclass(frozen=True)
class ReducedBasis:
    """Gauss-Lagrange reduced basis of the lattice {(x, y): y = x*vbar (mod n)}."""

    n: int
    a: tuple
    b: tuple
    iterations: int

    @property
    def norm2_a(self) -> int:
        return self.a[0] ** 2 + self.a[1] ** 2

    @property
    def y(self) -> float:
        return (self.a[0] * self.b[0] + self.a[1] * self.b[1]) / self.norm2_a

    @property
    def z(self) -> float:
        # |b - y a| / |a| = |det(a, b)| / |a|^2, and |det| = n for this lattice
        det = abs(self.a[0] * self.b[1] - self.a[1] * self.b[0])
        return det / self.norm2_a

    @property
    def scale(self) -> float:
        return 1.0 / self.n

    @property
    def separation(self) -> float:
        """Minimum wrap-around distance between points of the 2-D design."""
        return math.sqrt(self.norm2_a) / self.n

    @property
    def fill(self) -> float:
        """Wrap-around fill distance (torus covering radius) of the 2-D design."""
        y, z = abs(self.y), self.z
        return math.sqrt(z * z + (z * z - y + y * y) ** 2) / (2.0 * z) * self.separation


def coprime_residues(n: int) -> np.ndarray:
    """Positive integers below n/2 that are coprime to n, ascending."""
    n = int(n)
    if n < 3:
        raise ValidationError("coprime_residues needs n >= 3")
    cand = np.arange(1, (n + 1) // 2, dtype=np.int64)
    cand = cand[2 * cand < n]
    return cand[np.gcd(cand, n) == 1]


def lattice_keys(spec: LatticeSpec) -> np.ndarray:
    """Integer coordinates (i*v + delta) mod n of an integer-shift lattice design."""
    if not spec.integer_shift:
        raise ValidationError("integer keys need an integer shift")
    i = np.arange(spec.n, dtype=np.int64)[:, None]
    v = np.asarray(spec.v, dtype=np.int64) % spec.n
    return (i * v + np.asarray(spec.delta, dtype=np.int64)) % spec.n


def lattice_points(spec: LatticeSpec) -> Design:
    """Rows frac(i*v/n + delta/n + 1/(2n)), i = 0..n-1, in index order."""
    n = spec.n
    prov = {"generator": "lattice", **spec.to_dict()}
    if spec.integer_shift:
        pts = (lattice_keys(spec) + 0.5) / n
        return Design(pts, prov, is_lhd=True)
    i = np.arange(n, dtype=np.int64)[:, None]
    base = (i * (np.asarray(spec.v, dtype=np.int64) % n)) % n
    offset = np.array([float((Fraction(s) + Fraction(1, 2)) % n) for s in spec.delta])
    pts = np.mod((base + offset) / n, 1.0)
    return Design(pts, prov)


def _check_generator(n: int, v) -> tuple:
    v = tuple(int(g) for g in np.atleast_1d(v))
    bad = [g for g in v if math.gcd(g, n) != 1]
    if bad:
        raise ValidationError(f"generator entries {bad} are not coprime to n={n}")
    return v


def _difference_wraps(n: int, v, include_zero: bool = False) -> np.ndarray:
    """Integer wrap distances min(r, n - r) of i*v mod n for i = 1..n-1 (or 1..n)."""
    top = n + 1 if include_zero else n
    i = np.arange(1, top, dtype=np.int64)[:, None]
    r = (i * (np.asarray(v, dtype=np.int64) % n)) % n
    return np.minimum(r, n - r)


def lattice_criterion(spec: LatticeSpec, kind, p: float = DEFAULT_P) -> float:
    """WS, WA, WP or WD of a lattice design in O(n d) operations.

    Pairs of rows (i, j) only enter through the difference class i - j mod n,
    each class occurring n times among ordered pairs.  WS2 and WF2 are
    forwarded to :func:`ws2_fast` and :func:`wf2_fast`.  The shift is never
    read, so the value is exactly shift-invariant.
    """
    kind = CriterionKind.parse(kind)
    n, v = spec.n, spec.v
    d = len(v)
    if kind is CriterionKind.WS2:
        return ws2_fast(n, v)
    if kind is CriterionKind.WF2:
        return wf2_fast(n, v)
    if kind not in FAST_KINDS:
        raise ValidationError(f"no lattice shortcut for {kind.value}")
    if kind is CriterionKind.WD:
        u = _difference_wraps(n, v, include_zero=True) / n
        f = 1.5 - u * (1.0 - u)
        if d < LOG_DOMAIN_MIN_D:
            sq = float(np.sum(np.prod(f, axis=1))) / n - (4.0 / 3.0) ** d
            return math.sqrt(max(sq, 0.0))
        ratio = float(np.sum(np.exp(np.sum(np.log(0.75 * f), axis=1)))) / n - 1.0
        return 0.0 if ratio <= 0.0 else math.exp(0.5 * (d * math.log(4.0 / 3.0) + math.log(ratio)))
    if n < 2:
        raise ValidationError(f"{kind.value} needs n >= 2")
    wi = _difference_wraps(n, v)
    if kind is CriterionKind.WS:
        # the largest reciprocal distance, i.e. the reciprocal of the smallest one
        s2 = int(np.min(np.sum(wi * wi, axis=1)))
        return n / math.sqrt(s2)
    w = wi / n
    if kind is CriterionKind.WA:
        s = np.sum(w * w, axis=1)
        return math.exp((math.log(n / 2.0) + logsumexp(-0.5 * p * np.log(s))) / p)
    if d < LOG_DOMAIN_MIN_D:
        total = float(np.sum(np.prod(w ** -2.0, axis=1)))
        return (total / (n - 1)) ** (1.0 / d)
    return math.exp((logsumexp(-2.0 * np.sum(np.log(w), axis=1)) - math.log(n - 1)) / d)


def canonical_2d(n: int, v: Sequence[int]) -> int:
    """Second generator vbar with L(n, v, .) = L(n, (1, vbar), .), i.e. v2 / v1 mod n."""
    v1, v2 = (int(g) for g in v)
    if math.gcd(v1, n) != 1 or math.gcd(v2, n) != 1:
        raise ValidationError(f"generator {tuple(v)} is not coprime to n={n}")
    if n == 1:
        return 0
    return (v2 * pow(v1, -1, n)) % n


def _round_half_to_zero(num: int, den: int) -> int:
    """round(num / den) for den > 0 with ties broken toward zero."""
    q = (2 * abs(num) + den - 1) // (2 * den)
    return q if num >= 0 else -q


def gaussian_reduce(n: int, v: Sequence[int]) -> ReducedBasis:
    """Gauss-Lagrange reduction of the basis {(1, vbar), (0, n)}.

    Exact integer arithmetic throughout.  On return ``a`` is a shortest
    nonzero vector of the lattice, so |a| / n is the separation distance of
    the 2-D lattice design generated by ``v``.
    """
    n = int(n)
    if n < 2:
        raise ValidationError("gaussian_reduce needs n >= 2")
    vbar = canonical_2d(n, v)
    a0, a1 = 1, vbar
    b0, b1 = 0, n
    na = a0 * a0 + a1 * a1
    k = _round_half_to_zero(a0 * b0 + a1 * b1, na)
    b0, b1 = b0 - k * a0, b1 - k * a1
    nb = b0 * b0 + b1 * b1
    iterations = 1
    while nb < na:
        a0, a1, b0, b1 = b0, b1, a0, a1
        na, nb = nb, na
        k = _round_half_to_zero(a0 * b0 + a1 * b1, na)
        b0, b1 = b0 - k * a0, b1 - k * a1
        nb = b0 * b0 + b1 * b1
        iterations += 1
    return ReducedBasis(n, (a0, a1), (b0, b1), iterations)


def _pair_term(n: int, vk: int, vl: int, kind: CriterionKind) -> float:
    basis = gaussian_reduce(n, (vk, vl))
    if kind is CriterionKind.WS2:
        return n / math.sqrt(basis.norm2_a)
    return basis.fill


def _bivariate_terms(n: int, v, kind: CriterionKind) -> np.ndarray:
    d = len(v)
    terms = np.zeros((d, d))
    for k, l in itertools.combinations(range(d), 2):
        terms[k, l] = terms[l, k] = _pair_term(n, v[k], v[l], kind)
    return terms


def _upper_sum(terms: np.ndarray) -> float:
    return math.fsum(terms[np.triu_indices(terms.shape[0], 1)])


def _bivariate(n: int, v, kind: CriterionKind) -> float:
    n = int(n)
    v = _check_generator(n, v)
    if len(v) < 2:
        raise ValidationError(f"{kind.value} needs d >= 2")
    return _upper_sum(_bivariate_terms(n, v, kind))


def ws2_fast(n: int, v: Sequence[int]) -> float:
    """Sum over column pairs of the wrap separation criterion, O(d^2 log n)."""
    return _bivariate(n, v, CriterionKind.WS2)


def wf2_fast(n: int, v: Sequence[int]) -> float:
    """Sum over column pairs of the wrap fill distance, O(d^2 log n)."""
    return _bivariate(n, v, CriterionKind.WF2)


class BivariateCache:
    """Per-pair WS2 or WF2 terms of a generator, for single-entry updates.

    Replacing one generator entry only touches the d - 1 pairs that contain
    it, so an update costs O(d log n).  Totals are exactly rounded sums of
    the cached terms and therefore agree bitwise with :func:`ws2_fast` /
    :func:`wf2_fast`.
    """

    def __init__(self, n: int, v: Sequence[int], kind="WS2"):
        self.kind = CriterionKind.parse(kind)
        if self.kind not in (CriterionKind.WS2, CriterionKind.WF2):
            raise ValidationError("BivariateCache supports WS2 and WF2")
        self.n = int(n)
        self.v = list(_check_generator(self.n, v))
        if len(self.v) < 2:
            raise ValidationError(f"{self.kind.value} needs d >= 2")
        self.terms = _bivariate_terms(self.n, self.v, self.kind)
        self.value = _upper_sum(self.terms)
        self._pending = None

    def propose(self, k: int, new_vk: int) -> float:
        """Criterion value with entry k replaced; call :meth:`accept` to keep it."""
        n = self.n
        new_vk = int(new_vk)
        if math.gcd(new_vk, n) != 1:
            raise ValidationError(f"{new_vk} is not coprime to n={n}")
        fk = fold(n, new_vk)
        if any(fold(n, g) == fk for l, g in enumerate(self.v) if l != k):
            raise ValidationError(f"{new_vk} duplicates another generator entry")
        row = np.array([
            0.0 if l == k else _pair_term(n, new_vk, g, self.kind)
            for l, g in enumerate(self.v)
        ])
        terms = self.terms.copy()
        terms[k, :] = row
        terms[:, k] = row
        value = _upper_sum(terms)
        self._pending = (k, new_vk, terms, value)
        return value

    def accept(self) -> None:
        if self._pending is None:
            raise RuntimeError("no pending proposal")
        k, new_vk, self.terms, self.value = self._pending
        self.v[k] = new_vk
        self._pending = None


def ws2_update(n: int, v: Sequence[int], k: int, new_vk: int, cache: BivariateCache) -> float:
    """WS2 after replacing v[k] by new_vk, reusing the cached pair terms."""
    if cache.kind is not CriterionKind.WS2 or cache.n != n or list(v) != cache.v:
        raise ValidationError("cache does not describe (n, v) for WS2")
    return cache.propose(k, new_vk)


def wf2_update(n: int, v: Sequence[int], k: int, new_vk: int, cache: BivariateCache) -> float:
    """WF2 after replacing v[k] by new_vk, reusing the cached pair terms."""
    if cache.kind is not CriterionKind.WF2 or cache.n != n or list(v) != cache.v:
        raise ValidationError("cache does not describe (n, v) for WF2")
    return cache.propose(k, new_vk)


def slice_extract(spec: LatticeSpec, s: int, j: int) -> LatticeSpec:
    """Slice j of a lattice design: the rows whose index is j mod s.

    The slice is itself a lattice design with n/s points and the same
    generator; its shift is (j*v + delta)/s + 1/(2s) - 1/2, which is in
    general fractional.
    """
    n = spec.n
    s, j = int(s), int(j)
    if s < 1 or n % s:
        raise ValidationError(f"s={s} does not divide n={n}")
    if not 0 <= j < s:
        raise ValidationError(f"slice index must lie in 0..{s - 1}")
    shift = tuple(
        Fraction(j * g, 1) / s + Fraction(dl) / s + Fraction(1, 2 * s) - Fraction(1, 2)
        for g, dl in zip(spec.v, spec.delta)
    )
    return LatticeSpec(n // s, spec.v, shift)
