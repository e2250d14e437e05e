"""Stochastic design search.

* :func:`random_lhd` - random Latin hypercube.
* :func:`sa_optimize_lhd` - simulated annealing over column swaps, with
  O(n d) criterion updates per swap (:class:`SwapState`).
* :func:`llhd_optimize` - restart neighbourhood search over lattice
  generators, one generator entry changed per step.
* :func:`korobov_search` - exhaustive search over power generators.
* :func:`sliced_objective` - criterion of a design plus that of its first slice.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .design_core import (
    DEFAULT_P,
    LOG_DOMAIN_MIN_D,
    CriterionKind,
    Design,
    _as_points,
    criterion_full,
    wrap_dist_1d,
)
from .errors import ValidationError
from .lattice_designs import (
    BivariateCache,
    LatticeSpec,
    coprime_residues,
    lattice_criterion,
    _pair_term,
    _upper_sum,
    lattice_points,
    slice_extract,
    wf2_fast,
    ws2_fast,
)

SWAP_KINDS = (
    CriterionKind.WS, CriterionKind.WA, CriterionKind.WP,
    CriterionKind.WD, CriterionKind.RS, CriterionKind.AS,
)
LLHD_KINDS = (
    CriterionKind.WS, CriterionKind.WA, CriterionKind.WP,
    CriterionKind.WD, CriterionKind.WS2, CriterionKind.WF2,
)


def _stream(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=key))


def random_lhd(n: int, d: int, seed=None) -> Design:
    """Random Latin hypercube: independent uniform permutations per column."""
    if n < 1 or d < 1:
        raise ValidationError("n and d must be positive")
    rng = np.random.default_rng(seed)
    perms = rng.permuted(np.tile(np.arange(n), (d, 1)), axis=1).T
    return Design((perms + 0.5) / n, {"generator": "lhd", "seed": seed}, is_lhd=True)


class _PairTree:
    """Segment tree (sum or min) over the n*n pair slots of a design.

    Internal nodes are always recomputed from their children, so the root
    only depends on the current leaves and never accumulates update drift.
    """

    def __init__(self, leaves: np.ndarray, op: str):
        self.op = np.minimum if op == "min" else np.add
        self.empty = np.inf if op == "min" else 0.0
        size = 1
        while size < leaves.size:
            size *= 2
        self.size = size
        tree = np.full(2 * size, self.empty)
        tree[size:size + leaves.size] = leaves
        lo = size
        while lo > 1:
            idx = np.arange(lo // 2, lo)
            tree[idx] = self.op(tree[2 * idx], tree[2 * idx + 1])
            lo //= 2
        self.tree = tree

    @property
    def root(self) -> float:
        return float(self.tree[1])

    def update(self, idx: np.ndarray, values: np.ndarray) -> None:
        tree = self.tree
        tree[self.size + idx] = values
        pos = np.unique((self.size + idx) // 2)
        while True:
            tree[pos] = self.op(tree[2 * pos], tree[2 * pos + 1])
            if pos[0] == 1:
                break
            pos = np.unique(pos // 2)


class SwapState:
    """Criterion of a design under repeated column-entry swaps.

    Keeps one leaf per pair of rows (squared distance for WS/RS, the pair's
    contribution for WA/AS/WP/WD) in a segment tree.  Swapping entries
    (i, k) and (j, k) recomputes the 2n - 3 leaves touching rows i and j,
    O(n d) work, and refreshes the tree in O(n log n) additions.
    """

    def __init__(self, design, kind, p: float = DEFAULT_P):
        self.kind = CriterionKind.parse(kind)
        if self.kind not in SWAP_KINDS:
            raise ValidationError(f"swap updates are not available for {self.kind.value}")
        self.points = np.array(_as_points(design), dtype=np.float64)
        self.n, self.d = self.points.shape
        if self.n < 2:
            raise ValidationError("swap state needs at least two points")
        self.p = float(p)
        self.wrap = self.kind not in (CriterionKind.RS, CriterionKind.AS)
        self.offset = 0.0
        n = self.n
        I, J = np.triu_indices(n, 1)
        leaves = np.full(n * n, np.inf if self._is_min else 0.0)
        raw = self._raw(self.points[I] - self.points[J])
        if self.kind in (CriterionKind.WA, CriterionKind.AS, CriterionKind.WP):
            finite = raw[np.isfinite(raw)]
            self.offset = float(finite.max()) if finite.size else 0.0
        leaves[I * n + J] = self._leaf(raw)
        self.tree = _PairTree(leaves, "min" if self._is_min else "sum")
        self.value = self._evaluate()

    @property
    def _is_min(self) -> bool:
        return self.kind in (CriterionKind.WS, CriterionKind.RS)

    def _raw(self, diff: np.ndarray) -> np.ndarray:
        # per-pair quantity before scaling: squared distance, or a log-term
        w = wrap_dist_1d(diff) if self.wrap else np.abs(diff)
        if self.kind in (CriterionKind.WS, CriterionKind.RS):
            return np.sum(w * w, axis=1)
        if self.kind in (CriterionKind.WA, CriterionKind.AS):
            with np.errstate(divide="ignore"):
                return -0.5 * self.p * np.log(np.sum(w * w, axis=1))
        if self.kind is CriterionKind.WP:
            with np.errstate(divide="ignore"):
                return -2.0 * np.sum(np.log(w), axis=1)
        f = 1.5 - w * (1.0 - w)
        if self.d < LOG_DOMAIN_MIN_D:
            return np.prod(f, axis=1)
        return np.exp(np.sum(np.log(0.75 * f), axis=1))

    def _leaf(self, raw: np.ndarray) -> np.ndarray:
        if self.kind in (CriterionKind.WA, CriterionKind.AS, CriterionKind.WP):
            return np.exp(raw - self.offset)
        return raw

    def _evaluate(self) -> float:
        root = self.tree.root
        n, d = self.n, self.d
        if self.kind in (CriterionKind.WS, CriterionKind.RS):
            return math.inf if root == 0.0 else 1.0 / math.sqrt(root)
        if self.kind in (CriterionKind.WA, CriterionKind.AS):
            if not math.isfinite(root):
                return math.inf
            return math.exp((math.log(root) + self.offset) / self.p)
        if self.kind is CriterionKind.WP:
            if not math.isfinite(root):
                return math.inf
            return math.exp((math.log(root) + self.offset - math.log(n * (n - 1) / 2.0)) / d)
        if d < LOG_DOMAIN_MIN_D:
            sq = (n * 1.5 ** d + 2.0 * root) / n ** 2 - (4.0 / 3.0) ** d
            return math.sqrt(max(sq, 0.0))
        ratio = (n * 1.125 ** d + 2.0 * root) / n ** 2 - 1.0
        return 0.0 if ratio <= 0.0 else math.exp(0.5 * (d * math.log(4.0 / 3.0) + math.log(ratio)))

    def _row_update(self, i: int, j: int) -> None:
        n = self.n
        all_rows = np.arange(n)
        others_i = all_rows[all_rows != i]
        others_j = all_rows[(all_rows != i) & (all_rows != j)]
        idx, vals = [], []
        for row, others in ((i, others_i), (j, others_j)):
            raw = self._raw(self.points[row] - self.points[others])
            idx.append(np.minimum(others, row) * n + np.maximum(others, row))
            vals.append(self._leaf(raw))
        self.tree.update(np.concatenate(idx), np.concatenate(vals))

    def swap(self, i: int, j: int, k: int) -> float:
        """Swap entries (i, k) and (j, k) in place and return the new criterion."""
        if i == j:
            return self.value
        pts = self.points
        pts[i, k], pts[j, k] = pts[j, k], pts[i, k]
        self._row_update(i, j)
        self.value = self._evaluate()
        return self.value

    def design(self) -> Design:
        return Design(self.points.copy())


def criterion_swap_delta(state: SwapState, i: int, j: int, k: int) -> float:
    """Apply the swap of entries (i, k) and (j, k) to ``state``; return the new criterion.

    Swapping the same pair again restores the previous state exactly.
    """
    return state.swap(i, j, k)


@dataclass
class SaConfig:
    n: int
    d: int
    T: int = 2000
    cool: float = 0.95
    r: float = 10.0
    kind: str = "WD"
    seed: int = 0
    p: float = DEFAULT_P
    auto_temp: bool = False

    def __post_init__(self):
        if not 0.0 < self.cool < 1.0:
            raise ValidationError("cool must lie in (0, 1)")
        if self.r <= 0.0:
            raise ValidationError("initial temperature must be positive")
        if self.T < 0:
            raise ValidationError("T must be non-negative")
        self.kind = CriterionKind.parse(self.kind)


def _auto_temperature(state: SwapState, rng: np.random.Generator, trials: int = 50) -> float:
    vals = []
    for _ in range(trials):
        k = int(rng.integers(state.d))
        i = int(rng.integers(state.n))
        j = int(rng.integers(state.n - 1))
        j += j >= i
        vals.append(state.swap(i, j, k))
        state.swap(i, j, k)
    vals = np.asarray(vals)
    spread = float(np.std(vals[np.isfinite(vals)])) if np.isfinite(vals).any() else 0.0
    return spread if spread > 0.0 else 1.0


def sa_optimize_lhd(
    config: SaConfig,
    callback: Optional[Callable[[int, float], None]] = None,
    stride: int = 100,
) -> Design:
    """Simulated annealing over column swaps, returning the best design seen.

    A swap that raises the criterion by delta is accepted with probability
    exp(-delta / (cool**t * r)).  ``callback(t, best)`` is called every
    ``stride`` iterations and at the end.
    """
    cfg = config
    initial = random_lhd(cfg.n, cfg.d, cfg.seed)
    if cfg.n < 2 or cfg.T == 0:
        value = criterion_full(initial, cfg.kind, cfg.p) if cfg.n >= 2 else math.nan
        return Design(initial.points, {**initial.provenance, "generator": "olhd",
                                       "criterion": cfg.kind.value, "value": value}, is_lhd=True)
    rng = _stream(cfg.seed, 1)
    state = SwapState(initial, cfg.kind, cfg.p)
    r = _auto_temperature(state, rng) if cfg.auto_temp else cfg.r
    current = state.value
    best, best_pts = current, state.points.copy()
    n, d = cfg.n, cfg.d
    for t in range(1, cfg.T + 1):
        k = int(rng.integers(d))
        i = int(rng.integers(n))
        j = int(rng.integers(n - 1))
        j += j >= i
        trial = state.swap(i, j, k)
        u = rng.random()
        if trial < best:
            best, best_pts = trial, state.points.copy()
        if trial <= current:
            current = trial
        else:
            temp = cfg.cool ** t * r
            if temp > 0.0 and u < math.exp(-(trial - current) / temp):
                current = trial
            else:
                state.swap(i, j, k)
        if callback is not None and (t % stride == 0 or t == cfg.T):
            callback(t, best)
    prov = {"generator": "olhd", "seed": cfg.seed, "criterion": cfg.kind.value,
            "value": best, "iterations": cfg.T, "temperature": r}
    return Design(best_pts, prov, is_lhd=True)


class _LatticeObjective:
    """Criterion of L(n, v) (optionally plus its first slice) with single-entry proposals."""

    def __init__(self, n: int, kind: CriterionKind, p: float = DEFAULT_P, slices: int = 1):
        self.n, self.kind, self.p, self.slices = n, kind, p, slices
        self.bivariate = kind in (CriterionKind.WS2, CriterionKind.WF2)
        self._caches = None
        self._pending = None

    def _sizes(self):
        return (self.n,) if self.slices == 1 else (self.n, self.n // self.slices)

    def _plain(self, v) -> float:
        return sum(_lattice_value(m, v, self.kind, self.p) for m in self._sizes())

    def reset(self, v) -> float:
        if self.bivariate:
            self._caches = [BivariateCache(m, v, self.kind) for m in self._sizes()]
            return math.fsum(c.value for c in self._caches)
        return self._plain(v)

    def propose(self, v, k: int, new: int) -> float:
        if self.bivariate:
            vals = [self._caches[0].propose(k, new)]
            for cache in self._caches[1:]:
                vals.append(_propose_unchecked(cache, k, new))
            return math.fsum(vals)
        trial = list(v)
        trial[k] = new
        return self._plain(trial)

    def accept(self) -> None:
        if self.bivariate:
            for cache in self._caches:
                cache.accept()


def _propose_unchecked(cache: BivariateCache, k: int, new: int) -> float:
    # slices of size n/s may fold distinct generators together; no distinctness check there
    row = np.array([0.0 if l == k else _pair_term(cache.n, new, g, cache.kind)
                    for l, g in enumerate(cache.v)])
    terms = cache.terms.copy()
    terms[k, :] = row
    terms[:, k] = row
    value = _upper_sum(terms)
    cache._pending = (k, new, terms, value)
    return value


def _lattice_value(n: int, v, kind: CriterionKind, p: float) -> float:
    if kind is CriterionKind.WS2:
        return ws2_fast(n, v)
    if kind is CriterionKind.WF2:
        return wf2_fast(n, v)
    return lattice_criterion(LatticeSpec(n, tuple(v)), kind, p)


@dataclass
class LlhdSearchConfig:
    n: int
    d: int
    T: int = 2000
    Q: Optional[int] = None
    kind: str = "WD"
    seed: int = 0
    slices: int = 1
    p: float = DEFAULT_P

    def __post_init__(self):
        if self.n < 3:
            raise ValidationError("llhd search needs n >= 3")
        if self.d < 1 or self.T < 0:
            raise ValidationError("d must be positive and T non-negative")
        self.kind = CriterionKind.parse(self.kind)
        if self.kind not in LLHD_KINDS:
            raise ValidationError(f"{self.kind.value} is not supported by the lattice search")
        if self.slices < 1 or self.n % self.slices:
            raise ValidationError(f"slices={self.slices} does not divide n={self.n}")
        if self.Q is not None and self.Q < 1:
            raise ValidationError("Q must be at least 1")


def _sample_excluding(P: np.ndarray, current, rng: np.random.Generator) -> Optional[int]:
    taken = set(current)
    free = len(P) - len(taken)
    if free <= 0:
        return None
    if len(P) >= 4 * len(taken):
        while True:
            g = int(P[rng.integers(len(P))])
            if g not in taken:
                return g
    cand = np.setdiff1d(P, np.fromiter(taken, dtype=np.int64))
    return int(cand[rng.integers(len(cand))])


def llhd_restart(n: int, P: np.ndarray, d: int, iters: int, objective: _LatticeObjective,
                 rng: np.random.Generator) -> tuple[float, list]:
    """One random start of the generator neighbourhood search; returns (value, v)."""
    v = [int(g) for g in rng.choice(P, size=d, replace=False)]
    c = objective.reset(v)
    for _ in range(iters):
        k = int(rng.integers(d))
        new = _sample_excluding(P, v, rng)
        if new is None:
            break
        trial = objective.propose(v, k, new)
        if trial <= c:
            objective.accept()
            v[k] = new
            c = trial
    return c, v


def default_restarts(T: int, n: int, d: int) -> int:
    return max(T // (5 * len(coprime_residues(n)) * max(d, 1)), 1)


def llhd_optimize(config: LlhdSearchConfig, callback: Optional[Callable[[int, float], None]] = None):
    """Optimize the generator of a lattice design; returns (LatticeSpec, Design).

    The shift is drawn once from the seed's main stream; restart q uses its
    own stream derived from (seed, q), so restarts are independent of the
    order they run in.  When d exceeds p(n) = |P(n)|, only the
    d - floor(d/p) * p leading columns are optimized and floor(d/p) copies of
    P(n) are appended as further generator blocks.
    """
    cfg = config
    n, d = cfg.n, cfg.d
    P = coprime_residues(n)
    p_n = len(P)
    blocks = d // p_n if d > p_n else 0
    d_opt = d - blocks * p_n
    rng = _stream(cfg.seed)
    delta = tuple(int(x) for x in rng.integers(0, n, size=d))

    Q = cfg.Q if cfg.Q is not None else default_restarts(cfg.T, n, max(d_opt, 1))
    iters = cfg.T // Q
    objective = _LatticeObjective(n, cfg.kind, cfg.p, cfg.slices)
    searchable = d_opt >= (2 if objective.bivariate else 1)
    best_c, best_v, best_q = math.inf, None, -1
    if d_opt == 0:
        best_v = []
    elif not searchable:
        best_v = [int(g) for g in _stream(cfg.seed, 0).choice(P, size=d_opt, replace=False)]
    else:
        for q in range(Q):
            c, v = llhd_restart(n, P, d_opt, iters, objective, _stream(cfg.seed, q))
            if c < best_c or best_v is None:
                best_c, best_v, best_q = c, v, q
            if callback is not None:
                callback((q + 1) * iters, best_c)

    v_full = tuple(best_v) + tuple(int(g) for g in P) * blocks
    spec = LatticeSpec(n, v_full, delta)
    design = lattice_points(spec)
    prov = {
        **design.provenance,
        "generator": "llhd",
        "seed": cfg.seed,
        "criterion": cfg.kind.value,
        "search_value": best_c,
        "restarts": Q,
        "best_restart": best_q,
        "optimized_columns": d_opt,
        "supplement_blocks": blocks,
    }
    if cfg.slices > 1:
        prov["slices"] = cfg.slices
    return spec, Design(design.points, prov, is_lhd=True)


def korobov_search(n: int, d: int, kind="WD", p: float = DEFAULT_P, delta=None):
    """Best power generator (1, g, g^2, ...) mod n over all g coprime to n.

    Ties go to the smallest g.  Returns (LatticeSpec, Design).
    """
    if n < 3:
        raise ValidationError("korobov search needs n >= 3")
    kind = CriterionKind.parse(kind)
    best = (math.inf, None)
    for g in range(1, n):
        if math.gcd(g, n) != 1:
            continue
        v = tuple(pow(g, e, n) for e in range(d))
        c = _lattice_value(n, v, kind, p)
        if c < best[0]:
            best = (c, g)
    c, g = best
    v = tuple(pow(g, e, n) for e in range(d))
    spec = LatticeSpec(n, v, delta)
    design = lattice_points(spec)
    prov = {**design.provenance, "generator": "plhd", "g": g, "criterion": kind.value, "value": c}
    return spec, Design(design.points, prov, is_lhd=spec.integer_shift)


def sliced_objective(spec: LatticeSpec, s: int, kind, p: float = DEFAULT_P) -> float:
    """Criterion of the full lattice design plus that of its slice 0."""
    kind = CriterionKind.parse(kind)
    first = slice_extract(spec, s, 0)
    return _lattice_value(spec.n, spec.v, kind, p) + _lattice_value(first.n, first.v, kind, p)
