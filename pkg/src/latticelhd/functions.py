"""Benchmark integrands and emulation targets.

Inputs are points of [0, 1]^d, mapped affinely onto each function's native
domain.  Constants follow the usual published defaults:

=============  ==  ==========================  ===============================================
name           d   native domain               definition
=============  ==  ==========================  ===============================================
prpeak         3   [0, 1]^d                    Genz product peak, a_k = 5, u_k = 1/2
gfunction      5   [0, 1]^d                    Sobol' G-function, a_k = (k - 2) / 2, k = 1..d
borehole       8   VLSE input ranges           water flow through a borehole
oscil          12  [0, 1]^d                    Genz oscillatory, u_1 = 1/2, a_k = 9/d
ackley         3   [-2, 2]^d                   Ackley, a = 20, b = 0.2, c = 2 pi
shekel         4   [0, 10]^d                   Shekel with the standard 10 maxima
michalewicz    6   [0, pi]^d                   Michalewicz, steepness 10
=============  ==  ==========================  ===============================================

The Genz constants give each family a total difficulty sum(a_k) of 15
(product peak) and 9 (oscillatory).  The Ackley domain is a smaller box than the usual
[-32.768, 32.768]^d so that a few thousand runs resolve it.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Optional

import numpy as np

from .errors import ValidationError

BOREHOLE_LOWER = np.array([0.05, 100.0, 63070.0, 990.0, 63.1, 700.0, 1120.0, 9855.0])
BOREHOLE_UPPER = np.array([0.15, 50000.0, 115600.0, 1110.0, 116.0, 820.0, 1680.0, 12045.0])

SHEKEL_BETA = 0.1 * np.array([1, 2, 2, 4, 4, 6, 3, 7, 5, 5], dtype=float)
SHEKEL_C = np.array([
    [4.0, 1.0, 8.0, 6.0, 3.0, 2.0, 5.0, 8.0, 6.0, 7.0],
    [4.0, 1.0, 8.0, 6.0, 7.0, 9.0, 3.0, 1.0, 2.0, 3.6],
    [4.0, 1.0, 8.0, 6.0, 3.0, 2.0, 5.0, 8.0, 6.0, 7.0],
    [4.0, 1.0, 8.0, 6.0, 7.0, 9.0, 3.0, 1.0, 2.0, 3.6],
])

# randomly shifted rank-1 lattice for reference means; g picked by shift-to-shift spread at n = 2**20
REFERENCE_LATTICE_N = 1 << 20
REFERENCE_LATTICE_G = 653777
REFERENCE_SEED = 20240601


def _prpeak(x):
    a, u = 5.0, 0.5
    return np.prod(1.0 / (a ** -2 + (x - u) ** 2), axis=1)


def _prpeak_mean(d):
    a, u = 5.0, 0.5
    return (a * (math.atan(a * (1 - u)) + math.atan(a * u))) ** d


def _g_coeffs(d):
    return (np.arange(1, d + 1) - 2.0) / 2.0


def _gfunction(x):
    a = _g_coeffs(x.shape[1])
    return np.prod((np.abs(4.0 * x - 2.0) + a) / (1.0 + a), axis=1)


def _borehole(x):
    z = BOREHOLE_LOWER + x * (BOREHOLE_UPPER - BOREHOLE_LOWER)
    rw, r, Tu, Hu, Tl, Hl, L, Kw = z.T
    lnr = np.log(r / rw)
    return 2.0 * np.pi * Tu * (Hu - Hl) / (lnr * (1.0 + 2.0 * L * Tu / (lnr * rw ** 2 * Kw) + Tu / Tl))


def _oscil_coeffs(d):
    return np.full(d, 9.0 / d)


def _oscil(x):
    a = _oscil_coeffs(x.shape[1])
    return np.cos(2.0 * np.pi * 0.5 + x @ a)


def _oscil_mean(d):
    a = _oscil_coeffs(d)
    val = np.exp(1j * 2.0 * np.pi * 0.5) * np.prod((np.exp(1j * a) - 1.0) / (1j * a))
    return float(val.real)


def _ackley(x):
    z = -2.0 + 4.0 * x
    d = z.shape[1]
    return (-20.0 * np.exp(-0.2 * np.sqrt(np.sum(z * z, axis=1) / d))
            - np.exp(np.sum(np.cos(2.0 * np.pi * z), axis=1) / d) + 20.0 + math.e)


def _shekel(x):
    z = 10.0 * x
    sq = np.sum((z[:, :, None] - SHEKEL_C[None, :, :]) ** 2, axis=1)
    return -np.sum(1.0 / (sq + SHEKEL_BETA), axis=1)


def _michalewicz(x):
    z = np.pi * x
    i = np.arange(1, z.shape[1] + 1)
    return -np.sum(np.sin(z) * np.sin(i * z * z / np.pi) ** 20, axis=1)


@dataclass(frozen=True)
class TestFunction:
    __test__ = False  # not a pytest class

    name: str
    d: int
    fn: Callable[[np.ndarray], np.ndarray]
    analytic_mean: Optional[Callable[[int], float]] = None

    def __call__(self, x) -> np.ndarray:
        return evaluate_function(self.name, x)


FUNCTIONS = {
    "prpeak": TestFunction("prpeak", 3, _prpeak, _prpeak_mean),
    "gfunction": TestFunction("gfunction", 5, _gfunction, lambda d: 1.0),
    "borehole": TestFunction("borehole", 8, _borehole),
    "oscil": TestFunction("oscil", 12, _oscil, _oscil_mean),
    "ackley": TestFunction("ackley", 3, _ackley),
    "shekel": TestFunction("shekel", 4, _shekel),
    "michalewicz": TestFunction("michalewicz", 6, _michalewicz),
}


def get_function(name: str) -> TestFunction:
    try:
        return FUNCTIONS[name]
    except KeyError:
        raise ValidationError(f"unknown test function {name!r}; known: {sorted(FUNCTIONS)}") from None


def evaluate_function(name: str, x) -> np.ndarray:
    """Evaluate a named function at points of the unit cube (rows of x)."""
    f = get_function(name)
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if x.shape[1] != f.d:
        raise ValidationError(f"{name} takes d={f.d} inputs, got {x.shape[1]}")
    if x.size and (x.min() < 0.0 or x.max() > 1.0):
        raise ValidationError("inputs must lie in the unit cube")
    return f.fn(x)


@lru_cache(maxsize=None)
def reference_mean(name: str) -> tuple[float, str]:
    """Mean of the function over the unit cube and a note on where it came from.

    Analytic where available; otherwise a randomly shifted 2**20-point
    rank-1 lattice rule with a fixed Korobov generator and seed.
    """
    f = get_function(name)
    if f.analytic_mean is not None:
        return float(f.analytic_mean(f.d)), "analytic"
    n, g = REFERENCE_LATTICE_N, REFERENCE_LATTICE_G
    gen = np.array([pow(g, k, n) for k in range(f.d)], dtype=np.int64)
    shift = np.random.default_rng(REFERENCE_SEED).random(f.d)
    total = 0.0
    step = 1 << 16
    for start in range(0, n, step):
        i = np.arange(start, start + step, dtype=np.int64)[:, None]
        x = np.mod((i * gen % n) / n + shift, 1.0)
        total += float(np.sum(f.fn(x)))
    return total / n, f"rank-1 lattice n={n} g={g} shift seed={REFERENCE_SEED}"
