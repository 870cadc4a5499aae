"""Brute-force references used only by the tests.

Everything here enumerates explicitly and solves LPs with scipy's HiGHS, so
it shares no code path with the package's own simplex or pricing.
"""

from __future__ import annotations

import itertools

import numpy as np
from scipy.optimize import linprog

from outreach.model import make_instance


def integral_allocations(inst, t):
    """All integral allocations with at most ``t`` positive entries."""
    caps = np.floor(np.asarray(inst.u) + 1e-9).astype(int)
    out = []
    for k in range(1, t + 1):
        for sup in itertools.combinations(range(inst.n), k):
            for vals in itertools.product(*[range(1, caps[i] + 1) for i in sup]):
                if sum(vals) == inst.letters:
                    a = np.zeros(inst.n)
                    a[list(sup)] = vals
                    out.append(a)
    return out


def lp_feasible(inst, t) -> bool:
    """Fair distribution over the enumerated integral ``A_t`` exists."""
    cols = integral_allocations(inst, t)
    if not cols:
        return False
    m = np.array(cols).T
    a_eq = np.vstack([np.ones(len(cols)), m])
    b_eq = np.concatenate([[1.0], inst.fair_share])
    res = linprog(np.zeros(len(cols)), A_eq=a_eq, b_eq=b_eq, bounds=(0, None), method="highs")
    return res.status == 0


def min_t(inst) -> int:
    for t in range(1, inst.n + 1):
        if lp_feasible(inst, t):
            return t
    raise AssertionError("no feasible t")


def best_weighted(inst, t, w) -> float:
    return max((float(a @ w) for a in integral_allocations(inst, t)), default=-np.inf)


def phi_oracle(a, tau) -> float:
    total = 0.0
    for ai, ti in zip(a, tau):
        if ai > 1e-9:
            total += abs(ti - ai) / ti
    return total


def proportional_vertices(inst, t, tau):
    """Candidate extreme points of deviation over fractional ``t``-bounded allocations.

    On a fixed support the deviation is linear between the breakpoints
    ``tau_i`` and ``u_i``, so extreme points have every coordinate but one at a
    breakpoint, with the free one fixed by the letter total.
    """
    u = np.asarray(inst.u, dtype=float)
    pts = []
    for k in range(1, t + 1):
        for sup in itertools.combinations(range(inst.n), k):
            for free in sup:
                rest = [i for i in sup if i != free]
                for choice in itertools.product(*[(tau[i], u[i]) for i in rest]):
                    a = np.zeros(inst.n)
                    a[rest] = choice
                    a[free] = inst.letters - sum(choice)
                    if 1e-9 < a[free] <= u[free] + 1e-9:
                        pts.append(a)
    return pts


def proportional_optimum(inst, t, tau) -> float:
    pts = proportional_vertices(inst, t, tau)
    m = np.array(pts).T
    cost = np.array([phi_oracle(a, tau) for a in pts])
    a_eq = np.vstack([np.ones(len(pts)), m])
    b_eq = np.concatenate([[1.0], inst.fair_share])
    res = linprog(cost, A_eq=a_eq, b_eq=b_eq, bounds=(0, None), method="highs")
    assert res.status == 0, res.message
    return float(res.fun)


def random_instance(rng, n_max=8, letters_max=30, n_min=2, letters_min=2, monotone_caps=False):
    """Random roster with integral caps covering each fair share (caps <= letters).

    Sorting the caps keeps them above the (sorted) fair shares.
    """
    n = int(rng.integers(n_min, n_max + 1))
    letters = int(rng.integers(letters_min, letters_max + 1))
    pops = np.sort(rng.integers(1, 100, n)).astype(float)
    fair = pops / pops.sum() * letters
    caps = np.minimum(letters, np.ceil(fair - 1e-9) + rng.integers(0, letters + 1, n))
    caps = np.maximum(caps, np.ceil(fair - 1e-9))
    if monotone_caps:
        caps = np.sort(caps)
    return make_instance(pops, caps, letters)
