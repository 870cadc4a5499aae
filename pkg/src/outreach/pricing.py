"""Pricing oracles for column generation.

Three oracles over ``t``-bounded allocations:

* :func:`price_exact` maximizes ``sum(a_i * y_i)`` over integral allocations
  with a cardinality-constrained knapsack DP.
* :func:`price_relaxed` solves the LP relaxation and rounds its (at most two)
  fractional entries, giving a ``(t + 1)``-bounded allocation at least as
  good as the best ``t``-bounded one.
* :func:`price_proportional` maximizes ``y + sum(a_i * y_i) - deviation(a)``
  by branch-and-bound over supports; for a fixed support the problem is a
  separable concave maximization solved exactly by filling slopes greedily.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import lp as lpmod
from .errors import NodeBudgetExhausted, NonIntegralCaps
from .model import ABS_TOL, ProblemInstance, support

log = logging.getLogger(__name__)

GAP_TOL = 1e-6
NODE_BUDGET = 10**6


@dataclass(frozen=True, eq=False)
class DualPoint:
    """Dual values of a restricted master.

    ``per_city`` are the fairness-row duals (non-negative). ``y`` is the
    convexity-row term: for feasibility pricing a column violates the dual when
    ``sum(a_i * y_i) > y``; for proportional pricing it enters additively,
    ``y + sum(a_i * y_i) - deviation(a) > 0``.
    """

    y: float
    per_city: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "per_city", np.asarray(self.per_city, dtype=float))
        if np.any(self.per_city < -ABS_TOL):
            raise ValueError("per-city duals must be non-negative")


@dataclass(eq=False)
class PricedColumn:
    allocation: np.ndarray
    value: float
    reduced_value: float
    bound_tag: str = "within_t"
    exact: bool = True
    gap: float = 0.0
    nodes: int = 0


def integral_caps(instance: ProblemInstance) -> np.ndarray:
    """Caps as integers, flooring fractional ones (with a warning)."""
    caps = np.asarray(instance.u, dtype=float)
    floored = np.floor(caps + ABS_TOL)
    if np.any(np.abs(caps - floored) > ABS_TOL):
        log.warning("flooring fractional caps for integral pricing")
    return floored.astype(np.int64)


# -- exact knapsack DP ------------------------------------------------------

def price_exact(instance: ProblemInstance, t: int, duals: DualPoint,
                caps: Optional[np.ndarray] = None) -> Optional[PricedColumn]:
    """Best integral ``t``-bounded allocation for weights ``duals.per_city``.

    Cities are ranked by descending weight. In some optimal allocation every
    selected city but the lowest-ranked one is at its cap, so for each
    candidate lowest-ranked city the DP over the higher-ranked prefix picks up
    to ``t - 1`` full cities, and the candidate takes the remainder. The DP
    table over the prefix is shared across candidates, giving
    ``O(n * t * letters)`` time. Returns None when no allocation exists.
    """
    letters = instance.letters
    if letters != int(letters):
        raise NonIntegralCaps("letter count must be integral for exact pricing")
    u = integral_caps(instance) if caps is None else np.asarray(caps, dtype=np.int64)
    w = duals.per_city
    n = instance.n
    order = sorted(range(n), key=lambda i: (-w[i], i))
    slots = t - 1
    neg = -np.inf
    best = np.full((slots + 1, letters + 1), neg)
    best[0, 0] = 0.0
    takes = []
    top_val, top = neg, None
    for p, c in enumerate(order):
        uc = int(min(u[c], letters))
        if uc >= 1:
            # city c as the partially filled one, on top of the prefix table
            r = np.arange(1, uc + 1)
            z = letters - r
            vals = best[:, z] + r * w[c]
            k, idx = np.unravel_index(np.argmax(vals), vals.shape)
            if vals[k, idx] > top_val:
                top_val = float(vals[k, idx])
                top = (p, int(k), int(z[idx]), int(r[idx]))
        take = np.zeros_like(best, dtype=bool)
        if uc >= 1 and slots >= 1:
            cand = np.full_like(best, neg)
            cand[1:, uc:] = best[:-1, : letters + 1 - uc] + uc * w[c]
            take = cand > best
            best = np.where(take, cand, best)
        takes.append(take)
    if top is None:
        return None
    p, k, z, r = top
    a = np.zeros(n, dtype=np.int64)
    a[order[p]] = r
    for q in range(p - 1, -1, -1):
        if k > 0 and takes[q][k, z]:
            c = order[q]
            a[c] = u[c]
            k -= 1
            z -= int(u[c])
    assert z == 0 and k == 0, "DP reconstruction failed"
    value = float(a @ w)
    return PricedColumn(a.astype(float), value, value - duals.y, "within_t")


# -- LP relaxation with rounding -------------------------------------------

def price_relaxed(instance: ProblemInstance, t: int, duals: DualPoint) -> Optional[PricedColumn]:
    """Basic optimum of the relaxation ``max sum(z_i y_i u_i)``, rounded.

    Constraints: ``sum(z_i u_i) = letters``, ``sum(z_i) <= t``, ``0 <= z <= 1``.
    A vertex has at most two fractional ``z``; their letters are rounded, the
    higher-weight city up and the other down. The result is tagged
    ``within_t_plus_1`` when it selects ``t + 1`` cities.
    """
    u = np.asarray(instance.u, dtype=float)
    w = duals.per_city
    n = instance.n
    prog = lpmod.LinearProgram(-(w * u))
    prog.add_row(u, lpmod.EQ, instance.letters)
    prog.add_row(np.ones(n), lpmod.LE, t)
    for i in range(n):
        row = np.zeros(n)
        row[i] = 1.0
        prog.add_row(row, lpmod.LE, 1.0)
    res = lpmod.solve(prog)
    if not res.optimal:
        return None
    z = np.clip(res.primal, 0.0, 1.0)
    a = z * u
    a[np.abs(a) < ABS_TOL] = 0.0
    if np.all(np.abs(u - np.round(u)) <= ABS_TOL):
        frac = [i for i in range(n) if abs(a[i] - round(a[i])) > ABS_TOL]
        if len(frac) == 2:
            hi_i, lo_i = sorted(frac, key=lambda i: (-w[i], i))
            a[hi_i] = math.ceil(a[hi_i])
            a[lo_i] = math.floor(a[lo_i])
        a = np.round(a)
    a = np.minimum(a, u)
    value = float(a @ w)
    tag = "within_t" if len(support(a)) <= t else "within_t_plus_1"
    return PricedColumn(a, value, value - duals.y, tag)


# -- proportionality pricing -----------------------------------------------

def deviation(a, tau, scope: str = "selected_only", tol: float = ABS_TOL) -> float:
    """Total relative deviation from targets: over selected cities, or over all."""
    a = np.asarray(a, dtype=float)
    tau = np.asarray(tau, dtype=float)
    rel = np.abs(a / tau - 1.0)
    if scope == "selected_only":
        return float(math.fsum(rel[a > tol]))
    if scope == "all_cities":
        return float(math.fsum(rel))
    raise ValueError(f"unknown deviation scope {scope!r}")


def best_on_support(sel: Sequence[int], letters: float, weights: np.ndarray, tau: np.ndarray,
                    caps: np.ndarray):
    """Maximize ``sum(w_i a_i - |a_i / tau_i - 1|)`` over ``sel`` with ``sum(a) = letters``.

    Each term is concave piecewise linear with slope ``w_i + 1/tau_i`` up to
    ``tau_i`` and ``w_i - 1/tau_i`` above, so filling the steepest pieces
    first is optimal. Returns ``(a, value)`` or None if the caps cannot hold
    all letters.
    """
    n = len(weights)
    pieces = []
    for i in sel:
        pieces.append((-(weights[i] + 1.0 / tau[i]), i, 0, tau[i]))
        if caps[i] > tau[i]:
            pieces.append((-(weights[i] - 1.0 / tau[i]), i, 1, caps[i] - tau[i]))
    pieces.sort()
    a = np.zeros(n)
    left = float(letters)
    value = -float(len(sel))
    for neg_slope, i, _, length in pieces:
        if left <= 0:
            break
        step = min(length, left)
        a[i] += step
        value += -neg_slope * step
        left -= step
    if left > ABS_TOL * max(1.0, letters):
        return None
    return a, value


@dataclass
class _Search:
    weights: np.ndarray
    tau: np.ndarray
    caps: np.ndarray
    letters: float
    t: int
    bonus: float
    order: list
    node_budget: int
    best_value: float = -math.inf
    best_alloc: Optional[np.ndarray] = None
    nodes: int = 0
    open_bound: float = -math.inf
    exhausted: bool = False
    slopes: np.ndarray = field(default=None)

    def __post_init__(self):
        w, tau = self.weights, self.tau
        self.slopes = np.unique(np.concatenate([w + 1.0 / tau, w - 1.0 / tau]))
        # per city, the concave value is maximized against -lambda * a at 0, tau or the cap
        pts = np.stack([np.zeros_like(tau), tau, self.caps], axis=1)
        gvals = w[:, None] * pts - np.abs(pts / tau[:, None] - 1.0) + self.bonus
        lam = self.slopes[:, None, None]
        h = (gvals[None, :, :] - lam * pts[None, :, :]).max(axis=2)
        self.h = h[:, self.order]
        self.h_pos = np.maximum(self.h, 0.0)
        self.base = self.slopes * self.letters
        caps_ord = self.caps[self.order]
        # for each position, suffix caps sorted descending and accumulated
        self.cap_tops = [np.cumsum(np.sort(caps_ord[p:])[::-1]) for p in range(len(self.order) + 1)]

    def score(self, a: np.ndarray) -> float:
        sel = a > ABS_TOL
        rel = np.abs(a[sel] / self.tau[sel] - 1.0)
        return float(self.weights @ a - rel.sum() + self.bonus * sel.sum())

    def bound(self, chosen_h: np.ndarray, pos: int, slots: int) -> float:
        """Lagrangian upper bound over completions from ``order[pos:]``, minimized over slopes."""
        total = self.base + chosen_h
        rest = self.h_pos[:, pos:]
        m = rest.shape[1]
        if m and slots > 0:
            if slots < m:
                rest = -np.partition(-rest, slots - 1, axis=1)[:, :slots]
            total = total + rest.sum(axis=1)
        return float(total.min())

    def feasible_completion(self, cap_sum: float, pos: int, slots: int) -> bool:
        if cap_sum >= self.letters - ABS_TOL:
            return True
        tops = self.cap_tops[pos]
        if not len(tops) or slots <= 0:
            return False
        return cap_sum + tops[min(slots, len(tops)) - 1] >= self.letters - ABS_TOL

    def visit(self, pos: int, chosen: list, chosen_h: np.ndarray, cap_sum: float, evaluate: bool):
        if self.nodes >= self.node_budget:
            self.exhausted = True
            return
        self.nodes += 1
        if evaluate and cap_sum >= self.letters - ABS_TOL:
            res = best_on_support(chosen, self.letters, self.weights, self.tau, self.caps)
            if res is not None:
                val = self.score(res[0])
                if val > self.best_value:
                    self.best_value, self.best_alloc = val, res[0]
        slots = self.t - len(chosen)
        if pos >= len(self.order) or slots <= 0:
            return
        if not self.feasible_completion(cap_sum, pos, slots):
            return
        ub = self.bound(chosen_h, pos, slots)
        if ub <= self.best_value + GAP_TOL:
            return
        city = self.order[pos]
        self.visit(pos + 1, chosen + [city], chosen_h + self.h[:, pos], cap_sum + self.caps[city], True)
        if self.exhausted:
            self.open_bound = max(self.open_bound, ub)
            return
        self.visit(pos + 1, chosen, chosen_h, cap_sum, False)
        if self.exhausted:
            self.open_bound = max(self.open_bound, ub)


def price_proportional(instance: ProblemInstance, t: int, tau, duals: DualPoint,
                       scope: str = "selected_only", node_budget: int = NODE_BUDGET,
                       strict: bool = False) -> Optional[PricedColumn]:
    """Most violated proportionality column, by branch-and-bound over supports.

    The returned ``value`` is ``y + sum(a_i y_i) - deviation(a)`` under
    ``scope``; a positive value means the column improves the master. When
    the node budget runs out the incumbent is returned with ``exact=False``
    and its remaining gap, or :class:`NodeBudgetExhausted` is raised if
    ``strict`` is set or no incumbent was found.
    """
    tau = np.asarray(getattr(tau, "tau", tau), dtype=float)
    w = duals.per_city
    caps = np.asarray(instance.u, dtype=float)
    if scope == "selected_only":
        bonus, const = 0.0, 0.0
    elif scope == "all_cities":
        bonus, const = 1.0, -float(instance.n)
    else:
        raise ValueError(f"unknown deviation scope {scope!r}")
    solo = np.max(np.stack([w * tau, w * caps - (caps / tau - 1.0)]), axis=0)
    order = sorted(range(instance.n), key=lambda i: (-solo[i], i))
    search = _Search(w, tau, caps, float(instance.letters), t, bonus, order, node_budget)
    search.visit(0, [], np.zeros(len(search.slopes)), 0.0, False)
    if search.best_alloc is None:
        if search.exhausted:
            raise NodeBudgetExhausted(None, math.inf)
        return None
    gap = max(0.0, search.open_bound - search.best_value) if search.exhausted else 0.0
    if search.exhausted and strict:
        raise NodeBudgetExhausted(search.best_alloc, gap)
    log.debug("proportional pricing: %d nodes, gap %.3g", search.nodes, gap)
    a = search.best_alloc
    value = duals.y + const + search.best_value
    return PricedColumn(a, value, value, "within_t", exact=not search.exhausted, gap=gap,
                        nodes=search.nodes)
