"""Column generation over ``t``-bounded allocations.

The restricted master keeps only the allocations generated so far. For
feasibility it minimizes total slack on the fairness rows; a positive optimum
with no improving column means the terminal duals certify that no ex-ante
fair distribution over ``A_t`` exists. For proportionality it minimizes the
expected deviation from target letters.
"""

from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import lp as lpmod
from .buckets import buckets as run_buckets
from .errors import (BucketsFailed, BudgetExceeded, AssumptionViolated, InfeasibleStart,
                     NoFeasibleT, PricingStalled, WidthOutOfRange)
from .greedy import greedy_equal
from .layout import LetterDistribution, make_distribution
from .model import ABS_TOL, ProblemInstance, lower_bound_t, support
from .pricing import DualPoint, deviation, price_exact, price_proportional, price_relaxed
from .targets import TargetProfile, solve_kappa

log = logging.getLogger(__name__)

REDUCED_TOL = 1e-9
PROPORTIONAL_TOL = 1e-6
MAX_COLUMNS = 10**5


@dataclass
class MasterState:
    """Columns of a restricted master plus the per-iteration log."""

    n: int
    columns: list = field(default_factory=list)
    costs: list = field(default_factory=list)
    keys: set = field(default_factory=set)
    iterations: int = 0
    last_reduced: float = math.inf
    log_rows: list = field(default_factory=list)

    def add(self, a, cost: float = 0.0) -> bool:
        a = np.asarray(a, dtype=float)
        key = tuple(np.round(a, 9))
        if key in self.keys:
            return False
        if len(self.columns) >= MAX_COLUMNS:
            raise PricingStalled(f"column count reached {MAX_COLUMNS} without convergence")
        self.keys.add(key)
        self.columns.append(a)
        self.costs.append(float(cost))
        return True

    def matrix(self) -> np.ndarray:
        return np.array(self.columns).T

    def log(self, objective: float, reduced: float, added: bool):
        self.iterations += 1
        self.last_reduced = reduced
        self.log_rows.append((self.iterations, len(self.columns), objective, reduced, added))

    def log_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["iteration", "columns", "objective", "reduced_value", "column_added"])
        for it, cols, obj, red, added in self.log_rows:
            w.writerow([it, cols, f"{obj:.12g}", f"{red:.12g}", int(added)])
        return buf.getvalue()


@dataclass
class FeasibilityResult:
    feasible: bool
    t: int
    distribution: Optional[LetterDistribution] = None
    certificate: Optional[DualPoint] = None
    slack: float = math.inf
    state: Optional[MasterState] = None

    def __bool__(self) -> bool:
        return self.feasible


def _phase1_master(instance: ProblemInstance, state: MasterState):
    """``min sum(s)`` s.t. ``sum(x) = 1``, ``sum(x_a a_i) + s_i >= fair_i``."""
    n = instance.n
    k = len(state.columns)
    cols = state.matrix()
    c = np.concatenate([np.zeros(k), np.ones(n)])
    prog = lpmod.LinearProgram(c)
    prog.add_row(np.concatenate([np.ones(k), np.zeros(n)]), lpmod.EQ, 1.0)
    eye = np.eye(n)
    for i in range(n):
        prog.add_row(np.concatenate([cols[i], eye[i]]), lpmod.GE, instance.fair_share[i])
    return lpmod.solve(prog)


def _distribution(instance, state, x, tag_mode=None) -> LetterDistribution:
    x = np.maximum(np.asarray(x, dtype=float), 0.0)
    x = x / x.sum()
    entries = [(p, a) for p, a in zip(x, state.columns) if p > ABS_TOL]
    total = math.fsum(p for p, _ in entries)
    entries = [(p / total, a) for p, a in entries]
    return make_distribution(entries, tag_mode, instance_digest=instance.digest(),
                             city_ids=tuple(instance.ids))


def width_certificate(instance: ProblemInstance, t: int) -> DualPoint:
    """Dual point ``y_i = 1/u_i``, ``y = t``: violated whenever the widths exceed ``t``."""
    return DualPoint(float(t), 1.0 / np.asarray(instance.u, dtype=float))


def feasible(instance: ProblemInstance, t: int, relaxed: bool = False) -> FeasibilityResult:
    """Decide whether an ex-ante fair distribution over ``A_t`` exists.

    With ``relaxed=True`` columns come from :func:`price_relaxed` and may use
    ``t + 1`` cities; an infeasible verdict is still a certificate for ``t``.
    """
    t = int(t)
    if t < lower_bound_t(instance):
        return FeasibilityResult(False, t, certificate=width_certificate(instance, t))
    state = MasterState(instance.n)
    pricer = price_relaxed if relaxed else price_exact
    seed_col = pricer(instance, t, DualPoint(0.0, instance.fair_share / instance.letters))
    if seed_col is None:
        # fewer than ``letters`` fit into the ``t`` largest caps
        return FeasibilityResult(False, t, certificate=None, state=state)
    state.add(seed_col.allocation)
    scale = max(1.0, float(instance.letters))
    while True:
        res = _phase1_master(instance, state)
        if not res.optimal:
            raise PricingStalled(f"restricted master returned {res.status}")
        k = len(state.columns)
        y0 = res.duals[0]
        yi = np.clip(res.duals[1:], 0.0, None)
        dual = DualPoint(-y0, yi)
        col = pricer(instance, t, dual)
        reduced = col.reduced_value if col is not None else -math.inf
        added = reduced > REDUCED_TOL * scale and state.add(col.allocation)
        state.log(res.objective, reduced, added)
        if not added:
            break
    slack = res.objective
    if slack <= ABS_TOL * instance.letters:
        dist = _distribution(instance, state, res.primal[:k])
        return FeasibilityResult(True, t, distribution=dist, slack=slack, state=state)
    return FeasibilityResult(False, t, certificate=dual, slack=slack, state=state)


def min_feasible_t(instance: ProblemInstance, t_max: Optional[int] = None, mode: str = "exact") -> int:
    """Smallest ``t`` admitting an ex-ante fair distribution.

    ``mode="exact"`` scans upward with exact pricing. ``mode="plus_one"``
    uses the relaxed oracle and returns a value in ``{OPT, OPT + 1}``: at the
    first relaxed-feasible ``t`` the answer is ``t`` if every generated column
    with positive probability is ``t``-bounded, else ``t + 1``.
    """
    t_max = instance.n if t_max is None else min(int(t_max), instance.n)
    if mode not in ("exact", "plus_one"):
        raise ValueError(f"unknown mode {mode!r}")
    for t in range(max(1, lower_bound_t(instance)), t_max + 1):
        res = feasible(instance, t, relaxed=(mode == "plus_one"))
        if not res.feasible:
            continue
        if mode == "plus_one" and max(res.distribution.support_sizes()) > t:
            return t + 1
        return t
    raise NoFeasibleT(f"no feasible t up to {t_max}")


# -- proportionality --------------------------------------------------------

@dataclass
class ProportionalResult:
    distribution: LetterDistribution
    objective: float
    optimal: bool
    state: MasterState
    targets: TargetProfile
    start: str
    trajectory: list = field(default_factory=list)


def phi(a, tau, scope: str = "selected_only") -> float:
    return deviation(a, tau, scope)


def _proportional_master(instance: ProblemInstance, state: MasterState):
    """``min sum(x_a phi_a)`` s.t. ``sum(x) = 1``, ``sum(x_a a_i) >= fair_i``."""
    k = len(state.columns)
    cols = state.matrix()
    prog = lpmod.LinearProgram(np.asarray(state.costs))
    prog.add_row(np.ones(k), lpmod.EQ, 1.0)
    for i in range(instance.n):
        prog.add_row(cols[i], lpmod.GE, instance.fair_share[i])
    return lpmod.solve(prog)


def starting_columns(instance: ProblemInstance, t: int):
    """Columns of a fair starting distribution: Buckets, then GreedyEqual, then phase one."""
    try:
        return "buckets", run_buckets(instance, t).distribution
    except (BucketsFailed, WidthOutOfRange):
        pass
    try:
        return "greedy-equal", greedy_equal(instance, t).distribution
    except (BudgetExceeded, AssumptionViolated):
        pass
    res = feasible(instance, t)
    if not res.feasible:
        raise InfeasibleStart(f"no ex-ante fair distribution over A_{t}")
    return "phase-1", res.distribution


def optimize_proportional(instance: ProblemInstance, t: Optional[int] = None,
                          targets: Optional[TargetProfile] = None, f: str = "sqrt",
                          scope: str = "selected_only", node_budget: Optional[int] = None,
                          max_iter: int = MAX_COLUMNS) -> ProportionalResult:
    """Fair distribution over ``A_t`` minimizing expected deviation from the targets."""
    t = instance.budget if t is None else int(t)
    if targets is None:
        targets = solve_kappa(instance, f, t)
    tau = np.asarray(targets.tau, dtype=float)
    start, dist = starting_columns(instance, t)
    state = MasterState(instance.n)
    for _, a in dist.entries:
        state.add(a, phi(a, tau, scope))
    kw = {} if node_budget is None else {"node_budget": node_budget}
    optimal = True
    trajectory = []
    while True:
        res = _proportional_master(instance, state)
        if not res.optimal:
            raise InfeasibleStart(f"proportional master returned {res.status}")
        trajectory.append(res.objective)
        dual = DualPoint(res.duals[0], np.clip(res.duals[1:], 0.0, None))
        col = price_proportional(instance, t, tau, dual, scope=scope, **kw)
        reduced = col.value if col is not None else -math.inf
        added = (reduced > PROPORTIONAL_TOL
                 and state.add(col.allocation, phi(col.allocation, tau, scope)))
        state.log(res.objective, reduced, added)
        if col is not None and not col.exact and not added:
            optimal = False
        if not added:
            break
        if state.iterations >= max_iter:
            optimal = False
            break
    k = len(state.columns)
    out = _distribution(instance, state, res.primal[:k])
    obj = math.fsum(p * phi(a, tau, scope) for p, a in out.entries)
    return ProportionalResult(out, obj, optimal, state, targets, start, trajectory)
