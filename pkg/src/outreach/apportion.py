"""Stratification into (state, size class) groups and apportionment of letters and budget.

Letters are split by systematic rounding of each group's fair share. The city
budget is split Adams-style on the groups' global target widths: every group
gets ``max(min(ceil(gamma * W_G), n_G), t_min_G)`` for a common ``gamma``.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import BudgetOutOfRange, NoFeasibleT
from .layout import make_rng
from .model import SIZE_CLASSES, City, ProblemInstance, lower_bound_t, validate
from .targets import TargetProfile, solve_kappa

SIZE_THRESHOLDS = (20_000, 100_000)


def size_class(population: float, thresholds: Sequence[float] = SIZE_THRESHOLDS) -> str:
    if list(thresholds) != sorted(set(thresholds)) or len(thresholds) != 2:
        raise ValueError("need two strictly increasing thresholds")
    if population < thresholds[0]:
        return "small"
    if population < thresholds[1]:
        return "medium"
    return "large"


@dataclass(frozen=True)
class Group:
    key: tuple
    members: tuple
    share: float

    @property
    def n(self) -> int:
        return len(self.members)

    @property
    def label(self) -> str:
        state, cls = self.key
        return f"{state} ({cls.capitalize()})"


def group(instance: ProblemInstance, thresholds: Sequence[float] = SIZE_THRESHOLDS) -> list:
    """Partition cities by (state, size class); empty classes are omitted.

    A city's own ``size_class`` wins over the thresholds when set. Groups are
    ordered by state name, then small, medium, large.
    """
    buckets = {}
    for i, c in enumerate(instance.cities):
        cls = c.size_class or size_class(c.population, thresholds)
        buckets.setdefault((c.state or "", cls), []).append(i)
    order = sorted(buckets, key=lambda k: (k[0], SIZE_CLASSES.index(k[1])))
    pi = instance.pi
    return [Group(k, tuple(buckets[k]), math.fsum(pi[buckets[k]])) for k in order]


def letters_per_group(groups: Sequence[Group], letters: int, seed=None) -> list:
    """Systematic rounding of ``share * letters``: one uniform offset, unit spacing.

    Each group gets the floor or the ceiling of its share, the total is exact,
    and each group's expectation equals its share.
    """
    quotas = np.array([g.share for g in groups]) * letters
    base = np.floor(quotas + 1e-12)
    frac = np.clip(quotas - base, 0.0, 1.0)
    rng = make_rng(seed)
    u = rng.random()
    cum = np.concatenate([[0.0], np.cumsum(frac)])
    # group k is rounded up when some point u + m falls in [cum[k], cum[k + 1])
    hits = np.floor(cum[1:] - u) - np.floor(cum[:-1] - u)
    out = (base + hits).astype(int)
    diff = letters - int(out.sum())
    if diff:
        # float drift in the cumulative sum; fix on the largest remainders
        order = np.argsort(-frac if diff > 0 else frac, kind="stable")
        for k in order[: abs(diff)]:
            out[k] += 1 if diff > 0 else -1
    return [int(v) for v in out]


def _t_of(gamma, widths, n_g, t_min):
    raw = np.ceil(gamma * widths - 1e-12)
    return np.maximum(np.minimum(raw, n_g), t_min).astype(int)


def adams(widths: Sequence[float], n_g: Sequence[int], t_min: Sequence[int], t: int,
          keys: Optional[Sequence] = None):
    """Bounded Adams apportionment of ``t``; returns ``(t_G list, gamma)``.

    The step function in ``gamma`` is evaluated exactly on each interval
    between consecutive jump points ``k / W_G``. When several groups jump
    together past ``t``, the jumped groups with the smallest fractional part
    ``gamma * W_G - floor(gamma * W_G)`` (then lowest key) are stepped back.
    """
    widths = np.asarray(widths, dtype=float)
    n_g = np.asarray(n_g, dtype=int)
    t_min = np.asarray(t_min, dtype=int)
    keys = list(range(len(widths))) if keys is None else list(keys)
    if np.any(t_min > n_g):
        raise BudgetOutOfRange("a group's minimum budget exceeds its size")
    if t < t_min.sum() or t > n_g.sum():
        raise BudgetOutOfRange(f"t={t} outside [{t_min.sum()}, {n_g.sum()}]")
    points = sorted({0.0} | {k / w for w, n in zip(widths, n_g) if w > 0 for k in range(1, n + 1)})
    points.append(points[-1] + 1.0)
    prev = _t_of(0.0, widths, n_g, t_min)
    if prev.sum() == t:
        return [int(v) for v in prev], 0.0
    for lo, hi in zip(points[:-1], points[1:]):
        gamma = 0.5 * (lo + hi)
        cur = _t_of(gamma, widths, n_g, t_min)
        if cur.sum() >= t:
            over = int(cur.sum() - t)
            if over:
                jumped = [k for k in range(len(cur)) if cur[k] > prev[k] and cur[k] > t_min[k]]
                fracs = gamma * widths - np.floor(gamma * widths)
                jumped.sort(key=lambda k: (fracs[k], keys[k]))
                for k in jumped[:over]:
                    cur[k] -= 1
            return [int(v) for v in cur], gamma
        prev = cur
    raise BudgetOutOfRange(f"no gamma reaches t={t}")


def group_instance(instance: ProblemInstance, g: Group, letters: int, budget: int = 1) -> ProblemInstance:
    cities = [instance.cities[i] for i in g.members]
    return validate(cities, letters, budget)


def group_min_t(sub: ProblemInstance, method: str) -> int:
    """Smallest budget the chosen solver needs on a group, at least 1."""
    from .buckets import min_t_buckets
    from .colgen import min_feasible_t
    from .greedy import min_t_greedy

    if method == "column-generation":
        return max(1, min_feasible_t(sub, sub.n))
    if method == "greedy-equal":
        found = min_t_greedy(sub, sub.n)
    elif method == "buckets":
        found = min_t_buckets(sub, sub.n)
    else:
        raise ValueError(f"unknown method {method!r}")
    if found is None:
        raise NoFeasibleT(f"{method} fails on every budget up to {sub.n}")
    return max(1, found)


@dataclass
class GroupPlan:
    groups: list
    letters: list
    budgets: list
    t_min: list
    widths: list
    gamma: float
    global_targets: TargetProfile
    local_targets: list = field(default_factory=list)
    method: str = "column-generation"
    total_letters: int = 0
    total_budget: int = 0

    def rows(self):
        return zip(self.groups, self.letters, self.budgets, self.t_min, self.widths)

    def to_csv(self, instance: ProblemInstance) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["group", "population", "share", "n_G", "letters_G", f"t_G_{self.method}",
                    "t_G_min", "global_width"])
        for g, lg, tg, tmin, wg in self.rows():
            pop = math.fsum(instance.cities[i].population for i in g.members)
            w.writerow([g.label, f"{pop:.0f}", f"{g.share:.4f}", g.n, lg, tg, tmin, f"{wg:.6f}"])
        return buf.getvalue()


def _min_t_job(args):
    sub, method = args
    return group_min_t(sub, method)


def apportion_t(instance: ProblemInstance, groups: Sequence[Group], letters_g: Sequence[int], t: int,
                t_min: Optional[Sequence[int]] = None, method: str = "column-generation",
                f: str = "sqrt", jobs: int = 1) -> GroupPlan:
    """Split ``t`` over groups on their global target widths and recompute local targets.

    Global targets are solved once on the full roster at ``(letters, t)``.
    ``t_min`` defaults to the per-group minimum of ``method``.
    """
    glob = solve_kappa(instance, f, t)
    widths = [math.fsum(glob.widths[list(g.members)]) for g in groups]
    subs = [group_instance(instance, g, lg) for g, lg in zip(groups, letters_g)]
    if t_min is None:
        tasks = [(s, method) for s in subs]
        if jobs > 1:
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                t_min = list(pool.map(_min_t_job, tasks))
        else:
            t_min = [_min_t_job(x) for x in tasks]
    budgets, gamma = adams(widths, [g.n for g in groups], t_min, t, keys=[g.key for g in groups])
    local = [solve_kappa(s, f, max(tg, lower_bound_t(s))) for s, tg in zip(subs, budgets)]
    return GroupPlan(list(groups), list(letters_g), budgets, list(t_min), widths, gamma, glob, local,
                     method, int(sum(letters_g)), int(t))


def plan(instance: ProblemInstance, letters: int, t: int, method: str = "column-generation",
         f: str = "sqrt", seed=0, jobs: int = 1,
         thresholds: Sequence[float] = SIZE_THRESHOLDS) -> GroupPlan:
    """Group, round letters, and apportion the budget in one call."""
    if letters != instance.letters:
        instance = validate(instance.cities, letters, instance.budget)
    groups = group(instance, thresholds)
    lg = letters_per_group(groups, letters, seed)
    return apportion_t(instance, groups, lg, t, method=method, f=f, jobs=jobs)


@dataclass(frozen=True)
class RatioRow:
    label: str
    t_g: int
    max_local_over_global: float
    max_global_over_local: float
    single: bool

    @property
    def factor(self) -> float:
        return max(self.max_local_over_global, self.max_global_over_local)


def local_vs_global_report(plan: GroupPlan, bound: float = 1.5) -> list:
    """Per group, the largest ratio between local and global targets in either direction.

    Groups with ``t_G = 1`` are flagged: their local target is ``letters_G``
    for every member, whatever the target function.
    """
    rows = []
    for g, tg, loc in zip(plan.groups, plan.budgets, plan.local_targets):
        glob = plan.global_targets.tau[list(g.members)]
        r = loc.tau / glob
        rows.append(RatioRow(g.label, tg, float(r.max()), float((1.0 / r).max()), tg == 1))
    return rows


def ratio_report_csv(rows: Sequence[RatioRow], bound: float = 1.5) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["group", "t_G", "max_local_over_global", "max_global_over_local", "t_G_is_1",
                f"within_{bound:g}"])
    for r in rows:
        w.writerow([r.label, r.t_g, f"{r.max_local_over_global:.6f}", f"{r.max_global_over_local:.6f}",
                    int(r.single), int(r.factor <= bound)])
    return buf.getvalue()
