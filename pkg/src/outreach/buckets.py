"""Buckets: partition the cities into contiguous groups, one selected per group.

A bucket's height is the total fair share of its members, so whichever
member is drawn receives exactly that many letters (binary outcome). Buckets
are filled in ascending population order until adding the next city would
push the bucket's rescaled target width above one or its height above the
smallest cap among its members.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import BucketsFailed
from .layout import Layout, Segment, make_rng
from .model import ABS_TOL, ProblemInstance
from .targets import TargetProfile, solve_kappa


@dataclass(frozen=True)
class Bucket:
    first: int
    last: int
    height: float

    @property
    def members(self) -> range:
        return range(self.first, self.last + 1)


def bucket_partition(instance: ProblemInstance, t: int, targets: TargetProfile,
                     criterion: str = "width") -> list:
    """Greedy contiguous partition into at most ``t`` buckets.

    ``criterion="width"`` measures bucket fullness by target widths
    ``pi_i * letters / tau_i``; ``criterion="letters"`` uses the target letters
    themselves. Raises :class:`BucketsFailed` when cities remain after ``t``
    buckets.
    """
    if criterion == "width":
        weight = np.asarray(targets.widths, dtype=float)
    elif criterion == "letters":
        weight = np.asarray(targets.tau, dtype=float)
    else:
        raise ValueError(f"unknown bucket criterion {criterion!r}")
    fair = instance.fair_share
    caps = instance.u
    n = instance.n
    # suffix sums of the weight, used for the rescaled fullness test
    tail = np.concatenate([np.cumsum(weight[::-1])[::-1], [0.0]])
    buckets = []
    i, j = 0, 1
    while j <= t and i < n:
        remaining_buckets = t - j + 1
        height = fair[i]
        load = weight[i]
        last = i
        cap = caps[i]
        for k in range(i + 1, n):
            h2 = height + fair[k]
            w2 = load + weight[k]
            # with monotone caps this is the smallest member's cap
            cap = min(cap, caps[k])
            if h2 > cap * (1 + ABS_TOL) + ABS_TOL:
                break
            if remaining_buckets * w2 > tail[i] * (1 + ABS_TOL) + ABS_TOL:
                break
            height, load, last = h2, w2, k
        buckets.append(Bucket(i, last, float(height)))
        i = last + 1
        j += 1
    if i < n:
        raise BucketsFailed(n - i, buckets)
    return buckets


def layout_from_buckets(instance: ProblemInstance, buckets: list) -> Layout:
    """Bucket ``j`` fills ``[j, j + 1)``; each member gets width share / height."""
    fair = instance.fair_share
    segs = []
    for j, b in enumerate(buckets):
        x = float(j)
        for k in b.members:
            end = x + fair[k] / b.height
            segs.append(Segment(k, x, end, b.height))
            x = end
        last = segs[-1]
        segs[-1] = Segment(last.city, last.start, float(j + 1), last.height)
    return Layout(tuple(segs), len(buckets), instance.letters, instance.n, tag="buckets")


def buckets(instance: ProblemInstance, t: Optional[int] = None, targets: Optional[TargetProfile] = None,
            f: str = "sqrt", criterion: str = "width") -> Layout:
    """Run Buckets; targets default to ``f`` scaled to width ``t``.

    The layout has one column per bucket, which can be fewer than ``t``.
    """
    t = instance.budget if t is None else t
    if targets is None:
        targets = solve_kappa(instance, f, t)
    return layout_from_buckets(instance, bucket_partition(instance, t, targets, criterion))


def min_t_buckets(instance: ProblemInstance, t_max: int, f: str = "sqrt",
                  criterion: str = "width") -> Optional[int]:
    from .model import lower_bound_t

    for t in range(max(1, lower_bound_t(instance)), min(t_max, instance.n) + 1):
        try:
            bucket_partition(instance, t, solve_kappa(instance, f, t), criterion)
        except BucketsFailed:
            continue
        return t
    return None


def layout_buckets(layout: Layout) -> list:
    """Recover ``(members, widths, height)`` per column of a Buckets layout."""
    cols = []
    for j in range(layout.t):
        segs = [s for s in layout.segments if j <= s.start < j + 1]
        cols.append(([s.city for s in segs], np.array([s.width for s in segs]), segs[0].height))
    return cols


def bucket_sample(layout: Layout, seed=None) -> np.ndarray:
    """Draw one city per bucket, proportional to population, independently per bucket."""
    rng = make_rng(seed)
    a = np.zeros(layout.n)
    for members, widths, height in layout_buckets(layout):
        k = rng.choice(len(members), p=widths / widths.sum())
        a[members[k]] = height
    return a


def buckets_csv(instance: ProblemInstance, layout: Layout) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["bucket", "members", "height", "widths"])
    for j, (members, widths, height) in enumerate(layout_buckets(layout)):
        w.writerow([
            j,
            ";".join(instance.cities[m].id for m in members),
            f"{height:.10g}",
            ";".join(f"{x:.10g}" for x in widths),
        ])
    return buf.getvalue()
