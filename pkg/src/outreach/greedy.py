"""GreedyEqual: layer-by-layer filling of the flat picture.

Cities are placed in ascending order of population. At position ``x`` in
layer ``k`` a city is drawn at height ``min(u_i, (letters - below) / (t - k))``
where ``below`` is the height already stacked at the same horizontal offset in
lower layers; past ``x = t`` the height is ``u_i``. Since that height is
piecewise constant, each city's extent is found by walking the pieces.
"""

from __future__ import annotations

import bisect
import logging
from dataclasses import dataclass
from typing import Optional

from .errors import AssumptionViolated, BudgetExceeded
from .layout import Layout, Segment, extract_distribution
from .model import ABS_TOL, ProblemInstance, lower_bound_t

log = logging.getLogger(__name__)

SNAP = 1e-12


@dataclass
class GreedyTrace:
    t: int
    segments: list
    final_x: float
    succeeded: bool
    layout: Optional[Layout] = None

    @property
    def failure_point(self) -> Optional[float]:
        return None if self.succeeded else self.final_x

    def to_dict(self) -> dict:
        return {
            "t": self.t,
            "succeeded": self.succeeded,
            "final_x": self.final_x,
            "failure_point": self.failure_point,
            "segments": [
                {"city": s.city, "start": s.start, "end": s.end, "height": s.height,
                 "selects_average": s.selects_average}
                for s in self.segments
            ],
        }


class _Profile:
    """Height stacked so far over offsets ``[0, 1)``, piecewise constant."""

    def __init__(self):
        self.bps = [0.0, 1.0]
        self.vals = [0.0]

    def piece(self, off: float):
        k = bisect.bisect_right(self.bps, off) - 1
        k = min(max(k, 0), len(self.vals) - 1)
        return self.vals[k], self.bps[k + 1]

    def add_layer(self, pieces):
        """Add a completed layer given as ``(lo, hi, height)`` covering ``[0, 1)``."""
        cuts = sorted(set(self.bps) | {lo for lo, _, _ in pieces} | {1.0})
        bps, vals = [cuts[0]], []
        for lo, hi in zip(cuts[:-1], cuts[1:]):
            if hi - lo <= SNAP:
                continue
            mid = 0.5 * (lo + hi)
            v = self.piece(mid)[0] + _height_in(pieces, mid)
            if vals and v == vals[-1]:
                bps[-1] = hi
            else:
                vals.append(v)
                bps.append(hi)
        bps[-1] = 1.0
        self.bps, self.vals = bps, vals


def _height_in(pieces, off):
    for lo, hi, h in pieces:
        if lo <= off < hi:
            return h
    return 0.0


def greedy_equal_trace(instance: ProblemInstance, t: Optional[int] = None,
                       override: bool = False) -> GreedyTrace:
    """Run GreedyEqual and return the full trace (``trace.layout`` is set on success)."""
    t = instance.budget if t is None else int(t)
    if t < 1:
        raise ValueError("t must be at least 1")
    if not override and not instance.assumption_holds(t).all():
        bad = [instance.cities[i].id for i, ok in enumerate(instance.assumption_holds(t)) if not ok]
        raise AssumptionViolated(f"oversized cities with cap below the letter budget at t={t}: {bad}")

    letters = float(instance.letters)
    below = _Profile()
    layer_pieces = []
    segments = []
    # position is tracked as (layer, offset) so float drift in x cannot stall the walk
    layer, off = 0, 0.0

    def record(city, start, end, height, avg):
        last = segments[-1] if segments else None
        if (last is not None and last.city == city and last.height == height
                and last.end == start and int(last.start) == int(start) and start < t):
            segments[-1] = Segment(city, last.start, end, height, last.selects_average and avg)
        else:
            segments.append(Segment(city, start, end, height, avg))

    for i in range(instance.n):
        area = float(instance.fair_share[i])
        cap = float(instance.u[i])
        while area > SNAP * letters:
            if layer >= t:
                width = area / cap
                record(i, layer + off, layer + off + width, cap, False)
                off += width
                area = 0.0
                break
            stacked, piece_end = below.piece(off)
            avg = (letters - stacked) / (t - layer)
            height = min(cap, avg)
            if height <= 0:
                # nothing left to fill at this offset
                new_off = piece_end
            else:
                need = area / height
                if off + need < piece_end - SNAP:
                    new_off = off + need
                    area = 0.0
                else:
                    new_off = piece_end
                    area -= height * (piece_end - off)
                record(i, layer + off, layer + new_off, height, avg <= cap)
                layer_pieces.append((off, new_off, height))
            if new_off >= 1.0 - SNAP:
                below.add_layer(layer_pieces)
                layer_pieces = []
                layer, off = layer + 1, 0.0
            else:
                off = new_off

    x = layer + off
    ok = abs(x - t) <= ABS_TOL * t
    trace = GreedyTrace(t, segments, x, ok)
    if ok:
        last = segments[-1]
        segments[-1] = Segment(last.city, last.start, float(t), last.height, last.selects_average)
        trace.layout = Layout(tuple(segments), t, instance.letters, instance.n, tag="greedy-equal")
    return trace


def greedy_equal(instance: ProblemInstance, t: Optional[int] = None, override: bool = False) -> Layout:
    """GreedyEqual layout for budget ``t``.

    Raises :class:`BudgetExceeded` (with the trace) when the cities need more
    than ``t`` layers, and :class:`AssumptionViolated` when an oversized city's
    cap is below the letter count, unless ``override`` is set.
    """
    trace = greedy_equal_trace(instance, t, override)
    if not trace.succeeded:
        raise BudgetExceeded(trace)
    return trace.layout


def min_t_greedy(instance: ProblemInstance, t_max: int, override: bool = False) -> Optional[int]:
    """Smallest ``t`` in ``[lower bound, t_max]`` where GreedyEqual succeeds, else None.

    Budgets at which the oversized-city assumption fails are skipped unless
    ``override`` is set.
    """
    for t in range(max(1, lower_bound_t(instance)), t_max + 1):
        if not override and not instance.assumption_holds(t).all():
            continue
        if greedy_equal_trace(instance, t, override).succeeded:
            return t
    return None


def cap_violations(layout: Layout, instance: ProblemInstance) -> list:
    """Cities exceeding their cap in some extracted allocation (wrap-around audit)."""
    dist = extract_distribution(layout)
    bad = set()
    for _, a in dist.entries:
        for i in (a > instance.u + ABS_TOL * instance.letters).nonzero()[0]:
            bad.add(int(i))
    return sorted(bad)


def average_flags_consistent(layout_or_trace) -> bool:
    """Within each layer, once a segment selects the average, all later ones do."""
    segments = getattr(layout_or_trace, "segments")
    t = layout_or_trace.t
    seen = {}
    for s in sorted(segments, key=lambda s: s.start):
        layer = int(s.start)
        if layer >= t:
            continue
        if seen.get(layer) and not s.selects_average:
            return False
        if s.selects_average:
            seen[layer] = True
    return True
