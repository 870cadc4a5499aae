"""Metrics and deterministic SVG figures.

Figures are drawn with matplotlib's object API (no pyplot state). Every
rectangle is computed in data units first, quantized to ``QUANTUM``, and
tagged with a ``gid`` naming its city, so SVG output is byte-stable for equal
inputs and easy to inspect.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from .layout import Layout, LetterDistribution
from .model import ABS_TOL, ProblemInstance, check_mass, fairness_audit, monotone_violations
from .model import selection_bound_violations
from .pricing import deviation

QUANTUM = 1e-4
DEVIATION_CLIP = 0.5
SVG_SALT = "outreach"


def phi(a, targets, scope: str = "selected_only") -> float:
    """Total relative deviation ``|tau_i - a_i| / tau_i`` over selected cities."""
    tau = getattr(targets, "tau", targets)
    return deviation(a, tau, scope)


def expected_phi(distribution, targets, scope: str = "selected_only") -> float:
    entries = getattr(distribution, "entries", distribution)
    check_mass(entries)
    return math.fsum(p * phi(a, targets, scope) for p, a in entries)


@dataclass(frozen=True)
class ProportionalityRow:
    city: str
    target: float
    outcomes: tuple  # (probability, letters) for each support entry selecting the city

    @property
    def deviations(self) -> list:
        return [abs(self.target - a) / self.target for _, a in self.outcomes]


def proportionality_rows(distribution: LetterDistribution, targets, ids: Optional[Sequence[str]] = None) -> list:
    tau = np.asarray(getattr(targets, "tau", targets), dtype=float)
    ids = ids or distribution.city_ids or [str(i) for i in range(len(tau))]
    rows = []
    for i, cid in enumerate(ids):
        outs = tuple((p, float(a[i])) for p, a in distribution.entries if a[i] > ABS_TOL)
        rows.append(ProportionalityRow(cid, float(tau[i]), outs))
    return rows


def monotonicity_report(distribution: LetterDistribution, slack: Optional[float] = None) -> list:
    """Violating adjacent pairs of selected cities, per support entry."""
    if slack is None:
        slack = 1.0 if distribution.mode == "integral" else 0.0
    return [monotone_violations(a, slack=slack) for _, a in distribution.entries]


def binary_outcome(distribution: LetterDistribution, tol: float = ABS_TOL) -> bool:
    """Every city has at most one distinct positive letter count across the support."""
    mat = distribution.matrix
    for col in mat.T:
        vals = col[col > tol]
        if vals.size and vals.max() - vals.min() > tol * max(1.0, vals.max()):
            return False
    return True


def metrics(distribution: LetterDistribution, instance: ProblemInstance, targets=None,
            scope: str = "selected_only") -> dict:
    audit = fairness_audit(distribution, instance)
    out = {
        "support_entries": len(distribution.entries),
        "max_cities_per_allocation": max(distribution.support_sizes()),
        "fairness_max_error": audit.max_error,
        "fairness_ok": audit.ok,
        "monotonicity_violations": sum(monotonicity_report(distribution)),
        "binary_outcome": binary_outcome(distribution),
        "selection_bound_violations": len(selection_bound_violations(distribution, instance)),
    }
    if targets is not None:
        out["expected_phi"] = expected_phi(distribution, targets, scope)
        out["expected_phi_per_city"] = out["expected_phi"] / instance.n
    return out


def metrics_csv(values: dict) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["metric", "value"])
    for k, v in values.items():
        if isinstance(v, bool):
            v = int(v)
        elif isinstance(v, float):
            v = f"{v:.12g}"
        w.writerow([k, v])
    return buf.getvalue()


# -- geometry -----------------------------------------------------------------

@dataclass(frozen=True)
class Rect:
    city: int
    x: float
    y: float
    w: float
    h: float
    value: float = 0.0

    @property
    def area(self) -> float:
        return self.w * self.h


def _q(v: float) -> float:
    return round(v / QUANTUM) * QUANTUM + 0.0


def quantize(rects: Sequence[Rect]) -> list:
    return [Rect(r.city, _q(r.x), _q(r.y), _q(r.w), _q(r.h), r.value) for r in rects]


def stacked_rects(source: Union[Layout, LetterDistribution]) -> list:
    """Fig-1 style picture: offsets along x, each allocation's cities stacked in index order.

    For a layout every breakpoint interval is kept separately, so the
    rectangles show the same breakpoints as the layout itself.
    """
    if isinstance(source, Layout):
        bps = source.breakpoints
        cols = [(lo, hi - lo, source.allocation_at(0.5 * (lo + hi))) for lo, hi in zip(bps[:-1], bps[1:])]
    else:
        cum = np.concatenate([[0.0], np.cumsum(source.probabilities)])
        cols = [(cum[k], p, a) for k, (p, a) in enumerate(source.entries)]
    rects = []
    for x, w, a in cols:
        y = 0.0
        for i in np.flatnonzero(a > ABS_TOL):
            rects.append(Rect(int(i), float(x), y, float(w), float(a[i])))
            y += float(a[i])
    return rects


def flat_rects(layout: Layout) -> list:
    """Height functions over ``[0, t)``: one rectangle per segment."""
    return [Rect(s.city, s.start, 0.0, s.end - s.start, s.height) for s in layout.segments]


def proportionality_rects(distribution: LetterDistribution, targets) -> list:
    """One column per city in size order; each outcome gets a slice proportional to its probability.

    ``value`` holds the clipped relative deviation ``a_i / tau_i - 1``.
    """
    tau = np.asarray(getattr(targets, "tau", targets), dtype=float)
    rects = []
    for i in range(len(tau)):
        outs = sorted(((float(a[i]), p) for p, a in distribution.entries if a[i] > ABS_TOL))
        total = math.fsum(p for _, p in outs)
        x = float(i)
        for letters, p in outs:
            w = p / total
            dev = float(np.clip(letters / tau[i] - 1.0, -DEVIATION_CLIP, DEVIATION_CLIP))
            rects.append(Rect(i, x, 0.0, w, letters, dev))
            x += w
    return rects


# -- rendering ----------------------------------------------------------------

def _figure(width=6.4, height=4.0):
    from matplotlib.figure import Figure

    return Figure(figsize=(width, height), dpi=72)


def _svg(fig) -> str:
    import matplotlib
    from matplotlib.backends.backend_svg import FigureCanvasSVG

    FigureCanvasSVG(fig)
    buf = io.StringIO()
    with matplotlib.rc_context({"svg.hashsalt": SVG_SALT, "svg.fonttype": "none"}):
        fig.savefig(buf, format="svg", metadata={"Date": None, "Creator": None})
    return buf.getvalue()


def _city_colors(n: int):
    from matplotlib import colormaps

    cmap = colormaps["tab20"]
    return [cmap(i % 20) for i in range(n)]


def _draw(ax, rects, colors, prefix="city"):
    from matplotlib.patches import Rectangle

    for k, r in enumerate(rects):
        patch = Rectangle((r.x, r.y), r.w, r.h, facecolor=colors(r), edgecolor="black", linewidth=0.3)
        patch.set_gid(f"{prefix}-{r.city}-{k}")
        ax.add_patch(patch)


def render(source, style: str = "stacked", targets=None, title: Optional[str] = None) -> str:
    """SVG document for a layout or distribution.

    ``stacked`` and ``flat`` accept a layout (``stacked`` also a
    distribution); ``proportionality`` needs a distribution and targets.
    """
    fig = _figure()
    ax = fig.add_subplot(1, 1, 1)
    if style == "stacked":
        rects = quantize(stacked_rects(source))
        n = source.n
        palette = _city_colors(n)
        _draw(ax, rects, lambda r: palette[r.city])
        ax.set_xlim(0, 1)
        ax.set_ylim(0, max((r.y + r.h for r in rects), default=1.0) * 1.02)
        ax.set_xlabel("offset")
        ax.set_ylabel("letters")
    elif style == "flat":
        if not isinstance(source, Layout):
            raise TypeError("flat style needs a layout")
        rects = quantize(flat_rects(source))
        palette = _city_colors(source.n)
        _draw(ax, rects, lambda r: palette[r.city])
        ax.set_xlim(0, source.t)
        ax.set_ylim(0, max((r.h for r in rects), default=1.0) * 1.05)
        for k in range(1, source.t):
            ax.axvline(k, color="grey", linewidth=0.5, linestyle=":")
        ax.set_xlabel("x")
        ax.set_ylabel("height")
    elif style == "proportionality":
        if targets is None:
            raise ValueError("proportionality style needs targets")
        dist = source.distribution if isinstance(source, Layout) else source
        from matplotlib import colormaps

        cmap = colormaps["RdBu"]
        rects = quantize(proportionality_rects(dist, targets))
        _draw(ax, rects, lambda r: cmap(0.5 + r.value / (2 * DEVIATION_CLIP)))
        tau = np.asarray(getattr(targets, "tau", targets), dtype=float)
        xs = np.arange(len(tau)) + 0.5
        ax.plot(xs, [_q(v) for v in tau], color="black", linewidth=1.0, gid="targets")
        ax.set_xlim(0, len(tau))
        top = max([r.h for r in rects] + list(tau))
        ax.set_ylim(0, top * 1.05)
        ax.set_xlabel("city (ascending size)")
        ax.set_ylabel("letters if selected")
    else:
        raise ValueError(f"unknown style {style!r}")
    if title:
        ax.set_title(title)
    return _svg(fig)
