"""Piecewise-constant layouts over ``[0, t)`` and the distributions they encode.

A layout stores one height function per city on the flat interval ``[0, t)``;
position ``x`` maps to layer ``floor(x)`` at horizontal offset ``x mod 1`` of
the stacked picture. Cutting the stacked picture at every distinct offset of a
segment endpoint gives a finite-support distribution over allocations.
"""

from __future__ import annotations

import bisect
import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional, Sequence, Union

import numpy as np

from .errors import CoverageGap, MassMismatch
from .model import ABS_TOL, is_monotone, support

BREAKPOINT_MERGE = 1e-12
GENERATOR_NAME = "numpy.random.PCG64"


def make_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.PCG64(seed))


@dataclass(frozen=True)
class Segment:
    city: int
    start: float
    end: float
    height: float
    selects_average: bool = field(default=False, compare=False)

    @property
    def width(self) -> float:
        return self.end - self.start

    @property
    def area(self) -> float:
        return (self.end - self.start) * self.height


@dataclass(frozen=True)
class Layout:
    segments: tuple
    t: int
    letters: int
    n: int
    tag: str = ""

    def __post_init__(self):
        object.__setattr__(self, "segments", tuple(sorted(self.segments, key=lambda s: s.start)))

    @cached_property
    def _starts(self):
        return [s.start for s in self.segments]

    def coverage_gaps(self, tol: float = ABS_TOL) -> list:
        gaps = []
        pos = 0.0
        for s in self.segments:
            if s.start > pos + tol:
                gaps.append((pos, s.start))
            pos = max(pos, s.end)
        if pos < self.t - tol * max(1, self.t):
            gaps.append((pos, float(self.t)))
        return gaps

    def segment_at(self, x: float) -> Optional[Segment]:
        k = bisect.bisect_right(self._starts, x) - 1
        if k < 0:
            return None
        seg = self.segments[k]
        if seg.start <= x < seg.end:
            return seg
        return None

    def height_at(self, x: float) -> float:
        seg = self.segment_at(x)
        return 0.0 if seg is None else seg.height

    def cumulative(self, x: float) -> float:
        """Total height stacked at offset ``x mod 1`` in layers ``0..floor(x)``."""
        layer = math.floor(x)
        off = x - layer
        return math.fsum(self.height_at(k + off) for k in range(layer + 1))

    def city_areas(self) -> np.ndarray:
        areas = np.zeros(self.n)
        for s in self.segments:
            areas[s.city] += s.area
        return areas

    @cached_property
    def breakpoints(self) -> list:
        """Sorted distinct offsets in ``[0, 1]`` of all segment endpoints."""
        raw = {0.0, 1.0}
        for s in self.segments:
            for x in (s.start, s.end):
                off = x - math.floor(x)
                raw.add(off)
        pts = sorted(raw)
        merged = [pts[0]]
        for p in pts[1:]:
            if p - merged[-1] > BREAKPOINT_MERGE:
                merged.append(p)
        merged[-1] = 1.0
        return merged

    def allocation_at(self, offset: float) -> np.ndarray:
        a = np.zeros(self.n)
        for k in range(self.t):
            seg = self.segment_at(k + offset)
            if seg is None:
                raise CoverageGap(f"no city covers x={k + offset:.12g}")
            a[seg.city] += seg.height
        return a

    @cached_property
    def distribution(self) -> "LetterDistribution":
        return extract_distribution(self)

    def to_dict(self) -> dict:
        return {
            "t": self.t,
            "letters": self.letters,
            "n": self.n,
            "tag": self.tag,
            "segments": [
                {"city": s.city, "start": s.start, "end": s.end, "height": s.height}
                for s in self.segments
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Layout":
        segs = [Segment(int(s["city"]), float(s["start"]), float(s["end"]), float(s["height"]))
                for s in data["segments"]]
        return cls(tuple(segs), int(data["t"]), int(data["letters"]), int(data["n"]), data.get("tag", ""))


@dataclass(frozen=True, eq=False)
class LetterDistribution:
    """Finite support of ``(probability, allocation)`` pairs.

    Entry order is meaningful: :func:`sample` maps ``rho`` to the entry whose
    cumulative probability interval contains it.
    """

    entries: tuple
    mode: str = "fractional"
    instance_digest: Optional[str] = None
    city_ids: Optional[tuple] = None

    @property
    def n(self) -> int:
        return len(self.entries[0][1])

    @property
    def probabilities(self) -> np.ndarray:
        return np.array([p for p, _ in self.entries])

    @property
    def matrix(self) -> np.ndarray:
        return np.array([a for _, a in self.entries], dtype=float)

    @cached_property
    def cumulative(self) -> list:
        return list(np.cumsum([p for p, _ in self.entries]))

    def support_sizes(self) -> list:
        return [len(support(a)) for _, a in self.entries]

    def to_dict(self) -> dict:
        def enc(v):
            v = float(v)
            return int(v) if self.mode == "integral" else v

        return {
            "mode": self.mode,
            "instance_digest": self.instance_digest,
            "city_ids": list(self.city_ids) if self.city_ids is not None else None,
            "entries": [{"p": float(p), "letters": [enc(v) for v in a]} for p, a in self.entries],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1)

    @classmethod
    def from_dict(cls, data: dict) -> "LetterDistribution":
        entries = tuple((float(e["p"]), np.asarray(e["letters"], dtype=float)) for e in data["entries"])
        ids = data.get("city_ids")
        return cls(entries, data.get("mode", "fractional"), data.get("instance_digest"),
                   tuple(ids) if ids is not None else None)


def make_distribution(entries, mode: Optional[str] = None, **kw) -> LetterDistribution:
    entries = tuple((float(p), np.asarray(a, dtype=float)) for p, a in entries if p > 0)
    if mode is None:
        integral = all(np.all(a == np.round(a)) for _, a in entries)
        mode = "integral" if integral else "fractional"
    return LetterDistribution(entries, mode, **kw)


def extract_distribution(layout: Layout, **kw) -> LetterDistribution:
    """Cut the stacked picture at every breakpoint offset.

    Each interval ``[b_k, b_{k+1})`` becomes one entry with probability equal
    to its length; adjacent intervals with identical allocations are merged.
    Raises :class:`CoverageGap` when part of ``[0, t)`` is uncovered.
    """
    gaps = layout.coverage_gaps()
    if gaps:
        raise CoverageGap(f"layout leaves {gaps[0]} uncovered")
    bps = layout.breakpoints
    entries = []
    for lo, hi in zip(bps[:-1], bps[1:]):
        a = layout.allocation_at(0.5 * (lo + hi))
        if entries and np.array_equal(entries[-1][1], a):
            entries[-1][0] += hi - lo
        else:
            entries.append([hi - lo, a])
    return make_distribution([(p, a) for p, a in entries], **kw)


def sample(source: Union[Layout, LetterDistribution], rho: float) -> np.ndarray:
    """Allocation of the interval containing ``rho`` in ``[0, 1)``."""
    if not 0.0 <= rho < 1.0:
        raise ValueError(f"rho must lie in [0, 1), got {rho}")
    if isinstance(source, Layout):
        source = source.distribution
    k = bisect.bisect_right(source.cumulative, rho)
    k = min(k, len(source.entries) - 1)
    return source.entries[k][1].copy()


def _is_integral(v: float, tol: float) -> bool:
    return abs(v - round(v)) <= tol


def dependent_round(a: Sequence[float], seed=None, letters: Optional[int] = None,
                    tol: float = ABS_TOL) -> np.ndarray:
    """Round a fractional allocation to integers keeping the sum and every marginal.

    Works pairwise: the two lowest-index fractional entries exchange mass so
    that at least one becomes integral, moving up or down with the probability
    that leaves both expectations unchanged. Zero entries are never touched.
    """
    x = np.array(a, dtype=float)
    total = math.fsum(x)
    if letters is None:
        letters = round(total)
    if abs(total - letters) > tol * max(1.0, abs(letters)):
        raise MassMismatch(f"allocation sums to {total!r}, expected {letters}")
    rng = make_rng(seed)
    cur = None
    for j in range(len(x)):
        if _is_integral(x[j], tol):
            continue
        if cur is None:
            cur = j
            continue
        fi = x[cur] - math.floor(x[cur])
        fj = x[j] - math.floor(x[j])
        up = min(1.0 - fi, fj)
        down = min(fi, 1.0 - fj)
        if rng.random() < down / (up + down):
            x[cur] += up
            x[j] -= up
        else:
            x[cur] -= down
            x[j] += down
        if _is_integral(x[cur], tol):
            cur = None if _is_integral(x[j], tol) else j
    out = np.rint(x).astype(np.int64)
    if out.sum() != letters:
        raise MassMismatch(f"rounding produced {out.sum()} letters, expected {letters}")
    return out


def is_ex_post_monotone(distribution: LetterDistribution) -> bool:
    slack = 1.0 if distribution.mode == "integral" else 0.0
    return all(is_monotone(a, slack=slack) for _, a in distribution.entries)


def distribution_digest_check(distribution: LetterDistribution, digest: Optional[str]) -> None:
    from .errors import DigestMismatch

    if digest and distribution.instance_digest and distribution.instance_digest != digest:
        raise DigestMismatch(
            f"distribution belongs to instance {distribution.instance_digest}, not {digest}"
        )
