"""Domain types for the outreach stage: cities, instances, widths and audits.

Populations are given as raw inhabitant counts and normalized to shares that
sum to one. Letter caps above the letter budget are clamped to it.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import EmptyRoster, InfeasibleCap, NonPositiveInput, ProbabilityMassError

log = logging.getLogger(__name__)

ABS_TOL = 1e-9
FAIR_RTOL = 1e-6

SIZE_CLASSES = ("small", "medium", "large")


@dataclass(frozen=True)
class City:
    id: str
    name: str
    population: float
    cap: float
    state: Optional[str] = None
    size_class: Optional[str] = None

    @property
    def group_key(self):
        if self.state is None and self.size_class is None:
            return None
        return (self.state, self.size_class)


@dataclass(frozen=True)
class ProblemInstance:
    """A validated roster: cities ascending by population, plus ``letters`` and ``budget``.

    ``shares`` holds the normalized populations and ``caps`` the clamped caps,
    both aligned with ``cities``. Build instances through :func:`validate`.
    """

    cities: tuple
    letters: int
    budget: int
    shares: tuple
    caps: tuple
    raw_caps: tuple
    warnings: tuple = field(default=(), compare=False)

    @property
    def n(self) -> int:
        return len(self.cities)

    @cached_property
    def pi(self) -> np.ndarray:
        arr = np.asarray(self.shares, dtype=float)
        arr.setflags(write=False)
        return arr

    @cached_property
    def u(self) -> np.ndarray:
        arr = np.asarray(self.caps, dtype=float)
        arr.setflags(write=False)
        return arr

    @cached_property
    def fair_share(self) -> np.ndarray:
        """Expected letters per city, ``pi_i * letters``."""
        arr = self.pi * self.letters
        arr.setflags(write=False)
        return arr

    @property
    def ids(self) -> list:
        return [c.id for c in self.cities]

    def oversized(self, t: Optional[int] = None) -> np.ndarray:
        t = self.budget if t is None else t
        return self.pi > 1.0 / t

    def assumption_holds(self, t: Optional[int] = None) -> np.ndarray:
        """Per city: not oversized at ``t``, or its pre-clamp cap covers all letters."""
        over = self.oversized(t)
        raw = np.asarray(self.raw_caps, dtype=float)
        return ~over | (raw >= self.letters - ABS_TOL)

    def with_budget(self, t: int) -> "ProblemInstance":
        if t < 1:
            raise NonPositiveInput(f"budget must be >= 1, got {t}")
        return ProblemInstance(
            self.cities, self.letters, int(t), self.shares, self.caps, self.raw_caps, self.warnings
        )

    def digest(self) -> str:
        """Content hash of the roster and letter count (budget excluded)."""
        payload = {
            "letters": self.letters,
            "cities": [[c.id, repr(float(c.population)), repr(float(u))] for c, u in zip(self.cities, self.caps)],
        }
        blob = json.dumps(payload, sort_keys=True, separators=(",", ":")).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def to_dict(self) -> dict:
        return {
            "letters": self.letters,
            "budget": self.budget,
            "digest": self.digest(),
            "cities": [
                {
                    "id": c.id,
                    "name": c.name,
                    "population": c.population,
                    "cap": c.cap,
                    "state": c.state,
                    "size_class": c.size_class,
                }
                for c in self.cities
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ProblemInstance":
        cities = [City(**c) for c in data["cities"]]
        return validate(cities, data["letters"], data["budget"])


def validate(raw_cities: Iterable[City], letters: int, budget: int) -> ProblemInstance:
    """Normalize, sort and check a roster.

    Raises :class:`EmptyRoster`, :class:`NonPositiveInput`, or
    :class:`InfeasibleCap` naming the first city whose fair share exceeds its cap.
    """
    cities = list(raw_cities)
    if not cities:
        raise EmptyRoster("roster is empty")
    if letters < 1 or budget < 1:
        raise NonPositiveInput(f"letters and budget must be >= 1 (got {letters}, {budget})")
    if letters != int(letters) or budget != int(budget):
        raise NonPositiveInput("letters and budget must be integers")
    letters, budget = int(letters), int(budget)
    for c in cities:
        if not (c.population > 0) or not math.isfinite(c.population):
            raise NonPositiveInput(f"city {c.id!r} has non-positive population {c.population}")
        if not (c.cap > 0) or not math.isfinite(c.cap):
            raise NonPositiveInput(f"city {c.id!r} has non-positive cap {c.cap}")

    cities.sort(key=lambda c: (c.population, c.cap, c.id))
    total = math.fsum(c.population for c in cities)
    shares = tuple(c.population / total for c in cities)
    raw_caps = tuple(float(c.cap) for c in cities)
    caps = tuple(min(u, float(letters)) for u in raw_caps)
    warnings = []
    clamped = sum(1 for u in raw_caps if u > letters)
    if clamped:
        log.info("clamped %d caps to the letter budget %d", clamped, letters)
    for c, p, u in zip(cities, shares, caps):
        if p * letters > u * (1 + ABS_TOL) + ABS_TOL:
            raise InfeasibleCap(c.id, p * letters, u)
    if any(caps[k] > caps[k + 1] for k in range(len(caps) - 1)):
        msg = "caps are not monotone in population after clamping"
        log.warning(msg)
        warnings.append(msg)
    return ProblemInstance(tuple(cities), letters, budget, shares, caps, raw_caps, tuple(warnings))


@dataclass(frozen=True)
class CapRule:
    """Letter cap by population: a fraction for small and large towns, a flat cap between."""

    small_threshold: float = 500
    large_threshold: float = 2500
    small_frac: float = 0.5
    large_frac: float = 0.1
    mid_cap: float = 250

    def __post_init__(self):
        if not self.small_threshold < self.large_threshold:
            raise ValueError("cap rule thresholds must be increasing")
        for frac in (self.small_frac, self.large_frac):
            if not 0 < frac <= 1:
                raise ValueError("cap rule fractions must lie in (0, 1]")

    def __call__(self, population: float) -> float:
        if population < self.small_threshold:
            return self.small_frac * population
        if population > self.large_threshold:
            return self.large_frac * population
        return float(self.mid_cap)


def cap_for(population: float, rule: Optional[CapRule] = None) -> float:
    return (rule or CapRule())(population)


def make_instance(populations: Sequence[float], caps: Sequence[float], letters: int, budget: int = 1,
                  ids: Optional[Sequence[str]] = None) -> ProblemInstance:
    """Shorthand for building an instance from parallel arrays."""
    if ids is None:
        width = len(str(len(populations)))
        ids = [f"c{k:0{width}d}" for k in range(len(populations))]
    cities = [City(str(i), str(i), float(p), float(u)) for i, p, u in zip(ids, populations, caps)]
    return validate(cities, letters, budget)


@dataclass(frozen=True)
class WidthProfile:
    widths: np.ndarray
    total: float
    exact_total: Fraction

    @property
    def lower_bound_t(self) -> int:
        return math.ceil(self.exact_total)


def width_profile(instance: ProblemInstance) -> WidthProfile:
    """Minimum selection probabilities ``pi_i * letters / u_i`` and their sum.

    The total is also kept as an exact rational (floats convert exactly) so the
    integer lower bound on ``t`` is not subject to rounding.
    """
    widths = instance.fair_share / instance.u
    pops = [Fraction(c.population) for c in instance.cities]
    denom = sum(pops)
    exact = sum((p * instance.letters) / (denom * Fraction(u)) for p, u in zip(pops, instance.caps))
    return WidthProfile(widths, float(exact), exact)


def lower_bound_t(instance: ProblemInstance) -> int:
    return width_profile(instance).lower_bound_t


# -- allocations ------------------------------------------------------------

def support(a: np.ndarray, tol: float = ABS_TOL) -> np.ndarray:
    return np.flatnonzero(np.asarray(a) > tol)


def is_allocation(a, instance: ProblemInstance, t: Optional[int] = None, integral: bool = False,
                  tol: float = ABS_TOL) -> bool:
    a = np.asarray(a, dtype=float)
    if a.shape != (instance.n,):
        return False
    if integral:
        if not np.all(a == np.round(a)) or a.sum() != instance.letters:
            return False
    elif abs(a.sum() - instance.letters) > tol * max(1.0, instance.letters):
        return False
    if np.any(a < -tol) or np.any(a > instance.u + tol * max(1.0, instance.letters)):
        return False
    if t is not None and len(support(a, tol)) > t:
        return False
    return True


def monotone_violations(a, tol: float = ABS_TOL, slack: float = 0.0) -> int:
    """Consecutive selected cities (population order) where the larger gets fewer letters.

    Only cities with a positive count take part. ``slack`` relaxes the check,
    e.g. ``slack=1`` for integral allocations monotone up to one letter.
    """
    a = np.asarray(a, dtype=float)
    sel = a[a > tol]
    return int(np.count_nonzero(sel[1:] < sel[:-1] - slack - tol))


def is_monotone(a, tol: float = ABS_TOL, slack: float = 0.0) -> bool:
    return monotone_violations(a, tol, slack) == 0


# -- audits -----------------------------------------------------------------

def _entries(distribution):
    return getattr(distribution, "entries", distribution)


def check_mass(distribution, tol: float = ABS_TOL) -> float:
    total = math.fsum(p for p, _ in _entries(distribution))
    if abs(total - 1.0) > tol:
        raise ProbabilityMassError(f"probabilities sum to {total!r}, expected 1")
    return total


def expected_letters(distribution) -> np.ndarray:
    """Per-city expectation of letters under ``distribution``.

    Accepts a :class:`~outreach.layout.LetterDistribution` or any iterable of
    ``(probability, allocation)`` pairs.
    """
    entries = list(_entries(distribution))
    check_mass(entries)
    probs = np.array([p for p, _ in entries])
    mat = np.array([np.asarray(a, dtype=float) for _, a in entries])
    return probs @ mat


def selection_probabilities(distribution, tol: float = ABS_TOL) -> np.ndarray:
    entries = list(_entries(distribution))
    probs = np.array([p for p, _ in entries])
    mat = np.array([np.asarray(a, dtype=float) > tol for _, a in entries])
    return probs @ mat


@dataclass(frozen=True)
class FairnessAudit:
    expected: np.ndarray
    target: np.ndarray
    max_error: float
    tolerance: float

    @property
    def ok(self) -> bool:
        return self.max_error <= self.tolerance


def fairness_audit(distribution, instance: ProblemInstance, rtol: float = FAIR_RTOL) -> FairnessAudit:
    expected = expected_letters(distribution)
    target = instance.fair_share
    err = float(np.max(np.abs(expected - target)))
    return FairnessAudit(expected, np.asarray(target), err, rtol * instance.letters)


def selection_bound_violations(distribution, instance: ProblemInstance) -> list:
    """Cities whose selection probability falls below their minimum width."""
    sel = selection_probabilities(distribution)
    w = width_profile(instance).widths
    return [instance.cities[i].id for i in np.flatnonzero(sel < w - ABS_TOL)]
