"""Embedded rosters: the worked examples, apportionment table, and a synthetic national roster."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import City, ProblemInstance, cap_for, make_instance, validate


def half_caps(budget: int = 4) -> ProblemInstance:
    """Eight cities, 60 letters, caps at half the population in units of 1/360."""
    pops = [10, 10, 40, 40, 40, 50, 70, 100]
    return make_instance(pops, [p / 2 for p in pops], 60, budget)


def greedy_trap(budget: int = 4) -> ProblemInstance:
    """GreedyEqual fails at ``t = 4`` although ``t = 3`` is feasible."""
    pops = [2] + [30] * 9 + [33] * 10 + [34] * 5 + [228]
    return make_instance(pops, pops, 100, budget)


def bucket_trap(budget: int = 2) -> ProblemInstance:
    """Feasible at ``t = 2`` while Buckets fails for small budgets."""
    pops = [1, 4, 16, 64, 65, 113, 125, 128]
    return make_instance(pops, pops, 129, budget)


def partition_roster(budget: int = 2) -> ProblemInstance:
    """Partition-style roster ``x = (1, 1, 2, 2)`` with caps equal to ``x``."""
    xs = [1, 1, 2, 2]
    return make_instance(xs, xs, 3, budget)


FIXTURES = {
    "half_caps": half_caps,
    "greedy_trap": greedy_trap,
    "bucket_trap": bucket_trap,
    "partition": partition_roster,
}


@dataclass(frozen=True)
class TableRow:
    group: str
    population: int
    share: float
    n_cities: int
    letters: int
    t_ge: int
    t_cg: int
    t_b: int

    @property
    def state(self) -> str:
        return self.group.rsplit(" (", 1)[0]

    @property
    def size_class(self) -> str:
        return self.group.rsplit(" (", 1)[1].rstrip(")").lower()


# Apportionment of 20000 letters and 80 cities over 42 groups of the German roster.
_NATIONAL = """\
Baden-Württemberg (Large)|2158197|0.0256|9|511|2|1|1
Baden-Württemberg (Medium)|3619302|0.0429|98|858|3|2|2
Baden-Württemberg (Small)|5502758|0.0652|994|1305|4|6|6
Bayern (Large)|3010827|0.0357|8|714|2|1|1
Bayern (Medium)|2326541|0.0276|67|551|2|1|1
Bayern (Small)|8032025|0.0952|1981|1905|6|10|10
Berlin (Large)|3755251|0.0445|1|891|1|1|1
Brandenburg (Large)|185750|0.0022|1|44|1|1|1
Brandenburg (Medium)|940363|0.0111|27|223|1|1|1
Brandenburg (Small)|1447022|0.0172|385|343|2|2|2
Bremen (Large)|684864|0.0081|2|162|1|1|1
Hamburg (Large)|1892122|0.0224|1|449|1|1|1
Hessen (Large)|1658130|0.0197|6|393|2|1|1
Hessen (Medium)|1805347|0.0214|53|428|2|1|1
Hessen (Small)|2927883|0.0347|362|694|2|3|3
Mecklenburg-Vorpommern (Large)|209920|0.0025|1|50|1|1|1
Mecklenburg-Vorpommern (Medium)|396680|0.0047|8|94|1|1|1
Mecklenburg-Vorpommern (Small)|1021778|0.0121|716|242|2|2|2
Niedersachsen (Large)|1588358|0.0188|8|377|2|1|1
Niedersachsen (Medium)|2974786|0.0353|86|705|2|2|2
Niedersachsen (Small)|3577098|0.0424|847|848|3|4|4
Nordrhein-Westfalen (Large)|8438299|0.1000|30|2001|6|2|2
Nordrhein-Westfalen (Medium)|7369437|0.0874|182|1747|5|3|3
Nordrhein-Westfalen (Small)|2331380|0.0276|184|553|2|2|2
Rheinland-Pfalz (Large)|723508|0.0086|5|172|1|1|1
Rheinland-Pfalz (Medium)|690561|0.0082|17|163|1|1|1
Rheinland-Pfalz (Small)|2745081|0.0325|2279|651|3|6|6
Saarland (Large)|181959|0.0022|1|43|1|1|1
Saarland (Medium)|275178|0.0033|8|65|1|1|1
Saarland (Small)|535529|0.0063|43|127|1|1|1
Sachsen (Large)|1427967|0.0169|3|338|1|1|1
Sachsen (Medium)|723183|0.0086|21|172|1|1|1
Sachsen (Small)|1935002|0.0229|394|458|2|3|3
Sachsen-Anhalt (Large)|481447|0.0057|2|114|1|1|1
Sachsen-Anhalt (Medium)|708172|0.0084|22|168|1|1|1
Sachsen-Anhalt (Small)|997024|0.0118|194|237|1|2|1
Schleswig-Holstein (Large)|465812|0.0055|2|110|1|1|1
Schleswig-Holstein (Medium)|753307|0.0089|20|179|1|1|1
Schleswig-Holstein (Small)|1734151|0.0206|1082|411|3|3|4
Thüringen (Large)|326160|0.0039|2|77|1|1|1
Thüringen (Medium)|692661|0.0082|20|164|1|1|1
Thüringen (Small)|1108025|0.0131|583|263|2|2|2
"""

NATIONAL_LETTERS = 20000
NATIONAL_BUDGET = 80


def national_table() -> list:
    rows = []
    for line in _NATIONAL.splitlines():
        g, pop, share, n, lg, ge, cg, b = line.split("|")
        rows.append(TableRow(g, int(pop), float(share), int(n), int(lg), int(ge), int(cg), int(b)))
    return rows


CITY_STATES = ("Berlin", "Hamburg", "Bremen")


def synthetic_national(seed: int = 0, letters: int = 20000, scale: float = 1.0) -> ProblemInstance:
    """Roster shaped like the national one: 16 states and 42 (state, size) groups.

    Three city-states contribute one or two large cities each; the other
    thirteen states have small, medium and large cities. ``scale`` multiplies
    the number of small cities per state.
    """
    rng = np.random.default_rng(seed)
    cities = []
    states = [f"S{k:02d}" for k in range(13)] + list(CITY_STATES)
    for s in states:
        if s in CITY_STATES:
            counts = {"large": int(rng.integers(1, 3))}
        else:
            counts = {
                "small": max(3, int(rng.integers(15, 40) * scale)),
                "medium": int(rng.integers(2, 10)),
                "large": int(rng.integers(1, 5)),
            }
        for cls, k in counts.items():
            if cls == "small":
                pops = np.exp(rng.uniform(np.log(150), np.log(19999), k))
            elif cls == "medium":
                pops = rng.uniform(20000, 99999, k)
            else:
                pops = np.exp(rng.uniform(np.log(100000), np.log(3_500_000), k))
            for p in np.round(pops):
                cid = f"{s}-{cls[0]}{len(cities):04d}"
                cities.append(City(cid, cid, float(p), cap_for(float(p)), state=s))
    return validate(cities, letters, 1)
