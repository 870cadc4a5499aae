import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from outreach.apportion import (adams, apportion_t, group, group_instance, group_min_t,
                                letters_per_group, local_vs_global_report, plan, ratio_report_csv,
                                size_class)
from outreach.errors import BudgetOutOfRange
from outreach.fixtures import NATIONAL_BUDGET, NATIONAL_LETTERS, synthetic_national, national_table
from outreach.model import City, cap_for, validate


def test_national_table_columns_are_consistent():
    rows = national_table()
    assert len(rows) == 42
    assert sum(r.letters for r in rows) == NATIONAL_LETTERS
    for col in ("t_ge", "t_cg", "t_b"):
        assert sum(getattr(r, col) for r in rows) == NATIONAL_BUDGET
    total = sum(r.population for r in rows)
    for r in rows:
        quota = r.population / total * NATIONAL_LETTERS
        assert r.letters in (math.floor(quota), math.ceil(quota))
        assert r.share == pytest.approx(r.population / total, abs=6e-5)


def test_size_class_thresholds():
    assert size_class(19999) == "small"
    assert size_class(20000) == "medium"
    assert size_class(100000) == "large"
    with pytest.raises(ValueError):
        size_class(5, (10, 10))


def test_adams_small_example():
    budgets, gamma = adams([1.2, 2.8], [5, 5], [1, 1], 4)
    assert budgets == [1, 3]
    assert math.ceil(gamma * 2.8 - 1e-12) == 3


def test_adams_single_group_and_bounds():
    assert adams([3.5], [7], [2], 5)[0] == [5]
    with pytest.raises(BudgetOutOfRange):
        adams([1.0, 1.0], [2, 2], [1, 1], 5)
    with pytest.raises(BudgetOutOfRange):
        adams([1.0, 1.0], [2, 2], [2, 1], 2)


@given(st.lists(st.tuples(st.floats(0.05, 5.0), st.integers(1, 6)), min_size=1, max_size=6),
       st.data())
def test_adams_properties(groups, data):
    widths = [w for w, _ in groups]
    n_g = [n for _, n in groups]
    t_min = [data.draw(st.integers(1, n)) for n in n_g]
    t = data.draw(st.integers(sum(t_min), sum(n_g)))
    budgets, _ = adams(widths, n_g, t_min, t)
    assert sum(budgets) == t
    assert all(lo <= b <= hi for b, lo, hi in zip(budgets, t_min, n_g))
    assert adams(widths, n_g, t_min, t)[0] == budgets


@given(st.lists(st.floats(0.001, 1.0), min_size=1, max_size=12), st.integers(1, 5000),
       st.integers(0, 10**6))
def test_letters_per_group_rounds_each_quota(raw, letters, seed):
    shares = np.array(raw) / sum(raw)
    from outreach.apportion import Group

    groups = [Group(("S", "small"), (k,), float(s)) for k, s in enumerate(shares)]
    out = letters_per_group(groups, letters, seed)
    assert sum(out) == letters
    for v, s in zip(out, shares):
        assert math.floor(s * letters - 1e-9) <= v <= math.ceil(s * letters + 1e-9)
    assert letters_per_group(groups, letters, seed) == out


def test_letters_per_group_is_unbiased():
    from outreach.apportion import Group

    shares = np.array([0.13, 0.29, 0.58])
    groups = [Group(("S", "small"), (k,), float(s)) for k, s in enumerate(shares)]
    draws = np.array([letters_per_group(groups, 7, seed) for seed in range(4000)])
    assert np.allclose(draws.mean(axis=0), shares * 7, atol=0.05)


def test_group_orders_and_partitions():
    cities = [City("a", "a", 500, 250, state="B"), City("b", "b", 50000, 250, state="A"),
              City("c", "c", 200000, 20000, state="A"), City("d", "d", 900, 250, state="A")]
    inst = validate(cities, 20, 1)
    gs = group(inst)
    assert [g.key for g in gs] == [("A", "small"), ("A", "medium"), ("A", "large"), ("B", "small")]
    assert sorted(i for g in gs for i in g.members) == list(range(4))
    assert sum(g.share for g in gs) == pytest.approx(1.0)
    assert gs[0].label == "A (Small)"


def _multi_group(rng):
    """Random roster with 2-3 states in which every group's letter quota is at least one."""
    while True:
        inst = _draw_roster(rng)
        if min(g.share for g in group(inst)) * inst.letters >= 1.0:
            return inst


def _draw_roster(rng):
    cities = []
    for s in range(int(rng.integers(2, 4))):
        k = int(rng.integers(2, 7))
        pops = np.exp(rng.uniform(np.log(200), np.log(400000), k))
        for p in np.round(pops):
            cid = f"S{s}-{len(cities)}"
            cities.append(City(cid, cid, float(p), cap_for(float(p)), state=f"S{s}"))
    return validate(cities, int(rng.integers(100, 400)), 1)


def test_random_multi_group_fixtures():
    rng = np.random.default_rng(5)
    for trial in range(100):
        inst = _multi_group(rng)
        groups = group(inst)
        lg = letters_per_group(groups, inst.letters, seed=trial)
        t_min = [group_min_t(group_instance(inst, g, l), "greedy-equal") for g, l in zip(groups, lg)]
        lo, hi = max(sum(t_min), 1), sum(g.n for g in groups)
        t = int(rng.integers(lo, hi + 1))
        p = apportion_t(inst, groups, lg, t, t_min=t_min, method="greedy-equal")
        assert sum(p.budgets) == t and sum(p.letters) == inst.letters
        for g, b, m in zip(groups, p.budgets, t_min):
            assert m <= b <= g.n
        again = apportion_t(inst, groups, lg, t, t_min=t_min, method="greedy-equal")
        assert again.budgets == p.budgets


def test_synthetic_national_plan_and_report():
    inst = synthetic_national()
    p = plan(inst, 20000, 80, method="greedy-equal", seed=0)
    assert len(p.groups) == 42
    assert sum(p.budgets) == 80 and sum(p.letters) == 20000
    rows = local_vs_global_report(p)
    assert len(rows) == 42
    for r, tg in zip(rows, p.budgets):
        assert r.single == (tg == 1)
        assert r.factor >= 1.0
    text = ratio_report_csv(rows)
    assert text.count("\n") == 43
    assert "S00 (Small)" in p.to_csv(inst)


def test_single_group_local_target_is_all_letters():
    cities = [City(f"c{i}", f"c{i}", p, cap_for(p), state="X") for i, p in enumerate([300, 800, 2000])]
    inst = validate(cities, 60, 1)
    p = plan(inst, 60, 1, method="greedy-equal")
    assert p.budgets == [1]
    assert np.allclose(p.local_targets[0].tau, 60)
