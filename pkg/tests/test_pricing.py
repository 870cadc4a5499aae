import itertools

import numpy as np
import pytest

from oracles import best_weighted, integral_allocations, random_instance
from outreach.errors import NodeBudgetExhausted
from outreach.model import make_instance, support
from outreach.pricing import (DualPoint, best_on_support, deviation, price_exact, price_proportional,
                              price_relaxed)
from outreach.targets import solve_kappa


def _support_enumeration(inst, t, tau, w, y, scope):
    best = -np.inf
    for k in range(1, t + 1):
        for sel in itertools.combinations(range(inst.n), k):
            res = best_on_support(sel, inst.letters, w, tau, inst.u)
            if res is not None:
                a = res[0]
                best = max(best, y + w @ a - deviation(a, tau, scope))
    return best


def test_exact_matches_enumeration():
    rng = np.random.default_rng(1)
    for _ in range(150):
        inst = random_instance(rng, 6, 10)
        t = int(rng.integers(1, inst.n + 1))
        w = rng.random(inst.n)
        col = price_exact(inst, t, DualPoint(0.5, w))
        ref = best_weighted(inst, t, w)
        if ref == -np.inf:
            assert col is None
            continue
        assert col.value == pytest.approx(ref, abs=1e-12)
        assert col.reduced_value == pytest.approx(ref - 0.5)
        a = col.allocation
        assert a.sum() == inst.letters and len(support(a)) <= t
        assert np.all(a == np.round(a)) and np.all(a <= inst.u)


def test_exact_handles_fractional_caps():
    inst = make_instance([1, 1, 2], [1.5, 1.5, 2.7], 4)
    col = price_exact(inst, 3, DualPoint(0.0, np.array([1.0, 0.5, 0.2])))
    assert list(col.allocation) == [1, 1, 2]


def test_relaxed_dominates_exact():
    rng = np.random.default_rng(2)
    for _ in range(150):
        inst = random_instance(rng, 6, 12)
        t = int(rng.integers(1, inst.n + 1))
        w = rng.random(inst.n)
        ex = price_exact(inst, t, DualPoint(0.0, w))
        rel = price_relaxed(inst, t, DualPoint(0.0, w))
        if ex is None:
            continue
        assert rel.value >= ex.value - 1e-9
        a = rel.allocation
        assert len(support(a)) <= t + 1
        assert rel.bound_tag == ("within_t" if len(support(a)) <= t else "within_t_plus_1")
        assert a.sum() == pytest.approx(inst.letters) and np.all(a == np.round(a))
        assert np.all(a <= inst.u + 1e-9)


def test_proportional_zero_deviation_fixed_point():
    inst = make_instance([1, 1, 2], [3, 3, 6], 6)
    tau = np.array([1.5, 1.5, 3.0])
    col = price_proportional(inst, 3, tau, DualPoint(0.0, np.zeros(3)))
    assert col.value == pytest.approx(0.0, abs=1e-12)
    assert np.allclose(col.allocation, tau)


def test_proportional_single_city_closed_form():
    inst = make_instance([1, 3], [10, 10], 10)
    tau = np.array([4.0, 7.0])
    y, w = 0.2, np.array([0.0, 0.3])
    col = price_proportional(inst, 1, tau, DualPoint(y, w))
    assert np.allclose(col.allocation, [0, 10])
    assert col.value == pytest.approx(y + 10 * 0.3 - abs(10 / 7 - 1))


@pytest.mark.parametrize("scope", ["selected_only", "all_cities"])
def test_proportional_matches_support_enumeration(scope):
    rng = np.random.default_rng(3)
    for _ in range(80):
        inst = random_instance(rng, 5, 10, letters_min=3)
        low = int(np.ceil(sum(inst.fair_share / inst.u) - 1e-12))
        t = int(rng.integers(low, inst.n + 1))
        tau = solve_kappa(inst, "sqrt", t).tau
        w = rng.random(inst.n) * 0.2
        col = price_proportional(inst, t, tau, DualPoint(0.1, w), scope=scope)
        ref = _support_enumeration(inst, t, tau, w, 0.1, scope)
        assert col.exact and col.gap == 0
        assert col.value == pytest.approx(ref, abs=1e-6)
        assert col.value == pytest.approx(0.1 + w @ col.allocation - deviation(col.allocation, tau, scope))
        assert len(support(col.allocation)) <= t


def test_inner_greedy_beats_grid():
    rng = np.random.default_rng(4)
    for _ in range(40):
        u = rng.integers(2, 8, 3).astype(float)
        letters = float(rng.integers(1, int(u.sum()) + 1))
        tau = rng.uniform(0.5, 1.0, 3) * u
        w = rng.random(3) * 0.5
        a, val = best_on_support([0, 1, 2], letters, w, tau, u)
        step = letters / 1000
        a0, a1 = np.meshgrid(np.arange(0, letters + step / 2, step), np.arange(0, letters + step / 2, step))
        a2 = letters - a0 - a1
        ok = (a0 <= u[0]) & (a1 <= u[1]) & (a2 >= 0) & (a2 <= u[2] + 1e-12)
        vals = (w[0] * a0 + w[1] * a1 + w[2] * a2
                - np.abs(a0 / tau[0] - 1) - np.abs(a1 / tau[1] - 1) - np.abs(a2 / tau[2] - 1))
        if not ok.any():
            continue
        best = vals[ok].max()
        assert val >= best - 1e-9
        assert val == pytest.approx(w @ a - np.abs(a / tau - 1).sum())


def test_node_budget():
    inst = make_instance(list(range(1, 11)), [20] * 10, 20)
    tau = solve_kappa(inst, "sqrt", 5).tau
    dual = DualPoint(0.0, np.linspace(0.01, 0.05, 10))
    full = price_proportional(inst, 5, tau, dual)
    assert full.exact and full.nodes > 5
    col = price_proportional(inst, 5, tau, dual, node_budget=5)
    assert not col.exact and col.nodes == 5
    assert col.value <= full.value + 1e-12
    assert col.value + col.gap >= full.value - 1e-9
    with pytest.raises(NodeBudgetExhausted) as err:
        price_proportional(inst, 5, tau, dual, node_budget=5, strict=True)
    assert err.value.incumbent is not None
    with pytest.raises(NodeBudgetExhausted):
        price_proportional(inst, 5, tau, dual, node_budget=1)


def test_negative_duals_rejected():
    with pytest.raises(ValueError):
        DualPoint(0.0, [-1.0])
