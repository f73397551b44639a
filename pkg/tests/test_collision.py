import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from nxdga.collision import (CollisionParams, InvalidParams, exact_birthday, monte_carlo_curve,
                             monte_carlo_oracle, n_for_probability, p_any_dictionary,
                             p_t_collision, plan_table, stopping_times)


def test_classic_birthday_against_oracle():
    mc = monte_carlo_oracle(CollisionParams((365,), 2), 23, 10**6, seed=1)
    assert abs(mc.p - 0.5073) <= 0.003
    assert abs(p_t_collision(365, 23, 2) - 0.507) <= 0.02
    assert mc.stderr == pytest.approx(math.sqrt(mc.p * (1 - mc.p) / 10**6))


def test_exact_birthday_value():
    assert exact_birthday(365, 23) == pytest.approx(1 - np.prod([1 - i / 365 for i in range(23)]))
    assert exact_birthday(365, 23) == pytest.approx(0.5073, abs=1e-4)


def test_single_draw_cannot_collide():
    assert p_t_collision(100, 1, 2) == 0.0
    assert p_t_collision(100, 0, 2) == 0.0


def test_t3_sweep_against_oracle():
    L, t = 384, 3
    curve = monte_carlo_curve(CollisionParams((L,), t), 100, 10**5, seed=2)
    for n in range(10, 101):
        assert abs(p_t_collision(L, n, t) - curve[n]) <= 0.05, n


def test_saturation_flag():
    est = p_t_collision(10, 50, 2, full=True)
    assert est.p == 1.0 and est.saturated
    est = p_t_collision(1000, 10, 2, full=True)
    assert not est.saturated


def test_any_dictionary_forms():
    one = p_any_dictionary(CollisionParams((500,), 3), 60)
    assert one.sum_form == p_t_collision(500, 60, 3)
    assert one.product_form == pytest.approx(one.sum_form, rel=1e-12)
    p1 = p_t_collision(300, 40, 2)
    two = p_any_dictionary(CollisionParams((300, 300), 2), 40)
    assert two.sum_form == pytest.approx(min(2 * p1, 1.0))
    assert two.product_form == pytest.approx(1 - (1 - p1) ** 2)


def test_two_dictionary_product_form_against_oracle():
    params = CollisionParams((2450, 4387), 3)
    curve = monte_carlo_curve(params, 600, 10**5, seed=3)
    for n in range(0, 601, 20):
        assert abs(p_any_dictionary(params, n).product_form - curve[n]) <= 0.05, n


def test_planner_examples():
    assert abs(n_for_probability(365, 2, 0.5) - 23) <= 1
    assert n_for_probability(1, 2, 0.99) == 2
    n = n_for_probability(384, 2, 0.5)
    assert abs(n - 1.18 * math.sqrt(384)) <= 2
    # the oracle agrees the planned n crosses one half
    assert monte_carlo_oracle(CollisionParams((384,), 2), n, 10**5, seed=4).p >= 0.45


def test_plan_table_rows():
    rows = plan_table(365, [2, 3], 0.5)
    assert [r[:3] for r in rows] == [(365, 2, n_for_probability(365, 2, 0.5)),
                                     (365, 3, n_for_probability(365, 3, 0.5))]


def test_oracle_trivial_cases():
    assert monte_carlo_oracle(CollisionParams((1,), 2), 2, 100, seed=0).p == 1.0
    assert monte_carlo_oracle(CollisionParams((10**6,), 2), 2, 10**5, seed=0).p <= 0.001


def test_oracle_deterministic():
    a = stopping_times(CollisionParams((50, 70), 3), 60, 5000, seed=9)
    b = stopping_times(CollisionParams((50, 70), 3), 60, 5000, seed=9)
    assert np.array_equal(a, b)


def test_first_hit_matches_naive_count():
    rng = np.random.Generator(np.random.PCG64(0))
    draws = rng.integers(0, 6, size=(300, 15))
    from nxdga.collision import _first_hit

    got = _first_hit(draws, 3)
    for row, g in zip(draws, got):
        seen = {}
        want = 0
        for i, v in enumerate(row):
            seen[v] = seen.get(v, 0) + 1
            if seen[v] == 3:
                want = i + 1
                break
        assert g == want


@pytest.mark.parametrize("bad", [
    lambda: p_t_collision(0, 5, 2),
    lambda: p_t_collision(10, -1, 2),
    lambda: p_t_collision(10, 5, 1),
    lambda: n_for_probability(10, 2, 1.0),
    lambda: n_for_probability(10, 2, 0.0),
    lambda: CollisionParams((), 2),
    lambda: CollisionParams((5, 0), 2),
    lambda: monte_carlo_oracle(CollisionParams((5,), 2), 3, 0, seed=0),
])
def test_invalid_params(bad):
    with pytest.raises(InvalidParams):
        bad()


@given(st.integers(1, 5000), st.integers(0, 500), st.integers(2, 7))
def test_monotone(L, n, t):
    p = p_t_collision(L, n, t)
    assert 0.0 <= p <= 1.0
    assert p_t_collision(L, n + 1, t) >= p
    assert p_t_collision(L + 1, n, t) <= p
    assert p_t_collision(L, n, t + 1) <= p


@given(st.integers(1, 5000), st.integers(2, 7), st.floats(0.01, 0.99))
def test_planner_consistency(L, t, p):
    n = n_for_probability(L, t, p)
    assert p_t_collision(L, n, t) >= p
    assert n == 0 or p_t_collision(L, n - 1, t) < p


@pytest.mark.xfail(strict=True, reason=(
    "the approximation is asymptotic in L: for t=2 it drifts up to about 0.06 from the "
    "exact product at L around 50 and stays within 0.02 only from L of roughly 450 up"))
def test_agreement_with_exact_birthday_full_range():
    worst = max(abs(p_t_collision(L, n, 2) - exact_birthday(L, n))
                for L in range(50, 5001, 50) for n in range(0, L + 1, max(1, L // 200)))
    assert worst <= 0.02


def test_agreement_with_exact_birthday_large_dictionaries():
    worst = max(abs(p_t_collision(L, n, 2) - exact_birthday(L, n))
                for L in range(500, 5001, 250) for n in range(0, L + 1, max(1, L // 200)))
    assert worst <= 0.02
