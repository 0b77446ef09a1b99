import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import minimize

from conftest import random_scenario, two_user_scenario
from nomapa.noma_rates import DecodingOrder, sum_rate, user_rates
from nomapa.solvers import (
    Infeasible,
    RateProfileObjective,
    SumRateObjective,
    WsrObjective,
    grid_oracle,
    project_feasible,
)


def _slsqp_projection(target, floors, order, s):
    """Independent reference: SLSQP on the Euclidean distance in watts, variables scaled to the box."""
    scale = s.p_cap
    unit = float(np.max(scale)) ** 2

    def rates(z):
        return user_rates(z * scale, order, s)

    best = None
    for x0 in (np.full(s.size, 0.5), np.full(s.size, 0.9), np.clip(target / scale, 0, 1)):
        res = minimize(
            lambda z: float(np.sum((z * scale - target) ** 2)) / unit,
            x0,
            method="SLSQP",
            bounds=[(0.0, 1.0)] * s.size,
            constraints=[{"type": "ineq", "fun": lambda z: rates(z) - floors}],
            options={"ftol": 1e-14, "maxiter": 500},
        )
        if res.success and np.all(rates(res.x) >= floors - 1e-9):
            if best is None or res.fun < best.fun:
                best = res
    return best.x * scale


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**31))
def test_projection_matches_slsqp(seed):
    rng = np.random.default_rng(seed)
    s = random_scenario(rng, 2)
    order = DecodingOrder((1, 0))
    floors = rng.uniform(0.05, 0.3) * s.max_rates
    target = rng.uniform(0.0, 1.0, 2) * s.p_cap * 0.2
    p = project_feasible(target, floors, order, s)
    assert np.all(user_rates(p, order, s) >= floors - 1e-9)
    assert np.all(p >= 0) and np.all(p <= s.p_cap * (1 + 1e-12))
    ref = _slsqp_projection(target, floors, order, s)
    d_p = np.linalg.norm(p - target)
    d_ref = np.linalg.norm(ref - target)
    assert d_p <= d_ref + 1e-6 * np.max(s.p_cap)


def test_feasible_point_is_returned_unchanged():
    s = two_user_scenario()
    p = 0.5 * s.p_cap
    floors = 0.5 * user_rates(p, DecodingOrder((1, 0)), s)
    np.testing.assert_array_equal(project_feasible(p, floors, DecodingOrder((1, 0)), s), p)


def test_box_clipping_when_floors_are_loose():
    s = two_user_scenario()
    p = np.array([-1.0, 2.0]) * s.p_cap
    out = project_feasible(p, 0.0, None, s)
    np.testing.assert_array_equal(out, [0.0, s.p_cap[1]])


def test_projection_is_idempotent():
    s = random_scenario(np.random.default_rng(7), 3)
    order = DecodingOrder.reverse(3)
    floors = 0.15 * s.max_rates
    p = project_feasible(np.zeros(3), floors, order, s)
    np.testing.assert_array_equal(project_feasible(p, floors, order, s), p)


def test_projection_raises_when_floors_are_infeasible():
    s = two_user_scenario()
    with pytest.raises(Infeasible):
        project_feasible(np.zeros(2), s.max_rates, None, s)
    with pytest.raises(ValueError):
        project_feasible(np.zeros(3), 0.0, None, s)


def _brute(s, fn, n):
    axes = [np.linspace(0.0, c, n) for c in s.p_cap]
    best, arg = -np.inf, None
    for p in itertools.product(*axes):
        v = fn(np.array(p))
        if v > best:
            best, arg = v, np.array(p)
    return best, arg


@pytest.mark.parametrize("k", [1, 2, 3])
def test_grid_oracle_matches_brute_force(k):
    s = random_scenario(np.random.default_rng(k), k)
    n = 15
    res = grid_oracle(s, SumRateObjective(), n)
    val, arg = _brute(s, lambda p: float(sum_rate(p, s)), n)
    assert res.value == val
    np.testing.assert_array_equal(res.p, arg)
    assert res.feasible and res.lipschitz_gap > 0


def test_grid_oracle_weighted_and_profile_objectives():
    s = random_scenario(np.random.default_rng(9), 2)
    order = DecodingOrder.identity(2)
    w = (0.3, 0.7)
    res = grid_oracle(s, WsrObjective(w, order), 20)
    val, _ = _brute(s, lambda p: float(user_rates(p, order, s) @ np.array(w)), 20)
    assert res.value == pytest.approx(val, abs=1e-12)
    tau = 0.5 * s.max_rates[1]
    prof = grid_oracle(s, RateProfileObjective((tau,), order), 20)

    def f(p):
        r = user_rates(p, order, s)
        return r[0] if r[1] >= tau else -np.inf

    assert prof.value == pytest.approx(_brute(s, f, 20)[0], abs=1e-12)
    none = grid_oracle(s, RateProfileObjective((2 * s.max_rates[1],), order), 10)
    assert not none.feasible and none.value == -np.inf


def test_grid_oracle_limits():
    s = random_scenario(np.random.default_rng(0), 4)
    with pytest.raises(ValueError):
        grid_oracle(s, SumRateObjective(), 10)
    with pytest.raises(ValueError):
        grid_oracle(s.subset([0, 1]), SumRateObjective(), 1)
