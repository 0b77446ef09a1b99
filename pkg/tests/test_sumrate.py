import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_scenario, two_user_scenario
from nomapa.noma_rates import DecodingOrder, Scenario, sum_rate, user_rates
from nomapa.pa_model import PaModel
from nomapa.solvers import Infeasible, SolverSettings, SumRateObjective, grid_oracle, sum_rate_maximize
from nomapa.units import watts_to_dbm


def test_two_user_reference_optimum():
    s = two_user_scenario()
    rep = sum_rate_maximize(None, s)
    assert rep.converged and rep.info["inner"][0] == "closed_form"
    np.testing.assert_allclose(watts_to_dbm(rep.p_star), [25.807, 25.807], atol=1e-3)
    assert rep.objective * s.bandwidth == pytest.approx(2.5045e8, rel=1e-4)
    rates = user_rates(rep.p_star, DecodingOrder((1, 0)), s) * s.bandwidth
    np.testing.assert_allclose(rates, [1.9226e8, 0.5819e8], rtol=1e-3)


def test_trace_is_increasing_ratio_sequence():
    rep = sum_rate_maximize(0.0, two_user_scenario())
    assert rep.trace[0] == 0.0
    assert np.all(np.diff(rep.trace) > 0)
    assert rep.residual <= 1e-4


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**31), st.integers(2, 3))
def test_unconstrained_beats_grid(seed, k):
    rng = np.random.default_rng(seed)
    s = random_scenario(rng, k)
    rep = sum_rate_maximize(None, s)
    oracle = grid_oracle(s, SumRateObjective(), 200 if k == 2 else 40)
    assert rep.objective >= oracle.value - 1e-9
    assert np.all(rep.p_star >= 0) and np.all(rep.p_star <= s.p_cap * (1 + 1e-12))


@pytest.mark.parametrize("alpha", [0.8, 1.0])
def test_sublinear_distortion_uses_endpoints(alpha):
    rng = np.random.default_rng(3)
    base = random_scenario(rng, 2)
    s = base.with_models(PaModel(0.004, alpha))
    rep = sum_rate_maximize(None, s)
    oracle = grid_oracle(s, SumRateObjective(), 300)
    assert rep.objective >= oracle.value - 1e-9
    assert np.all(np.isclose(rep.p_star, 0.0) | np.isclose(rep.p_star, s.p_cap))


def test_ideal_pa_transmits_at_full_power():
    s = two_user_scenario().ideal()
    rep = sum_rate_maximize(None, s)
    np.testing.assert_allclose(rep.p_star, s.p_max)


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2**31), st.floats(0.05, 0.45))
def test_floors_respected_and_near_grid(seed, frac):
    rng = np.random.default_rng(seed)
    s = random_scenario(rng, 2)
    order = DecodingOrder((1, 0))
    floors = frac * s.max_rates
    try:
        rep = sum_rate_maximize(floors, s, order=order)
    except Infeasible:
        return
    rates = user_rates(rep.p_star, order, s)
    assert np.all(rates >= floors - 1e-7)
    # brute force over the grid points that meet the floors
    axes = [np.linspace(0, c, 300) for c in s.p_cap]
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    ok = np.all(user_rates(mesh, order, s) >= floors, axis=-1)
    if np.any(ok):
        assert rep.objective >= float(np.max(sum_rate(mesh, s)[ok])) - 1e-6


def test_infeasible_floors():
    s = two_user_scenario()
    with pytest.raises(Infeasible):
        sum_rate_maximize([s.max_rates[0] + 1.0, 0.0], s)
    with pytest.raises(Infeasible):
        sum_rate_maximize([0.9 * s.max_rates[0], 0.9 * s.max_rates[1]], s, order=DecodingOrder((1, 0)))


def test_floor_validation():
    s = two_user_scenario()
    with pytest.raises(ValueError):
        sum_rate_maximize([1.0, 2.0, 3.0], s)
    with pytest.raises(ValueError):
        sum_rate_maximize(-1.0, s)


def test_subgradient_and_barrier_paths_agree():
    s = two_user_scenario()
    order = DecodingOrder((1, 0))
    floors = np.array([2.0, 2.0])
    a = sum_rate_maximize(floors, s, order=order)
    b = sum_rate_maximize(floors, s, SolverSettings(subgradient_steps=1), order=order)
    assert "barrier" in b.info["inner"]
    assert a.objective == pytest.approx(b.objective, abs=1e-6)


def test_more_users_never_lower_the_optimum():
    rng = np.random.default_rng(11)
    s = random_scenario(rng, 3, heterogeneous=False)
    sub = Scenario(s.gains[:2], s.models[:2], s.noise_power, s.p_max[:2], s.bandwidth)
    assert sum_rate_maximize(None, s).objective >= sum_rate_maximize(None, sub).objective - 1e-12
