import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_scenario, two_user_scenario
from nomapa.noma_rates import DecodingOrder, user_rates, weighted_sum_rate
from nomapa.pa_model import PaModel
from nomapa.solvers import (
    Infeasible,
    QuadraticTransform,
    WsrObjective,
    grid_oracle,
    sum_rate_maximize,
    wsr_maximize,
    wsr_maximize_multistart,
)
from nomapa.solvers.terms import Terms


def _fd(f, p, h):
    out = np.empty_like(p)
    for j in range(p.size):
        e = np.zeros_like(p)
        e[j] = h[j]
        out[j] = (f(p + e) - f(p - e)) / (2 * h[j])
    return out


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31), st.integers(2, 4))
def test_surrogate_gradient_matches_finite_differences(seed, k):
    rng = np.random.default_rng(seed)
    s = random_scenario(rng, k)
    w = rng.dirichlet(np.ones(k))
    qt = QuadraticTransform(w, Terms(s, DecodingOrder.reverse(k)))
    p0 = rng.uniform(0.2, 0.8, k) * s.p_cap
    gamma = qt.gamma_update(p0)
    y = qt.y_update(p0, gamma)
    p = rng.uniform(0.2, 0.8, k) * s.p_cap
    g = qt.grad(p, gamma, y)
    fd = _fd(lambda x: qt.value(x, gamma, y), p, 1e-5 * p)
    np.testing.assert_allclose(g, fd, rtol=1e-4, atol=1e-4 * np.max(np.abs(g)))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31), st.integers(2, 4))
def test_wsr_gradient_matches_finite_differences(seed, k):
    rng = np.random.default_rng(seed)
    s = random_scenario(rng, k)
    w = rng.dirichlet(np.ones(k))
    qt = QuadraticTransform(w, Terms(s, DecodingOrder.identity(k)))
    p = rng.uniform(0.2, 0.8, k) * s.p_cap
    fd = _fd(qt.wsr, p, 1e-5 * p)
    g = qt.wsr_grad(p)
    np.testing.assert_allclose(g, fd, rtol=1e-4, atol=1e-4 * np.max(np.abs(g)))


def test_surrogate_is_tight_at_its_auxiliaries():
    rng = np.random.default_rng(4)
    s = random_scenario(rng, 3)
    w = np.array([0.2, 0.3, 0.5])
    qt = QuadraticTransform(w, Terms(s, DecodingOrder.identity(3)))
    p = 0.4 * s.p_cap
    gamma = qt.gamma_update(p)
    y = qt.y_update(p, gamma)
    assert qt.value(p, gamma, y) == pytest.approx(qt.wsr(p), rel=1e-12)
    # any other auxiliary values give a lower bound
    for scale in (0.5, 0.9, 1.1, 2.0):
        assert qt.value(p, gamma * scale, y) <= qt.wsr(p) + 1e-12
        assert qt.value(p, gamma, y * scale) <= qt.wsr(p) + 1e-12


@pytest.mark.parametrize("seed", range(10))
def test_equal_weights_match_sum_rate(seed):
    rng = np.random.default_rng(seed)
    k = int(rng.integers(2, 5))
    s = random_scenario(rng, k)
    ref = sum_rate_maximize(None, s)
    rep = wsr_maximize(np.full(k, 1 / k), 0.0, None, s)
    assert rep.converged
    assert k * rep.objective == pytest.approx(ref.objective, abs=1e-6)
    assert rep.info["fixed_point"] < 1e-6


def test_weighted_sum_rate_is_reported_in_bits():
    s = two_user_scenario()
    w = np.array([0.3, 0.7])
    order = DecodingOrder((1, 0))
    rep = wsr_maximize(w, 0.0, order, s)
    assert rep.objective == pytest.approx(weighted_sum_rate(rep.p_star, w, order, s), rel=1e-12)
    assert np.all(np.diff(rep.trace) >= -1e-12)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**31))
def test_two_user_wsr_near_grid_oracle(seed):
    rng = np.random.default_rng(seed)
    s = random_scenario(rng, 2)
    w = rng.dirichlet(np.ones(2))
    order = DecodingOrder.identity(2)
    rep = wsr_maximize_multistart(w, 0.0, order, s)
    oracle = grid_oracle(s, WsrObjective(tuple(w), order), 300)
    assert rep.objective >= oracle.value - 1e-9


def test_single_user_reduces_to_point_to_point():
    s = two_user_scenario().subset([1])
    rep = wsr_maximize([1.0], 0.0, None, s)
    assert rep.p_star[0] == pytest.approx(s.p_cap[0], rel=1e-6)
    assert rep.objective == pytest.approx(s.max_rates[0], rel=1e-9)


@pytest.mark.parametrize("seed", range(4))
def test_floors_are_met(seed):
    rng = np.random.default_rng(seed + 100)
    s = random_scenario(rng, 3)
    floors = 0.2 * s.max_rates / 3
    order = DecodingOrder.reverse(3)
    w = np.array([0.5, 0.3, 0.2])
    rep = wsr_maximize_multistart(w, floors, order, s)
    rates = user_rates(rep.p_star, order, s)
    assert np.all(rates >= floors - 1e-9)
    unconstrained = wsr_maximize_multistart(w, 0.0, order, s)
    assert rep.objective <= unconstrained.objective + 1e-9


def test_infeasible_floors_raise():
    s = two_user_scenario()
    with pytest.raises(Infeasible):
        wsr_maximize([0.5, 0.5], s.max_rates, None, s)


def test_multistart_never_worse_than_single_start():
    rng = np.random.default_rng(11)
    s = random_scenario(rng, 4)
    w = np.array([0.1, 0.2, 0.3, 0.4])
    order = DecodingOrder.reverse(4)
    single = wsr_maximize(w, 0.0, order, s)
    multi = wsr_maximize_multistart(w, 0.0, order, s, n_random=3)
    assert multi.objective >= single.objective - 1e-12
    assert len(multi.info["starts"]) >= 2 + 4


def test_weight_validation():
    s = two_user_scenario()
    for w in ([0.5, 0.6], [1.0, 0.0], [1.0]):
        with pytest.raises(ValueError):
            wsr_maximize(w, 0.0, None, s)


def test_floors_need_superlinear_distortion():
    s = two_user_scenario().with_models(PaModel(0.004, 0.8))
    with pytest.raises(ValueError):
        wsr_maximize([0.5, 0.5], 0.1, None, s)
    # without floors the sublinear case still runs
    rep = wsr_maximize([0.5, 0.5], 0.0, None, s)
    assert math.isfinite(rep.objective)
