import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from subreg import Box, Polytope, Rng
from subreg.algorithms import (
    MetaFrankWolfe,
    OnlineGradientAscent,
    Random100,
    SurrogateGradientAscent,
    make_policy,
    offline_fw_maximize,
)
from subreg.objectives import CoverageObjective, coverage_generate, linear_objective, nqp_generate
from subreg.objectives.coverage import SURROGATE_RATIO, coverage_polytope
from subreg.online_linear import RftlState, rftl_feedback, rftl_select
from subreg.polytope import contains, diameter_upper_bound, linear_maximize, project, sample_uniform_many

UNIT2 = Polytope.from_box(Box.uniform(2, 0.0, 1.0))


class Recorder:
    """Objective wrapper that logs gradient query points."""

    def __init__(self, f):
        self.f = f
        self.points = []

    def gradient(self, x):
        self.points.append(np.array(x))
        return self.f.gradient(x)

    def stochastic_gradient(self, x, rng):
        self.points.append(np.array(x))
        return self.f.stochastic_gradient(x, rng)

    def __getattr__(self, name):
        return getattr(self.f, name)


def packing(seed, n=4, m=2):
    gen = np.random.default_rng(seed)
    return Polytope(gen.uniform(0, 1, (m, n)), np.ones(m), Box.uniform(n, 0.0, 1.0))


# --- Meta-Frank-Wolfe ---------------------------------------------------------------------


def test_meta_fw_first_play_is_anchor_and_k1_is_rftl():
    p = packing(0)
    mf = MetaFrankWolfe(p, 1, 0.2)
    s = RftlState.start(p, 0.2)
    np.testing.assert_array_equal(mf.play(), s.anchor_x0)
    gen = np.random.default_rng(0)
    for _ in range(10):
        c = gen.standard_normal(4)
        f = linear_objective(c, p.box)
        np.testing.assert_array_equal(mf.play(), rftl_select(s, p))
        mf.observe(f)
        s = rftl_feedback(s, c)


def test_meta_fw_plays_average_of_selections():
    mf = MetaFrankWolfe(UNIT2, 2, 1.0, anchor=[0.5, 0.5])
    mf.states[0] = rftl_feedback(mf.states[0], [-10.0, -10.0])
    mf.states[1] = rftl_feedback(mf.states[1], [10.0, 10.0])
    np.testing.assert_allclose(mf.play(), [0.5, 0.5])
    np.testing.assert_array_equal(mf._selections[0], [0.0, 0.0])
    np.testing.assert_array_equal(mf._selections[1], [1.0, 1.0])


def test_meta_fw_two_set_coverage_payoffs():
    f = CoverageObjective.from_incidence([1.0], [[True], [True]])
    mf = MetaFrankWolfe(UNIT2, 2, 1.0)
    x = mf.play()
    np.testing.assert_allclose(x, [0.5, 0.5])
    rec = Recorder(f)
    mf.observe(rec)
    np.testing.assert_array_equal(rec.points[0], [0.0, 0.0])
    np.testing.assert_allclose(rec.points[1], [0.25, 0.25])
    # closed form: grad_i = 1 - x_j
    np.testing.assert_allclose(mf.states[0].payoff_sum, [1.0, 1.0])
    np.testing.assert_allclose(mf.states[1].payoff_sum, [0.75, 0.75])


def test_meta_fw_linear_payoffs_are_constant_gradient():
    p = packing(1)
    c = np.array([1.0, -1.0, 2.0, 0.5])
    mf = MetaFrankWolfe(p, 3, 0.5)
    mf.play()
    mf.observe(linear_objective(c, p.box))
    for s in mf.states:
        np.testing.assert_array_equal(s.payoff_sum, c)


def test_meta_fw_query_count_and_validation():
    f, p = nqp_generate(4, 2, Rng(2))
    mf = MetaFrankWolfe(p, 5, 0.01)
    mf.play()
    rec = Recorder(f)
    mf.observe(rec)
    assert len(rec.points) == 5
    with pytest.raises(RuntimeError):
        mf.observe(f)
    with pytest.raises(ValueError):
        MetaFrankWolfe(p, 0, 0.1)
    with pytest.raises(ValueError):
        MetaFrankWolfe(p, 2, 0.1, stochastic=True)


def test_meta_fw_stochastic_draws_fresh_noise_per_step():
    f, p = nqp_generate(4, 2, Rng(3))
    mf = MetaFrankWolfe(p, 2, 0.01, stochastic=True, rng=Rng(4))
    for _ in range(2):
        mf.play()
        mf.observe(f)
    exact = MetaFrankWolfe(p, 2, 0.01)
    for _ in range(2):
        exact.play()
        exact.observe(f)
    assert not np.allclose(mf.states[0].payoff_sum, exact.states[0].payoff_sum)


@given(st.integers(0, 2**32 - 1), st.integers(1, 6))
def test_meta_fw_plays_stay_feasible(seed, k):
    f, p = nqp_generate(5, 2, Rng(seed))
    mf = MetaFrankWolfe(p, k, 0.05)
    for _ in range(5):
        assert contains(mf.play(), p, 1e-7)
        mf.observe(f)


# --- gradient ascent ----------------------------------------------------------------------


def test_oga_step_examples():
    oga = OnlineGradientAscent(UNIT2, math.sqrt(2), 1.0, x1=[0.5, 0.5])
    np.testing.assert_array_equal(oga.step([0.0, 0.0]), [0.5, 0.5])
    np.testing.assert_allclose(oga.step([1e-3, -2e-3]), [0.5 + 1e-3 * oga.step_size(2), 0.5 - 2e-3 * oga.step_size(2)])
    corner = OnlineGradientAscent(UNIT2, math.sqrt(2), 1.0, x1=[1.0, 1.0])
    np.testing.assert_array_equal(corner.step([1.0, 1.0]), [1.0, 1.0])
    with pytest.raises(ValueError):
        corner.step([np.nan, 0.0])


@given(st.floats(0.01, 10), st.floats(0.01, 10), st.integers(1, 10**6))
def test_oga_schedule_identity(D, G, t):
    oga = OnlineGradientAscent(UNIT2, D, G)
    assert oga.step_size(t) * G * math.sqrt(t) == pytest.approx(D, rel=1e-12)


def test_oga_eta_override_and_degenerate_constants():
    assert OnlineGradientAscent(UNIT2, 1.0, 1.0, eta=2.0).step_size(4) == pytest.approx(1.0)
    assert OnlineGradientAscent(UNIT2, 0.0, 1.0).step_size(1) == 0.0


def test_stochastic_oga_exact_gradient_matches_oga():
    f, p = nqp_generate(4, 2, Rng(5))
    a = OnlineGradientAscent(p, 1.0, f.grad_bound)
    b = OnlineGradientAscent(p, 1.0, f.grad_bound, stochastic=True, rng=Rng(6))
    assert b.kind == "stochastic_oga"
    g = f.gradient(a.play())
    np.testing.assert_array_equal(a.step(g), b.step(g))


def test_stochastic_step_is_unbiased_in_the_interior():
    f, p = nqp_generate(4, 2, Rng(7))
    x = project(np.full(4, 0.05), p)
    eta = 1e-4
    det = project(x + eta * f.gradient(x), p)
    rng = Rng(8)
    nxt = np.array([project(x + eta * f.stochastic_gradient(x, rng), p) for _ in range(10000)])
    assert np.linalg.norm(nxt.mean(axis=0) - det) <= 0.01 * np.linalg.norm(det - x)


def test_oga_plays_stay_feasible():
    f, p = nqp_generate(6, 2, Rng(9))
    oga = OnlineGradientAscent(p, diameter_upper_bound(p), f.grad_bound)
    for _ in range(30):
        assert contains(oga.play(), p, 1e-7)
        oga.observe(f)


# --- baselines ------------------------------------------------------------------------------


def test_random100_constant_objective_returns_first_sample():
    p = packing(10)
    const = linear_objective(np.zeros(4), p.box)
    pick = Random100(p, Rng(11)).play(const)
    np.testing.assert_array_equal(pick, sample_uniform_many(p, Rng(11), 100)[0])
    one = Random100(p, Rng(12), n_samples=1).play(const)
    np.testing.assert_array_equal(one, sample_uniform_many(p, Rng(12), 1)[0])
    with pytest.raises(ValueError):
        Random100(p, Rng(1)).play()
    with pytest.raises(ValueError):
        Random100(p, Rng(1), n_samples=0)


def test_random100_dominates_single_sample():
    box = Box.uniform(3, 0.0, 1.0)
    p = Polytope.from_box(box)
    f = linear_objective([1.0, 2.0, 3.0], box)
    best = np.array([f.value(Random100(p, Rng(13).child(i)).play(f)) for i in range(1000)])
    single = np.array([f.value(x) for x in sample_uniform_many(p, Rng(14), 1000)])
    qs = np.linspace(0.05, 0.95, 19)
    assert np.all(np.quantile(best, qs) >= np.quantile(single, qs))


def test_surrogate_step_in_smooth_region_matches_linear_ascent():
    f = coverage_generate(6, 10, 2, Rng(15))
    p = coverage_polytope(6, 2, Rng(16))
    x1 = np.full(6, 0.05)  # every load is at most 0.1
    slope = SURROGATE_RATIO * (f.incidence.astype(float) @ f.weights)
    sga = SurrogateGradientAscent(p, 1.0, 1.0, x1=x1)
    np.testing.assert_allclose(sga._ascent_direction(f), slope)
    oga = OnlineGradientAscent(p, 1.0, 1.0, x1=x1)
    sga.observe(f)
    oga.observe(linear_objective(slope, p.box))
    np.testing.assert_allclose(sga.play(), oga.play())
    sat = SurrogateGradientAscent(UNIT2, 1.0, 1.0, x1=[1.0, 1.0])
    sat.observe(CoverageObjective.from_incidence([1.0], [[True], [True]]))
    np.testing.assert_array_equal(sat.play(), [1.0, 1.0])


# --- offline Frank-Wolfe ----------------------------------------------------------------------


def test_offline_fw_linear_and_single_step():
    p = packing(17)
    c = np.array([0.3, 1.0, 0.2, 0.7])
    np.testing.assert_allclose(offline_fw_maximize(linear_objective(c, p.box), p, 7), linear_maximize(c, p))
    f = coverage_generate(4, 10, 2, Rng(18))
    np.testing.assert_array_equal(offline_fw_maximize(f, p, 1), linear_maximize(f.gradient(np.zeros(4)), p))
    with pytest.raises(ValueError):
        offline_fw_maximize(f, p, 0)


def test_offline_fw_against_grid():
    f = coverage_generate(3, 12, 2, Rng(19))
    p = coverage_polytope(3, 2, Rng(20))
    g = np.linspace(0.0, 1.0, 21)
    best = max(f.value(np.array(x)) for x in itertools.product(g, g, g) if contains(np.array(x), p))
    x = offline_fw_maximize(f, p, 100)
    assert contains(x, p, 1e-9)
    assert f.value(x) >= (1 - 1 / math.e) * best - 0.01


# --- factory ----------------------------------------------------------------------------------


def test_make_policy_defaults():
    p = packing(21)
    mf = make_policy("meta_fw", p, diameter=2.0, grad_bound=4.0, horizon=50, rng=Rng(1))
    assert mf.k == 8
    assert mf.states[0].eta == pytest.approx(2.0 / (4.0 * math.sqrt(50)))
    assert make_policy("stochastic_oga", p, diameter=1, grad_bound=1, horizon=5, rng=Rng(1)).stochastic
    assert isinstance(make_policy("surrogate_ga", p, diameter=1, grad_bound=1, horizon=5, rng=Rng(1)),
                      SurrogateGradientAscent)
    assert make_policy("random100", p, diameter=1, grad_bound=1, horizon=5, rng=Rng(1), n_samples=7).n_samples == 7
    with pytest.raises(ValueError, match="unknown policy"):
        make_policy("greedy", p, diameter=1, grad_bound=1, horizon=5, rng=Rng(1))
