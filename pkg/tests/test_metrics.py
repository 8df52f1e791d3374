import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from fflm.backend import TokenProbSeries
from fflm.errors import InvalidWeightsError, LengthMismatchError
from fflm.extraction import PairProbBundle
from fflm.metrics import (
    AblationFlags,
    DeltaTriple,
    MetricWeights,
    avg_logprob,
    cop,
    delta_cond_raw,
    delta_prior_raw,
    delta_weighted,
    fflm,
    harim,
    score_pair,
)

# frozen from a 30-digit mpmath recomputation: exp(0.5) * ln 2
EXP_HALF_LN2 = 1.142806500315004


@pytest.mark.parametrize(
    "a, b, expected",
    [([0.5, 0.8], [0.25, 0.8], 0.125), ([0.3, 0.3], [0.3, 0.3], 0.0), ([0.1], [0.9], -0.8)],
)
def test_delta_prior_raw(a, b, expected):
    assert delta_prior_raw(a, b) == pytest.approx(expected, abs=1e-12)


@pytest.mark.parametrize(
    "a, b, expected", [([0.9], [0.9], 0.0), ([0.6, 0.4], [0.8, 0.6], -0.2)]
)
def test_delta_cond_raw(a, b, expected):
    assert delta_cond_raw(a, b) == pytest.approx(expected, abs=1e-12)


def test_delta_cond_raw_antisymmetric():
    a, b = [0.6, 0.4, 0.05], [0.8, 0.6, 0.3]
    assert delta_cond_raw(b, a) == -delta_cond_raw(a, b)


@pytest.mark.parametrize(
    "a, b, expected",
    [([0.5], [0.25], EXP_HALF_LN2), ([0.7, 0.2], [0.7, 0.2], 0.0), ([0.5, 0.8], [0.25, 0.8], EXP_HALF_LN2 / 2)],
)
def test_delta_weighted(a, b, expected):
    assert delta_weighted(a, b) == pytest.approx(expected, abs=1e-12)


def test_fflm_combination():
    d = DeltaTriple(0.2, 0.1, 0.4)
    assert fflm(d, MetricWeights(0.25, 0.25, 0.5)) == pytest.approx(0.275, abs=1e-15)
    assert fflm(d, MetricWeights(1, 0, 0)) == 0.2
    assert fflm(DeltaTriple(0, 0, 0), MetricWeights(0.3, 0.3, 0.4)) == 0


@pytest.mark.parametrize("a, b, expected", [([0.5], [0.25], math.log(2)), ([0.25], [0.5], -math.log(2)), ([0.4], [0.4], 0.0)])
def test_cop(a, b, expected):
    assert cop(a, b) == pytest.approx(expected, abs=1e-12)


@pytest.mark.parametrize("a, b, expected", [([0.6], [0.5], 0.36), ([1.0], [0.3], 0.0), ([0.5, 0.5], [0.5, 0.5], 0.5)])
def test_harim(a, b, expected):
    assert harim(a, b) == pytest.approx(expected, abs=1e-12)


@pytest.mark.parametrize(
    "p, expected", [([1.0, 1.0], 0.0), ([math.exp(-1), math.exp(-3)], -2.0), ([0.5], -math.log(2))]
)
def test_avg_logprob(p, expected):
    assert avg_logprob(p) == pytest.approx(expected, abs=1e-12)


@pytest.mark.parametrize("fn", [delta_prior_raw, delta_cond_raw, delta_weighted, cop, harim])
def test_length_mismatch(fn):
    with pytest.raises(LengthMismatchError):
        fn([0.5, 0.5], [0.5])


@pytest.mark.parametrize(
    "w", [(0.5, 0.5, 0.5), (-0.1, 0.6, 0.5), (1.2, -0.1, -0.1), (float("nan"), 0.5, 0.5)]
)
def test_invalid_weights(w):
    with pytest.raises(InvalidWeightsError):
        MetricWeights(*w)


def test_weights_parse():
    assert MetricWeights.parse("0.25,0.25,0.5") == MetricWeights(0.25, 0.25, 0.5)
    with pytest.raises(InvalidWeightsError):
        MetricWeights.parse("0.5,0.5")
    with pytest.raises(InvalidWeightsError):
        MetricWeights.parse("a,b,c")


def test_clamping_keeps_everything_finite():
    zeros, ones = [0.0, 0.0], [1.0, 1.0]
    for value in (delta_weighted(zeros, ones), delta_weighted(ones, zeros), cop(zeros, ones), avg_logprob(zeros)):
        assert math.isfinite(value)


# -- oracle equivalence ---------------------------------------------------------

def random_vectors(rng, count):
    for _ in range(count):
        n = int(rng.integers(1, 65))
        yield rng.uniform(1e-6, 1, n), rng.uniform(1e-6, 1, n)


def test_oracle_equivalence_random_vectors():
    rng = np.random.default_rng(2024)
    for a, b in random_vectors(rng, 1000):
        la, lb = a.tolist(), b.tolist()
        assert abs(delta_prior_raw(a, b) - oracles.delta_raw(la, lb)) <= 1e-12
        assert abs(delta_cond_raw(a, b) - oracles.delta_raw(la, lb)) <= 1e-12
        assert abs(delta_weighted(a, b) - oracles.delta_weighted(la, lb)) <= 1e-12
        assert abs(cop(a, b) - oracles.delta_log(la, lb)) <= 1e-12
        assert abs(harim(a, b) - oracles.harim(la, lb)) <= 1e-12
        assert abs(avg_logprob(a) - oracles.avg_logprob(la)) <= 1e-12


# -- properties ------------------------------------------------------------------

probs = st.floats(min_value=1e-6, max_value=1.0)
vec_pair = st.integers(1, 32).flatmap(lambda n: st.tuples(st.lists(probs, min_size=n, max_size=n), st.lists(probs, min_size=n, max_size=n)))


@settings(max_examples=200, deadline=None)
@given(vec_pair)
def test_sign_symmetry(pair):
    a, b = pair
    assert delta_prior_raw(a, b) == pytest.approx(-delta_prior_raw(b, a), abs=1e-15)
    assert delta_cond_raw(a, b) == pytest.approx(-delta_cond_raw(b, a), abs=1e-15)
    assert cop(a, b) == pytest.approx(-cop(b, a), abs=1e-12)


@settings(max_examples=200, deadline=None)
@given(st.lists(probs, min_size=1, max_size=32))
def test_zero_fixed_point(a):
    assert delta_prior_raw(a, a) == 0
    assert delta_weighted(a, a) == 0
    assert cop(a, a) == 0
    assert avg_logprob([1.0] * len(a)) == 0


@settings(max_examples=200, deadline=None)
@given(vec_pair, st.data())
def test_delta_weighted_decreases_in_other(pair, data):
    a, b = pair
    i = data.draw(st.integers(0, len(b) - 1))
    if b[i] >= 0.999:
        return
    bumped = list(b)
    bumped[i] = data.draw(st.floats(min_value=b[i] * 1.001 + 1e-9, max_value=1.0))
    assert delta_weighted(a, bumped) < delta_weighted(a, b)


deltas = st.floats(min_value=-50, max_value=50)


@settings(max_examples=200, deadline=None)
@given(deltas, deltas, deltas)
def test_fflm_linear_in_each_component(x, y, z):
    d = DeltaTriple(x, y, z)
    for k, w in enumerate([MetricWeights(1, 0, 0), MetricWeights(0, 1, 0), MetricWeights(0, 0, 1)]):
        doubled = list(d.as_tuple())
        doubled[k] *= 2
        assert fflm(DeltaTriple(*doubled), w) == 2 * fflm(d, w)


# -- score_pair -------------------------------------------------------------------

def _series(logprobs, prefix):
    return TokenProbSeries([f"{prefix}{i}" for i in range(len(logprobs))], logprobs)


def random_bundle(rng):
    m, n = int(rng.integers(1, 20)), int(rng.integers(1, 60))
    y = lambda: _series(np.log(rng.uniform(1e-6, 1, m)).tolist(), "y")  # noqa: E731
    x = lambda: _series(np.log(rng.uniform(1e-6, 1, n)).tolist(), "x")  # noqa: E731
    return PairProbBundle(y(), y(), y(), x(), x())


def test_score_pair_default_matches_oracle():
    rng = np.random.default_rng(7)
    w = MetricWeights(0.2, 0.3, 0.5)
    for _ in range(100):
        b = random_bundle(rng)
        p = {k: np.exp(getattr(b, k).logprobs).tolist() for k in ("p_y_lm", "p_y_s2s", "p_y_pref", "p_x_lm", "p_x_s2s")}
        s = score_pair(b, w)
        expect = (
            oracles.delta_weighted(p["p_y_s2s"], p["p_y_lm"]),
            oracles.delta_weighted(p["p_x_s2s"], p["p_x_lm"]),
            oracles.delta_weighted(p["p_y_s2s"], p["p_y_pref"]),
        )
        assert s.deltas_weighted.as_tuple() == pytest.approx(expect, abs=1e-12)
        assert s.fflm == pytest.approx(0.2 * expect[0] + 0.3 * expect[1] + 0.5 * expect[2], abs=1e-12)
        assert s.fflm == fflm(s.deltas_weighted, w)
        assert s.cop == pytest.approx(oracles.delta_log(p["p_y_s2s"], p["p_y_pref"]), abs=1e-12)
        assert s.harim == pytest.approx(oracles.harim(p["p_y_s2s"], p["p_y_lm"]), abs=1e-12)
        assert s.avg_logprob == pytest.approx(oracles.avg_logprob(p["p_y_s2s"]), abs=1e-12)


@pytest.mark.parametrize(
    "use_log, use_w, oracle_fn, form",
    [
        (True, True, oracles.delta_weighted, "weighted-log"),
        (True, False, oracles.delta_log, "log"),
        (False, True, oracles.delta_weighted_raw, "weighted-raw"),
        (False, False, oracles.delta_raw, "raw"),
    ],
)
def test_ablation_forms(use_log, use_w, oracle_fn, form):
    rng = np.random.default_rng(17)
    for _ in range(50):
        b = random_bundle(rng)
        p = {k: np.exp(getattr(b, k).logprobs).tolist() for k in ("p_y_lm", "p_y_s2s", "p_y_pref", "p_x_lm", "p_x_s2s")}
        s = score_pair(b, ablation=AblationFlags(use_log, use_w))
        assert s.deltas_weighted.form == form
        assert s.ablation.to_json() == {"use_log": use_log, "use_token_weights": use_w}
        expect = (
            oracle_fn(p["p_y_s2s"], p["p_y_lm"]),
            oracle_fn(p["p_x_s2s"], p["p_x_lm"]),
            oracle_fn(p["p_y_s2s"], p["p_y_pref"]),
        )
        assert s.deltas_weighted.as_tuple() == pytest.approx(expect, abs=1e-12)


def test_identical_series_give_zero_deltas():
    lp = np.log([0.2, 0.5, 0.9]).tolist()
    ys = _series(lp, "y")
    xs = _series([-1.0, -2.0], "x")
    s = score_pair(PairProbBundle(ys, ys, ys, xs, xs))
    assert s.deltas_raw.as_tuple() == (0.0, 0.0, 0.0)
    assert s.deltas_weighted.as_tuple() == (0.0, 0.0, 0.0)
    assert s.fflm == 0.0 and s.cop == 0.0
    assert s.harim == pytest.approx(np.mean([0.8, 0.5, 0.1]), abs=1e-12)
