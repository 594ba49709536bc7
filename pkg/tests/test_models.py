import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from spinesim.models import (ModelConfigError, NoClosedFormError, PiecewiseConstant,
                             build_model, division_rate, evolve_trait, lambda_factor,
                             mean_population, mean_population_mc, offspring_sample)
from spinesim.models.base import ModelSpec
from spinesim.streams import Stream

F = oracles.FROZEN

CONFIGS = {
    "yule": {"id": "yule", "b": 1.0},
    "linear_growth": {"id": "linear_growth", "a": 0.5, "alpha": 1.0},
    "exp_growth": {"id": "exp_growth", "a": 0.1, "alpha": 0.1},
    "exp_growth_env": {"id": "exp_growth", "a": 0.2,
                       "alpha": {"breaks": [1.0, 2.5], "values": [0.1, 0.4, 0.2]}},
    "parasite": {"id": "parasite", "g": 1.0, "sigma2": 0.25, "alpha": 1.0, "beta": 0.5},
    "parasite_limit": {"id": "parasite", "g": 0.5, "sigma2": 0.25, "alpha": 1.0, "beta": 0.5},
    "plasmid_bd": {"id": "plasmid_bd", "lam": 1.0, "mu": 0.5},
    "two_type_switch": {"id": "two_type_switch", "b0": 1.0, "b1": 0.3, "p": 0.2},
}


def models():
    return {k: build_model(v) for k, v in CONFIGS.items()}


# --- build_model ----------------------------------------------------------
def test_build_minimal_yule():
    m = build_model({"id": "yule", "b": 1, "m": 2})
    assert m.model_id == "yule" and m.mean_offspring(0) == 2


def test_parasite_needs_positive_beta():
    with pytest.raises(ModelConfigError, match="β must be > 0") as exc:
        build_model({"id": "parasite", "g": 1, "σ²": 0.5, "α": 1, "β": 0})
    assert exc.value.key == "beta"


def test_plasmid_needs_supercritical_rates():
    with pytest.raises(ModelConfigError, match="requires λ−μ>0"):
        build_model({"id": "plasmid_bd", "λ": 1, "μ": 2})


@pytest.mark.parametrize("cfg, key", [
    ({"id": "yule"}, "b"),
    ({"id": "yule", "b": 1, "c": 2}, "c"),
    ({"id": "nope"}, "id"),
    ({"id": "linear_growth", "a": -1, "alpha": 1}, "a"),
    ({"id": "two_type_switch", "b0": 1, "b1": 1, "p": 1.5}, "p"),
    ({"id": "parasite", "g": 1, "sigma2": 1, "alpha": 1, "beta": 1, "dt": 0.5}, "dt"),
    ({"id": "yule", "b": 1, "alpha": 1}, "alpha"),
])
def test_bad_configs_name_the_key(cfg, key):
    with pytest.raises(ModelConfigError) as exc:
        build_model(cfg)
    assert exc.value.key == key
    assert key in str(exc.value) or key == "id"


def test_models_are_immutable():
    m = build_model(CONFIGS["linear_growth"])
    with pytest.raises(Exception):
        m.a = 3


# --- division rate, offspring, motion -------------------------------------
def test_division_rates():
    assert division_rate(build_model({"id": "linear_growth", "a": 1, "alpha": 1}), 2, 0) == 2
    assert division_rate(build_model({"id": "parasite", "g": 1, "sigma2": 1, "alpha": 1,
                                      "beta": 0.5}), 0, 0) == 0.5
    assert division_rate(build_model({"id": "linear_growth", "a": 1, "alpha": 1}), 0) == 0
    env = build_model(CONFIGS["exp_growth_env"])
    assert division_rate(env, 2.0, 1.5) == pytest.approx(0.8)


def test_offspring_draws():
    lg = build_model({"id": "linear_growth", "a": 1, "alpha": 1})
    assert offspring_sample(lg, 4, Stream(0)) == (2, [2.0, 2.0])
    par = build_model(CONFIGS["parasite"])
    d = offspring_sample(par, 1.0, Stream(0), theta=0.3)
    assert d.count == 2 and d.children[0] == pytest.approx(0.3) and sum(d.children) == 1.0
    assert offspring_sample(build_model({"id": "yule", "b": 1}), 1.5, Stream(0)) == (2, [1.5, 1.5])


@given(x=st.integers(0, 500), seed=st.integers(0, 2 ** 32))
@settings(max_examples=60, deadline=None)
def test_plasmid_split_conserves_count(x, seed):
    d = build_model(CONFIGS["plasmid_bd"]).offspring_sample(x, Stream(seed))
    assert d.count == 2 and sum(d.children) == x and min(d.children) >= 0


@given(x=st.floats(0, 50), seed=st.integers(0, 2 ** 32))
@settings(max_examples=60, deadline=None)
def test_parasite_split_conserves_load(x, seed):
    d = build_model(CONFIGS["parasite"]).offspring_sample(x, Stream(seed))
    assert sum(d.children) == pytest.approx(x, abs=1e-12) and min(d.children) >= 0


def test_switch_offspring_flags():
    m = build_model(CONFIGS["two_type_switch"])
    draws = [m.offspring_sample(0, Stream(i)).children for i in range(4000)]
    flips = np.mean([c for pair in draws for c in pair])
    assert set(c for pair in draws for c in pair) <= {0, 1}
    assert abs(flips - 0.2) < 4 * math.sqrt(0.16 / 8000)


def test_deterministic_motions():
    lg = build_model({"id": "linear_growth", "a": 1, "alpha": 1})
    assert evolve_trait(lg, 1, 0, 2, Stream(0)).terminal == 3
    eg = build_model({"id": "exp_growth", "a": 0.1, "alpha": 0.1})
    assert evolve_trait(eg, 1, 0, 10, Stream(0)).terminal == pytest.approx(math.e, rel=1e-15)
    y = build_model({"id": "yule", "b": 1})
    assert evolve_trait(y, 2.5, 0, 4, Stream(0)).terminal == 2.5
    with pytest.raises(ValueError):
        evolve_trait(lg, 1, 2, 1, Stream(0))


def test_parasite_motion_mean():
    par = build_model(CONFIGS["parasite"])
    root = Stream.root(2)
    x = np.array([evolve_trait(par, 1.0, 0, 1, root.spawn(i)).terminal for i in range(10000)])
    assert x.min() >= 0
    assert abs(x.mean() - math.e) <= 3 * x.std(ddof=1) / math.sqrt(x.size)


def test_plasmid_motion_is_integer_and_unbiased():
    pl = build_model(CONFIGS["plasmid_bd"])
    root = Stream.root(3)
    x = np.array([evolve_trait(pl, 3, 0, 1, root.spawn(i)).terminal for i in range(5000)])
    assert x.dtype.kind == "i"
    # per-plasmid net growth lam - mu
    assert abs(x.mean() - 3 * math.exp(0.5)) <= 3 * x.std(ddof=1) / math.sqrt(x.size)


# --- mean growth ----------------------------------------------------------
def test_frozen_closed_form_values():
    lg = build_model({"id": "linear_growth", "a": 1, "alpha": 1})
    assert mean_population(lg, 1, 0, 1) == pytest.approx(F["linear_a1_x1_tau1"], rel=1e-14)
    assert mean_population(lg, 0, 0, 1) == pytest.approx(F["linear_a1_x0_tau1"], rel=1e-14)
    eg = build_model({"id": "exp_growth", "a": 0.1, "alpha": 0.1})
    assert mean_population(eg, 1, 0, 10) == pytest.approx(F["exp_a01_x1_tau10"], rel=1e-14)
    m = models()
    assert mean_population(m["parasite"], 0, 0, 1) == pytest.approx(F["parasite_x0_tau1"])
    assert mean_population(m["parasite_limit"], 1, 0, 1) == pytest.approx(
        F["parasite_limit_x1_tau1"], rel=1e-14)
    assert mean_population(m["two_type_switch"], 0, 0, 1) == pytest.approx(
        F["switch_x0_tau1"], rel=1e-13)
    assert mean_population(m["plasmid_bd"], 3, 0, 1) == pytest.approx(F["plasmid_x3_tau1"],
                                                                     rel=1e-14)


def test_parasite_limit_is_continuous_in_g():
    base = dict(CONFIGS["parasite_limit"])
    at = mean_population(build_model(base), 2.0, 0.3, 1.7)
    near = mean_population(build_model({**base, "g": 0.5 + 1e-7}), 2.0, 0.3, 1.7)
    assert near == pytest.approx(at, rel=1e-6)
    assert at == pytest.approx((1 + 1.0 * 2.0 * 1.4) * math.exp(0.5 * 1.4), rel=1e-14)


@pytest.mark.parametrize("name", sorted(CONFIGS))
def test_mean_is_one_on_empty_horizon(name):
    m = models()[name]
    for x in (0, 1, 3):
        assert mean_population(m, x, 2.5, 2.5) == 1.0


def test_times_must_be_ordered():
    with pytest.raises(ValueError):
        mean_population(models()["yule"], 1, 2, 1)


def test_no_closed_form_error():
    class Bare(ModelSpec):
        model_id = "bare"

    with pytest.raises(NoClosedFormError, match="mean_population_mc"):
        Bare().mean_population(1, 0, 1)


def test_mean_mc_exact_on_empty_horizon():
    est = mean_population_mc(models()["linear_growth"], 1, 1.0, 1.0, 10, 0)
    assert est.mean == 1.0 and est.std_error == 0.0


@pytest.mark.parametrize("name", ["yule", "linear_growth", "exp_growth"])
def test_mean_mc_agrees(name):
    m = models()[name]
    est = mean_population_mc(m, 1.0, 0.0, 1.0, 10000, 11)
    assert abs(est.mean - mean_population(m, 1.0, 0.0, 1.0)) <= 3 * est.std_error


def test_linear_mc_from_zero():
    lg = build_model({"id": "linear_growth", "a": 1, "alpha": 1})
    est = mean_population_mc(lg, 0.0, 0.0, 1.0, 10000, 12)
    assert abs(est.mean - math.cosh(1)) <= 3 * est.std_error


# --- lambda ---------------------------------------------------------------
@pytest.mark.parametrize("name", sorted(CONFIGS))
def test_lambda_at_horizon_is_mean_offspring(name):
    m = models()[name]
    for x in ((0, 1) if name == "two_type_switch" else (0, 1, 4)):
        assert lambda_factor(m, x, 3.0, 3.0) == pytest.approx(2.0, rel=1e-12)
        assert lambda_factor(m, x, 3.0, 3.0, generic=True) == pytest.approx(2.0, rel=1e-10)


def test_lambda_parasite_point():
    par = build_model({"id": "parasite", "g": 1, "sigma2": 0.5, "alpha": 1, "beta": 0.5})
    t = 2 * math.log(2)
    assert lambda_factor(par, 1, 0, t, generic=True) == pytest.approx(F["parasite_lambda"],
                                                                      abs=1e-10)
    assert lambda_factor(par, 1, 0, t) == pytest.approx(F["parasite_lambda"], abs=1e-12)


def test_lambda_yule_is_two():
    y = models()["yule"]
    for x, s, t in [(0, 0, 1), (5, 1, 9), (1, 0, 0)]:
        assert lambda_factor(y, x, s, t) == 2.0


@pytest.mark.parametrize("name", sorted(CONFIGS))
def test_closed_form_lambda_matches_generic(name):
    m = models()[name]
    rng = np.random.default_rng(5)
    for _ in range(30):
        s = rng.uniform(0, 3)
        t = s + rng.uniform(0, 3)
        x = int(rng.integers(0, 2)) if name == "two_type_switch" else (
            int(rng.integers(0, 30)) if name == "plasmid_bd" else rng.uniform(0, 10))
        assert lambda_factor(m, x, s, t) == pytest.approx(
            lambda_factor(m, x, s, t, generic=True), rel=1e-10)


@pytest.mark.parametrize("name", [k for k in CONFIGS if k != "two_type_switch"])
def test_lambda_between_one_and_two(name):
    m = models()[name]
    rng = np.random.default_rng(6)
    for _ in range(100):
        s = rng.uniform(0, 3)
        t = s + rng.uniform(1e-3, 5)
        x = int(rng.integers(0, 40)) if name == "plasmid_bd" else rng.uniform(0, 10)
        lam = lambda_factor(m, x, s, t)
        assert 1.0 < lam <= 2.0


def test_switch_lambda_can_exceed_two():
    # a slow type that mostly produces fast daughters gains from dividing
    m = build_model({"id": "two_type_switch", "b0": 1.0, "b1": 0.1, "p": 0.9})
    assert lambda_factor(m, 1, 0, 3) > 2.0
    assert m.spine_bound(1, 0, 3) >= lambda_factor(m, 1, 1.5, 3)


# --- environment ----------------------------------------------------------
def test_piecewise_constant_integral_matches_quadrature():
    from scipy.integrate import quad
    env = PiecewiseConstant([1.0, 2.5], [0.1, 0.4, 0.2])
    for s, t in [(0, 3), (1.2, 2.0), (0.5, 1.0), (2.7, 4.0)]:
        ref = quad(lambda r: env(r) * math.exp(0.2 * (r - s)), s, t, points=[1.0, 2.5],
                   epsabs=1e-14)[0]
        assert env.exp_integral(s, t, 0.2) == pytest.approx(ref, rel=1e-12)


def test_piecewise_constant_validation():
    with pytest.raises(ValueError):
        PiecewiseConstant([1.0], [1.0])
    with pytest.raises(ValueError):
        PiecewiseConstant([2.0, 1.0], [1.0, 1.0, 1.0])


def test_exp_growth_rejects_nonpositive_environment():
    with pytest.raises(ModelConfigError):
        build_model({"id": "exp_growth", "a": 0.1, "alpha": {"breaks": [1], "values": [1, 0]}})
