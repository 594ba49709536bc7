import io
import math

import numpy as np
import pytest
from scipy.integrate import quad

import oracles
from spinesim.analysis.stats import MCEstimate, poisson_chisquare
from spinesim.auxiliary import (ThinningBoundError, biased_drift, biased_jump_rates,
                                biased_kernel_density, biased_kernel_sample, biased_motion_step,
                                biased_rate, closed_form_biased_rate, generic_kernel_density,
                                sample_pi_t, simulate_auxiliary, simulate_tagged_cell)
from spinesim.models import build_model, evolve_trait, lambda_factor, mean_population
from spinesim.paths import write_paths_csv
from spinesim.streams import Stream

F = oracles.FROZEN
YULE = build_model({"id": "yule", "b": 1.0})
LINEAR = build_model({"id": "linear_growth", "a": 1.0, "alpha": 1.0})
EXP = build_model({"id": "exp_growth", "a": 0.1, "alpha": 0.1})
PARASITE = build_model({"id": "parasite", "g": 1.0, "sigma2": 0.25, "alpha": 1.0, "beta": 0.5})
PLASMID = build_model({"id": "plasmid_bd", "lam": 1.0, "mu": 0.5})
SWITCH = build_model({"id": "two_type_switch", "b0": 1.0, "b1": 0.3, "p": 0.2})
ALL = [YULE, LINEAR, EXP, PARASITE, PLASMID, SWITCH]


def random_points(model, n, seed):
    rng = np.random.default_rng(seed)
    for _ in range(n):
        s = rng.uniform(0, 3)
        t = s + rng.uniform(0, 3)
        if model.model_id == "plasmid_bd":
            x = int(rng.integers(0, 40))
        elif model.model_id == "two_type_switch":
            x = int(rng.integers(0, 2))
        else:
            x = rng.uniform(0, 8)
        yield x, s, t


# --- biased objects -------------------------------------------------------
@pytest.mark.parametrize("model", ALL, ids=lambda m: m.model_id)
def test_rate_doubles_at_horizon(model):
    x = 1
    assert biased_rate(model, x, 2.0, 2.0) == pytest.approx(2 * model.division_rate(x, 2.0))


def test_parasite_rate_point():
    par = build_model({"id": "parasite", "g": 1, "sigma2": 0.5, "alpha": 1, "beta": 0.5})
    t = 2 * math.log(2)
    assert biased_rate(par, 1, 0, t) == pytest.approx(F["parasite_biased_rate"], rel=1e-12)
    assert closed_form_biased_rate(par, 1, 0, t) == pytest.approx(F["parasite_biased_rate"])


def test_exp_growth_rate_point():
    # a (t - s) = ln 2 with alpha = a gives Lambda = 1.5
    m = build_model({"id": "exp_growth", "a": 0.5, "alpha": 0.5})
    t = math.log(2) / 0.5
    assert biased_rate(m, 1, 0, t) == pytest.approx(1.5 * 0.5, rel=1e-12)


@pytest.mark.parametrize("model", [PARASITE, PLASMID], ids=lambda m: m.model_id)
def test_closed_form_rate_matches_generic(model):
    for x, s, t in random_points(model, 100, 1):
        assert closed_form_biased_rate(model, x, s, t) == pytest.approx(
            biased_rate(model, x, s, t, generic=True), rel=1e-10, abs=1e-12)


def test_parasite_density_matches_generic_and_normalises():
    for x, s, t in random_points(PARASITE, 100, 2):
        if x == 0:
            continue
        for y in np.linspace(0, x, 5):
            assert biased_kernel_density(PARASITE, x, s, t, y) == pytest.approx(
                generic_kernel_density(PARASITE, x, s, t, y), rel=1e-10)
        total = quad(lambda y: biased_kernel_density(PARASITE, x, s, t, y), 0, x,
                     epsabs=1e-12)[0]
        assert abs(total - 1) <= 1e-10


def test_parasite_density_limit_case():
    par = build_model({"id": "parasite", "g": 0.5, "sigma2": 0.25, "alpha": 1, "beta": 0.5})
    for y in (0.0, 0.3, 1.0):
        assert biased_kernel_density(par, 1.0, 0.2, 1.4, y) == pytest.approx(
            generic_kernel_density(par, 1.0, 0.2, 1.4, y), rel=1e-10)


def test_parasite_drift_matches_generic():
    for x, s, t in random_points(PARASITE, 100, 3):
        assert biased_drift(PARASITE, x, s, t) == pytest.approx(
            biased_drift(PARASITE, x, s, t, generic=True), rel=1e-10, abs=1e-10)
    assert biased_drift(PARASITE, 2.0, 1.0, 1.0) == PARASITE.g * 2.0


def test_plasmid_rates_match_generic():
    for x, s, t in random_points(PLASMID, 100, 4):
        a = biased_jump_rates(PLASMID, x, s, t)
        b = biased_jump_rates(PLASMID, x, s, t, generic=True)
        assert a == pytest.approx(b, rel=1e-10, abs=1e-12)
        if x > 0 and t > s:
            assert a[0] > PLASMID.lam * x and a[1] < PLASMID.mu * x


def test_plasmid_rates_vanish_at_zero():
    assert biased_jump_rates(PLASMID, 0, 0.0, 2.0) == (0.0, 0.0)
    assert biased_jump_rates(PLASMID, 0, 0.0, 2.0, generic=True) == (0.0, 0.0)


def test_deterministic_split_kernel():
    assert biased_kernel_sample(LINEAR, 4.0, 0, 1, Stream(1)) == 2.0


def test_parasite_kernel_unbiased_at_horizon():
    root = Stream.root(5)
    y = np.array([biased_kernel_sample(PARASITE, 1.0, 2.0, 2.0, root.spawn(i))
                  for i in range(100000)])
    assert abs(y.mean() - 0.5) <= 3 * y.std(ddof=1) / math.sqrt(y.size)


def test_parasite_kernel_mean_point():
    par = build_model({"id": "parasite", "g": 1, "sigma2": 0.5, "alpha": 1, "beta": 0.5})
    root = Stream.root(6)
    t = 2 * math.log(2)
    y = np.array([biased_kernel_sample(par, 1.0, 0.0, t, root.spawn(i)) for i in range(100000)])
    assert abs(y.mean() - F["parasite_kernel_mean"]) <= 3 * y.std(ddof=1) / math.sqrt(y.size)


@pytest.mark.parametrize("model, x", [(PLASMID, 6), (SWITCH, 0)], ids=["plasmid", "switch"])
def test_discrete_kernel_frequencies(model, x):
    s, t = 0.0, 1.5
    ker = model.mean_kernel(x)
    w = np.array([wi * mean_population(model, y, s, t) for y, wi in zip(ker.atoms, ker.weights)])
    w /= w.sum()
    root = Stream.root(7)
    draws = np.array([biased_kernel_sample(model, x, s, t, root.spawn(i)) for i in range(20000)])
    for y, p in zip(ker.atoms, w):
        freq = np.mean(draws == y)
        assert abs(freq - p) <= 4 * math.sqrt(p * (1 - p) / draws.size)


def test_motion_step():
    assert biased_motion_step(LINEAR, 1.0, 0.0, 2.0, 0.5, Stream(1)) == \
        LINEAR.flow(1.0, 0.0, 0.5)
    x = biased_motion_step(PARASITE, 1.0, 0.0, 1.0, 0.01, Stream(2))
    assert x >= 0
    assert biased_motion_step(PLASMID, 0, 0.0, 1.0, 0.5, Stream(3)) == 0
    with pytest.raises(ValueError):
        biased_motion_step(LINEAR, 1.0, 0.5, 1.0, 1.0, Stream(1))


# --- paths ----------------------------------------------------------------
@pytest.mark.parametrize("model", ALL, ids=lambda m: m.model_id)
def test_paths_are_well_formed(model):
    root = Stream.root(8)
    for i in range(30):
        for path in (simulate_auxiliary(model, 1, 2.0, root.spawn(i)),
                     simulate_tagged_cell(model, 1, 2.0, root.spawn(1000 + i))):
            path.check()
            assert path.segments[0][0] == 0.0 and path.segments[-1][1] == 2.0
            assert path.division_count == len(path.jumps)


@pytest.mark.parametrize("model", ALL, ids=lambda m: m.model_id)
def test_zero_horizon(model):
    assert simulate_auxiliary(model, 1, 0.0, 1).division_count == 0
    assert simulate_tagged_cell(model, 1, 0.0, 1).division_count == 0


def test_tagged_linear_structure():
    path = simulate_tagged_cell(LINEAR, 1.0, 3.0, 4)
    for (a, b, motion), jump in zip(path.segments, path.jumps):
        assert jump[1] == pytest.approx(motion.x0 + (b - a))
        assert jump[2] == pytest.approx(jump[1] / 2)


def _counts(fn, n, seed):
    root = Stream.root(seed)
    return np.array([fn(root.spawn(i)).division_count for i in range(n)])


def test_yule_spine_is_poisson_two():
    c = _counts(lambda st: simulate_auxiliary(YULE, 1, 1.0, st), 10000, 9)
    assert abs(c.mean() - 2) <= 3 * c.std(ddof=1) / 100
    assert poisson_chisquare(c, 2.0)[1] > 0.01


def test_yule_tagged_is_poisson_one():
    c = _counts(lambda st: simulate_tagged_cell(YULE, 1, 1.0, st), 10000, 10)
    assert abs(c.mean() - 1) <= 3 * c.std(ddof=1) / 100
    assert poisson_chisquare(c, 1.0)[1] > 0.01


def test_exp_growth_spine_terminal_mean():
    root = Stream.root(12)
    y = MCEstimate.from_samples([simulate_auxiliary(EXP, 1.0, 10.0, root.spawn(i)).terminal
                                 for i in range(10000)])
    assert abs(y.mean - F["exp_spine_terminal_mean"]) <= 3 * y.std_error


def test_rate_domination_is_asserted():
    # a rate override beyond its envelope must trip the internal assertion
    with pytest.raises(ThinningBoundError):
        for i in range(50):
            simulate_auxiliary(EXP, 1.0, 10.0, Stream(i), rate=lambda x, s, t: 3 * 0.1 * x,
                               envelope=(2.0, 0.0))


def test_switch_spine_with_large_lambda_runs():
    m = build_model({"id": "two_type_switch", "b0": 1.0, "b1": 0.1, "p": 0.9})
    for i in range(200):
        simulate_auxiliary(m, 1, 3.0, Stream(i)).check()


def test_parasite_spine_bound_never_violated():
    for i in range(200):
        simulate_auxiliary(PARASITE, 2.0, 2.0, Stream(i))


def test_spine_started_later():
    path = simulate_auxiliary(EXP, 1.0, 10.0, 3, t0=4.0, stop=7.0)
    assert path.start == 4.0 and path.horizon == 7.0


# --- pi_t -----------------------------------------------------------------
def test_pi_t():
    assert sample_pi_t(EXP, [(3.0, 1.0)], 10.0, 1) == 3.0
    root = Stream.root(13)
    draws = np.array([sample_pi_t(EXP, [(0.0, 0.5), (1.0, 0.5)], 10.0, root.spawn(i))
                      for i in range(20000)])
    p = F["pi_t_atom1"]
    assert abs(draws.mean() - p) <= 4 * math.sqrt(p * (1 - p) / draws.size)
    zero = np.array([sample_pi_t(EXP, [(0.0, 0.25), (1.0, 0.75)], 0.0, root.spawn(i))
                     for i in range(20000)])
    assert abs(zero.mean() - 0.75) <= 4 * math.sqrt(0.75 * 0.25 / zero.size)
    with pytest.raises(ValueError):
        sample_pi_t(EXP, [(1.0, 0.0)], 1.0, 1)


def test_paths_csv():
    buf = io.StringIO()
    write_paths_csv(buf, [(0, simulate_tagged_cell(LINEAR, 1.0, 1.0, 2))], ["horizon 1"])
    lines = buf.getvalue().splitlines()
    assert lines[:2] == ["# horizon 1", "replicate,time,trait,event"]
    assert lines[2] == "0,0,1,motion"
    assert all(l.rsplit(",", 1)[1] in ("motion", "division") for l in lines[2:])
