"""Paired Monte Carlo checks of the first-moment identities.

Each check estimates both sides of an identity from independent streams
(``root.spawn(1)`` for the population side, ``root.spawn(2)`` for the spine
side) and returns a :class:`VerificationReport`.
"""
from __future__ import annotations

import math
from functools import partial

import numpy as np

from ..auxiliary import simulate_auxiliary, simulate_tagged_cell
from ..models import mean_population, mean_population_mc
from ..models.base import QuadratureError
from ..motion import FlowMotion, GridMotion, JumpMotion
from ..parallel import map_replicates
from ..population import Caps, simulate_population
from ..streams import as_stream
from .functionals import TimeWeight, get_functional
from .stats import MCEstimate, VerificationReport


class NestedBudgetError(RuntimeError):
    """The nested spine simulations of a fork check exceeded their budget."""


def _report(identity, lhs, rhs, policy, threshold, **details):
    return VerificationReport(identity, lhs, rhs, policy=policy, threshold=threshold,
                              details=details)


def _gauss(a, b, nodes):
    z, w = np.polynomial.legendre.leggauss(nodes)
    half = 0.5 * (b - a)
    return a + half * (z + 1.0), half * w


def _quadrature_gap(fn, a, b, nodes):
    """Relative change of the Gauss-Legendre integral of ``fn`` when halving the nodes."""
    if b <= a:
        return 0.0
    vals = []
    for k in (nodes, nodes // 2):
        r, w = _gauss(a, b, k)
        vals.append(math.fsum(wi * fn(ri) for ri, wi in zip(r, w)))
    return abs(vals[0] - vals[1]) / max(abs(vals[0]), 1e-300)


def _node_estimate(weights, samples):
    """Combine per-node sample arrays into one estimate of ``sum_k w_k E[sample_k]``."""
    mean = math.fsum(w * s.mean() for w, s in zip(weights, samples))
    var = math.fsum(w * w * (s.var(ddof=1) / s.size if s.size > 1 else 0.0)
                    for w, s in zip(weights, samples))
    n = int(sum(s.size for s in samples))
    return MCEstimate(n, mean, math.sqrt(var))


# ---------------------------------------------------------------------------
# Many-to-One
def _tree_sum(model, x0, t, F, caps, stream, i):
    tree = simulate_population(model, [x0], t, caps, stream.spawn(i))
    return math.fsum(F.on_tree(tree, ind, t) for ind in tree.alive(t))


def _spine_value(model, x0, t, F, stream, i, rate=None, envelope=None):
    return F(simulate_auxiliary(model, x0, t, stream.spawn(i), rate=rate, envelope=envelope))


def check_many_to_one(model, x0, t: float, functional, n_pop: int, n_aux: int, rng,
                      caps=None, policy: str = "z", threshold: float = 3.0,
                      threads: int = 1, spine_rate=None) -> VerificationReport:
    """Sum of F over the lineages alive at t against m(x0, 0, t) E[F(spine)].

    ``spine_rate = (rate, envelope)`` swaps in another spine division rate
    (see :func:`simulate_auxiliary`); used to test alternative formulas.
    """
    F = get_functional(functional)
    root = as_stream(rng)
    caps = caps or Caps()
    m = mean_population(model, x0, 0.0, t)
    rate, envelope = spine_rate or (None, None)
    if F.is_constant and rate is None:
        # F = 1: the left side is the population-size estimate itself
        lhs = mean_population_mc(model, x0, 0.0, t, n_pop, root.spawn(1), caps)
        rhs = MCEstimate.exact(m, n_aux)
    else:
        lhs = MCEstimate.from_samples(map_replicates(
            partial(_tree_sum, model, x0, t, F, caps, root.spawn(1)), n_pop, threads))
        rhs = MCEstimate.from_samples(map_replicates(
            partial(_spine_value, model, x0, t, F, root.spawn(2), rate=rate, envelope=envelope),
            n_aux, threads)).scaled(m)
    return _report(f"many_to_one[{F.name}]", lhs, rhs, policy, threshold,
                   model=model.model_id, x0=x0, t=t, m=m)


# ---------------------------------------------------------------------------
# whole tree
def _deaths_weighted(model, x0, T, weight, caps, stream, i):
    tree = simulate_population(model, [x0], T, caps, stream.spawn(i))
    return math.fsum(weight(ind.death) for ind in tree.deaths(T))


def check_whole_tree(model, x0, T: float, rng, n: int, weight="one", n_aux: int | None = None,
                     nodes: int = 64, quad_tol: float = 1e-6, caps=None, policy: str = "z",
                     threshold: float = 3.0, threads: int = 1) -> VerificationReport:
    """Weighted count of all deaths by T against the time integral of the spine rate.

    The right side is ``int_0^T m(x0,0,s) w(s) E[B(Y_s^(s))] ds`` on a
    Gauss-Legendre grid; ``n_aux`` spine paths (default ``n``) are spread
    evenly over the nodes.  Raises :class:`QuadratureError` when halving the
    grid moves the integral of the deterministic factor by more than
    ``quad_tol`` (relative).
    """
    w = TimeWeight(weight)
    root = as_stream(rng)
    caps = caps or Caps()
    if T == 0:
        zero = MCEstimate.exact(0.0, n)
        return _report(f"whole_tree[{w}]", zero, zero, policy, threshold, T=T)
    lhs = MCEstimate.from_samples(map_replicates(
        partial(_deaths_weighted, model, x0, T, w, caps, root.spawn(1)), n, threads))
    gap = _quadrature_gap(lambda s: mean_population(model, x0, 0.0, s) * w(s), 0.0, T, nodes)
    if gap > quad_tol:
        raise QuadratureError(f"{nodes}-node grid too coarse: halving moves the integral by "
                              f"{gap:.3g} (> {quad_tol:g})")
    per = max(2, (n_aux or n) // nodes)
    r, qw = _gauss(0.0, T, nodes)
    aux = root.spawn(2)
    weights, samples = [], []
    for k, s in enumerate(r):
        st = aux.spawn(k)
        vals = np.empty(per)
        for j in range(per):
            y = simulate_auxiliary(model, x0, s, st.spawn(j)).terminal
            vals[j] = model.division_rate(y, s)
        weights.append(qw[k] * mean_population(model, x0, 0.0, s) * w(s))
        samples.append(vals)
    rhs = _node_estimate(weights, samples)
    return _report(f"whole_tree[{w}]", lhs, rhs, policy, threshold,
                   model=model.model_id, x0=x0, T=T, nodes=nodes, quadrature_gap=gap)


# ---------------------------------------------------------------------------
# forks
def _pair_sum(model, x0, s, t, f, g, caps, stream, i):
    tree = simulate_population(model, [x0], t, caps, stream.spawn(i))
    alive = tree.alive(t)
    if f.is_constant and g.is_constant:
        n = len(alive)
        return f.of_trait(x0) * g.of_trait(x0) * n * (n - 1)
    fs, gs = np.empty(len(alive)), np.empty(len(alive))
    for k, ind in enumerate(alive):
        y = tree.ancestor_at(ind.label, s).trait_at(s)
        fs[k], gs[k] = f.of_trait(y), g.of_trait(y)
    return float(fs.sum() * gs.sum() - np.dot(fs, gs))


def check_forks(model, x0, s: float, t: float, f, g, rng, n: int, n_aux: int | None = None,
                nodes: int = 64, nested_budget: int = 2_000_000, quad_tol: float = 1e-6,
                caps=None, policy: str = "z", threshold: float = 3.0,
                threads: int = 1) -> VerificationReport:
    """Sum over ordered pairs of distinct individuals alive at t of f(X_s^u) g(X_s^v).

    The right side splits on the death time r of the most recent common
    ancestor.  For ``r`` in ``[s, t]`` the pair shares its trait at ``s``:
    ``m(x0,0,r) E[f g(Y_s^(r)) B(Y_r^(r)) J2(m_r, m_r)(Y_r^(r))]``.  For ``r``
    in ``[0, s]`` the two children carry the transported functionals
    ``m(., r, t) P_{r,s}^(t) f``; with constant f and g these are exact,
    otherwise each child starts one nested spine path.
    """
    f, g = get_functional(f), get_functional(g)
    if not (f.trait_only and g.trait_only):
        raise ValueError("fork checks need functionals of a single trait")
    if not 0 <= s <= t:
        raise ValueError(f"need 0 <= s <= t, got s={s}, t={t}")
    root = as_stream(rng)
    caps = caps or Caps()
    name = f"forks[{f.name},{g.name}]"
    if t == 0:
        zero = MCEstimate.exact(0.0, n)
        return _report(name, zero, zero, policy, threshold, s=s, t=t)
    lhs = MCEstimate.from_samples(map_replicates(
        partial(_pair_sum, model, x0, s, t, f, g, caps, root.spawn(1)), n, threads))

    gap = _quadrature_gap(lambda r: mean_population(model, x0, 0.0, r)
                          * mean_population(model, x0, r, t) ** 2, 0.0, t, nodes)
    if gap > quad_tol:
        raise QuadratureError(f"{nodes}-node grid too coarse: halving moves the integral by "
                              f"{gap:.3g} (> {quad_tol:g})")
    per = max(2, (n_aux or n) // nodes)
    exact_pairs = f.is_constant and g.is_constant
    used = 0
    weights, samples = [], []
    aux = root.spawn(2)

    def m_at(r):
        return lambda y: mean_population(model, y, r, t)

    # common ancestor dies after s
    if t > s:
        r_nodes, q = _gauss(s, t, nodes)
        for k, r in enumerate(r_nodes):
            st = aux.spawn(0).spawn(k)
            vals = np.empty(per)
            for j in range(per):
                path = simulate_auxiliary(model, x0, r, st.spawn(j))
                y_s, y_r = path.value_at(s), path.terminal
                vals[j] = (f.of_trait(y_s) * g.of_trait(y_s) * model.division_rate(y_r, r)
                           * model.pair_kernel(y_r, m_at(r), m_at(r)))
            weights.append(q[k] * mean_population(model, x0, 0.0, r))
            samples.append(vals)

    # common ancestor dies before s
    if s > 0:
        r_nodes, q = _gauss(0.0, s, nodes)
        for k, r in enumerate(r_nodes):
            st = aux.spawn(1).spawn(k)
            vals = np.empty(per)
            for j in range(per):
                sj = st.spawn(j)
                y_r = simulate_auxiliary(model, x0, r, sj.spawn(0)).terminal
                b = model.division_rate(y_r, r)
                if exact_pairs:
                    cf, cg = f.of_trait(x0), g.of_trait(x0)
                    vals[j] = b * cf * cg * model.pair_kernel(y_r, m_at(r), m_at(r))
                    continue
                draw = model.offspring_sample(y_r, sj.spawn(1))
                used += draw.count
                if used > nested_budget:
                    raise NestedBudgetError(f"more than {nested_budget} nested spine paths")
                mf, mg = np.empty(draw.count), np.empty(draw.count)
                for c, y in enumerate(draw.children):
                    z = simulate_auxiliary(model, y, t, sj.spawn(2 + c), t0=r, stop=s).terminal
                    mc = mean_population(model, y, r, t)
                    mf[c], mg[c] = mc * f.of_trait(z), mc * g.of_trait(z)
                vals[j] = b * (mf.sum() * mg.sum() - np.dot(mf, mg))
            weights.append(q[k] * mean_population(model, x0, 0.0, r))
            samples.append(vals)

    rhs = _node_estimate(weights, samples)
    return _report(name, lhs, rhs, policy, threshold, model=model.model_id, x0=x0, s=s, t=t,
                   nodes=nodes, quadrature_gap=gap, nested_paths=used)


# ---------------------------------------------------------------------------
# Feynman-Kac
def integrated_division_rate(model, path) -> float:
    """Integral of B along a path; left-point sums on a diffusion grid."""
    total = 0.0
    for a, b, motion in path.segments:
        if b <= a:
            continue
        if isinstance(motion, FlowMotion):
            total += model.integrated_rate(motion.x0, a, b - a)
        elif isinstance(motion, GridMotion):
            ts, xs = motion.times, motion.values
            keep = ts <= b
            ts, xs = np.append(ts[keep], b), xs[keep]
            rates = np.array([model.division_rate(x, u) for x, u in zip(xs, ts[:-1])])
            total += float(np.dot(rates, np.diff(ts)))
        elif isinstance(motion, JumpMotion):
            ts = [u for u in motion.times if u < b] + [b]
            for x, u0, u1 in zip(motion.values, ts, ts[1:]):
                total += model.division_rate(x, u0) * (u1 - u0)
        else:
            raise TypeError(f"unknown motion record {type(motion).__name__}")
    return total


def _fk_weighted(model, x0, r, s, t, F, stream, i):
    path = simulate_tagged_cell(model, x0, s, stream.spawn(i), t0=r, size_biased=True)
    if path.extinct_at is not None:
        return 0.0
    log_w = ((model.mean_offspring(x0) - 1.0) * integrated_division_rate(model, path)
             + math.log(mean_population(model, path.terminal, s, t))
             - math.log(mean_population(model, x0, r, t)))
    if log_w > 700.0:
        raise OverflowError(f"Feynman-Kac weight e^{log_w:.1f} overflows; shorten the horizon")
    return math.exp(log_w) * F(path)


def _fk_spine(model, x0, r, s, t, F, stream, i):
    return F(simulate_auxiliary(model, x0, t, stream.spawn(i), t0=r, stop=s))


def check_feynman_kac(model, x0, r: float, s: float, t: float, functional, rng, n: int,
                      policy: str = "ci_overlap", threshold: float = 3.0,
                      threads: int = 1) -> VerificationReport:
    """Spine expectation of F on [r, s] against a weighted size-biased line of descent.

    The line divides at rate ``B * mean offspring`` and follows a uniform
    child; its weight is ``exp(int (mean offspring - 1) B) m(X_s, s, t) / m(x0, r, t)``.
    """
    F = get_functional(functional)
    if not 0 <= r <= s <= t:
        raise ValueError(f"need 0 <= r <= s <= t, got {r}, {s}, {t}")
    root = as_stream(rng)
    lhs = MCEstimate.from_samples(map_replicates(
        partial(_fk_spine, model, x0, r, s, t, F, root.spawn(2)), n, threads))
    rhs = MCEstimate.from_samples(map_replicates(
        partial(_fk_weighted, model, x0, r, s, t, F, root.spawn(1)), n, threads))
    return _report(f"feynman_kac[{F.name}]", lhs, rhs, policy, threshold,
                   model=model.model_id, x0=x0, r=r, s=s, t=t)
