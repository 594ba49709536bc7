"""The auxiliary (spine) process and its comparison processes.

The spine ``Y^(t)`` for sampling time ``t`` jumps at rate ``B(x) Lambda(x,s,t)``
to a trait drawn from the m-reweighted offspring kernel, and moves with the
Doob-transformed generator ``[G(m f) - f G m] / m``.  Jumps are produced by
thinning: proposals come from a majorant ``K * (B(x) + shift)`` along the
current motion and are kept with probability ``rate / majorant``.
"""
from __future__ import annotations

import math
from functools import partial

import numpy as np
from scipy import optimize

from . import _kernels
from .models import ModelSpec
from .models.base import UniformKernel, _phi
from .motion import FlowMotion, GridMotion, JumpMotion
from .paths import TraitPath
from .streams import as_stream


class ThinningBoundError(AssertionError):
    """A proposed rate exceeded the thinning majorant."""


_SLACK = 1.0 + 1e-12


# ---------------------------------------------------------------------------
# biased objects
def biased_rate(model: ModelSpec, x, s: float, t: float, generic: bool = False) -> float:
    """Spine division rate B(x) Lambda(x, s, t) at time ``s``."""
    if not s <= t:
        raise ValueError("biased_rate needs s <= t")
    lam = ModelSpec.lambda_factor(model, x, s, t) if generic else model.lambda_factor(x, s, t)
    return model.division_rate(x, s) * lam


def closed_form_biased_rate(model: ModelSpec, x, s: float, t: float) -> float:
    """The explicit rate formulas for the parasite and plasmid models."""
    tau = t - s
    if model.model_id == "parasite":
        d = model.g - model.beta
        k = model.alpha * x * _phi(d, tau)
        return (model.alpha * x + model.beta) * (1.0 + 1.0 / (1.0 + k))
    if model.model_id == "plasmid_bd":
        c = math.expm1((model.lam - model.mu) * tau)
        return x * (1.0 + (model.lam - model.mu) / (model.lam - model.mu + x * c))
    raise NotImplementedError(f"no explicit spine rate for {model.model_id}")


def biased_kernel_density(model: ModelSpec, x: float, s: float, t: float, y: float) -> float:
    """Explicit density of the parasite spine kernel on [0, x]."""
    if model.model_id != "parasite":
        raise NotImplementedError("only the parasite kernel has a density")
    if not 0.0 <= y <= x:
        return 0.0
    d = model.g - model.beta
    tau = t - s
    if d == 0.0:
        return (2.0 + 2.0 * model.alpha * y * tau) / ((2.0 + model.alpha * x * tau) * x)
    em = math.expm1(d * tau)
    return (2.0 * d + 2.0 * model.alpha * y * em) / ((2.0 * d + model.alpha * x * em) * x)


def generic_kernel_density(model: ModelSpec, x: float, s: float, t: float, y: float) -> float:
    """m(y,s,t) m(x,dy) / (m(x,s,t) Lambda) for a uniform offspring intensity."""
    ker = model.mean_kernel(x)
    if not isinstance(ker, UniformKernel):
        raise NotImplementedError("generic density needs a continuous offspring kernel")
    if not ker.lo <= y <= ker.hi:
        return 0.0
    lam = ModelSpec.lambda_factor(model, x, s, t)
    return (ker.mass / (ker.hi - ker.lo)) * model.mean_population(y, s, t) / (
        model.mean_population(x, s, t) * lam)


def biased_kernel_pmf(model: ModelSpec, x, s: float, t: float, generic: bool = False):
    """``(atoms, probabilities)`` of a discrete spine kernel."""
    if generic:
        ker = model.mean_kernel(x)
        if isinstance(ker, UniformKernel):
            raise NotImplementedError("use biased_kernel_density for continuous kernels")
        w = np.array([wi * model.mean_population(y, s, t) for y, wi in zip(ker.atoms, ker.weights)])
        return list(ker.atoms), w / w.sum()
    if model.model_id != "plasmid_bd":
        raise NotImplementedError(f"no explicit kernel for {model.model_id}")
    # weights proportional to 1 + c k on {0..x}
    x = int(x)
    c = _phi(model.lam - model.mu, t - s)
    k = np.arange(x + 1)
    return list(k.tolist()), (1.0 + c * k) / ((x + 1) * (1.0 + 0.5 * c * x))


def biased_kernel_sample(model: ModelSpec, x, s: float, t: float, rng):
    """Trait of the spine just after a division at time ``s``."""
    return model.biased_kernel_sample(x, s, t, as_stream(rng))


def _fd(fn, x, h):
    # five-point first and second derivatives
    f2, f1, f0, fm1, fm2 = fn(x + 2 * h), fn(x + h), fn(x), fn(x - h), fn(x - 2 * h)
    d1 = (-f2 + 8 * f1 - 8 * fm1 + fm2) / (12 * h)
    d2 = (-f2 + 16 * f1 - 30 * f0 + 16 * fm1 - fm2) / (12 * h * h)
    return d1, d2


def biased_generator(model: ModelSpec, f, x, s: float, t: float) -> float:
    """Generic ``[G(m f) - f G m](x) / m(x)`` with m = m(., s, t).

    Diffusions use a five-point finite-difference stencil, jump motions use
    the exact difference operator, deterministic flows give back G f.
    """
    m = lambda y: model.mean_population(y, s, t)  # noqa: E731
    mx = m(x)
    if model.motion_kind == "diffusion":
        h = 1e-2 * max(1.0, abs(x))
        mf = lambda y: m(y) * f(y)  # noqa: E731
        d1_mf, d2_mf = _fd(mf, x, h)
        d1_m, d2_m = _fd(m, x, h)
        gmf = model.drift(x) * d1_mf + model.diffusion(x) * d2_mf
        gm = model.drift(x) * d1_m + model.diffusion(x) * d2_m
        return (gmf - f(x) * gm) / mx
    if model.motion_kind == "jump_markov":
        lam, mu = model.jump_rates(x)
        fx = f(x)
        out = lam * m(x + 1) * (f(x + 1) - fx)
        if x > 0:
            out += mu * m(x - 1) * (f(x - 1) - fx)
        return out / mx
    if model.motion_kind == "deterministic_flow":
        h = 1e-6 * max(1.0, abs(x))
        return model.velocity(x) * (f(x + h) - f(x - h)) / (2 * h)
    return 0.0


def biased_drift(model: ModelSpec, x: float, s: float, t: float, generic: bool = False) -> float:
    """Drift of the spine diffusion (parasite model)."""
    if model.motion_kind != "diffusion":
        raise NotImplementedError("biased drift is defined for diffusive traits")
    if generic:
        return biased_generator(model, lambda y: y, x, s, t)
    tau = t - s
    eg, eb = math.exp(model.g * tau), math.exp(model.beta * tau)
    num = model.alpha * x * (eg - eb)
    d = model.g - model.beta
    if d == 0.0:
        k = model.alpha * x * tau
        return model.g * x + 2.0 * model.sigma2 * k / (1.0 + k)
    return model.g * x + 2.0 * model.sigma2 * num / (num + d * eb)


def biased_jump_rates(model: ModelSpec, x: int, s: float, t: float, generic: bool = False):
    """(birth, death) rates of the spine plasmid count."""
    if model.motion_kind != "jump_markov":
        raise NotImplementedError("biased jump rates are defined for jump motions")
    if generic:
        m = lambda y: model.mean_population(y, s, t)  # noqa: E731
        lam, mu = model.jump_rates(x)
        return lam * m(x + 1) / m(x), (mu * m(x - 1) / m(x) if x > 0 else 0.0)
    tau = t - s
    c = math.expm1((model.lam - model.mu) * tau)
    q = c / (model.lam - model.mu + x * c)
    return model.lam * x * (1.0 + q), max(model.mu * x * (1.0 - q), 0.0)


def biased_motion_step(model: ModelSpec, x, s: float, t: float, dt: float, rng):
    """Advance the spine motion (no division) from ``s`` to ``s + dt``."""
    if not (dt >= 0 and s + dt <= t * _SLACK + 1e-15):
        raise ValueError("biased_motion_step needs 0 <= dt and s + dt <= t")
    rng = as_stream(rng)
    kind = model.motion_kind
    if kind == "deterministic_flow":
        return model.flow(x, s, s + dt)
    if kind == "none":
        return x
    if kind == "diffusion":
        xp = max(x, 0.0)
        z = rng.generator.standard_normal()
        return max(x + biased_drift(model, xp, s, t) * dt + math.sqrt(2 * model.sigma2 * xp * dt) * z,
                   0.0)
    # jump motion: thinning with constant majorants lam (x+1) and mu x
    r, end = s, s + dt
    while x > 0:
        bound_b, bound_d = model.lam * (x + 1), model.mu * x
        r += rng.exponential() / (bound_b + bound_d)
        if r >= end:
            break
        b, d = biased_jump_rates(model, x, r, t)
        u = rng.random() * (bound_b + bound_d)
        if u < bound_b:
            if u < b:
                x += 1
        elif u - bound_b < d:
            x -= 1
    return x


# ---------------------------------------------------------------------------
# path simulation
def _flow_path(model, x0, t0, stop, t, stream, *, rate=None, envelope=None, tagged=False,
               rate_mult=1.0):
    """Spine (or tagged line) for constant-trait and deterministic-flow models."""
    segments, jumps = [], []
    seg_x, seg_s = x0, t0
    y, r = x0, t0
    extinct = None
    while True:
        if tagged:
            k, shift = rate_mult, 0.0
        elif envelope is not None:
            k, shift = envelope
        else:
            k, shift = model.spine_bound(y, r, t), 0.0
        e = stream.exponential()
        if shift == 0.0:
            tau = model.invert_hazard(y, r, e / k)
        else:
            tau = _invert_shifted(model, y, r, e / k, shift, stop - r)
        if r + tau >= stop:
            break
        r = r + tau
        y = model.flow(seg_x, seg_s, r)
        b = model.division_rate(y, r)
        if tagged:
            keep = True
        else:
            bound = k * (b + shift)
            target = rate(y, r, t) if rate is not None else b * model.lambda_factor(y, r, t)
            if target > bound * _SLACK:
                raise ThinningBoundError(
                    f"spine rate {target:.6g} above majorant {bound:.6g} at x={y!r}, s={r:.6g}")
            keep = stream.random() * bound < target
        if not keep:
            continue
        if tagged:
            draw = model.offspring_sample(y, stream)
            if draw.count == 0:
                extinct = r
                break
            post = draw.children[int(stream.random() * draw.count)]
        else:
            post = model.biased_kernel_sample(y, r, t, stream)
        segments.append((seg_s, r, FlowMotion(model, seg_x, seg_s, r)))
        jumps.append((r, y, post))
        seg_x, seg_s = post, r
        y = post
    end = extinct if extinct is not None else stop
    segments.append((seg_s, end, FlowMotion(model, seg_x, seg_s, end)))
    return segments, jumps, extinct


def _invert_shifted(model, x, t0, e, shift, span):
    h = lambda tau: model.integrated_rate(x, t0, tau) + shift * tau - e  # noqa: E731
    if h(span) < 0:
        return math.inf
    return optimize.brentq(h, 0.0, span, xtol=1e-14, rtol=4 * np.finfo(float).eps)


def _feller_path(model, x0, t0, stop, t, stream, *, tagged=False, rate_mult=1.0):
    gen = stream.generator
    ts, xs, evs = [np.array([t0])], [np.array([float(x0)])], [np.zeros(1, dtype=np.int8)]
    x, s, e = float(x0), float(t0), stream.exponential()
    bound_factor = rate_mult if tagged else 2.0
    while True:
        nz = int(min(max((stop - s) / model.dt + 2, 16), 8192))
        z = gen.standard_normal(nz)
        u = gen.random(max(256, nz // 4))
        out_t, out_x = np.empty(nz + u.size), np.empty(nz + u.size)
        out_ev = np.zeros(nz + u.size, dtype=np.int8)
        n, x, s, e, iz, iu, status = _kernels.feller_spine_chunk(
            x, s, stop, t, e, model.dt, model.g, model.sigma2, model.alpha, model.beta,
            bound_factor, not tagged, z, u, out_t, out_x, out_ev)
        if n and out_ev[n - 1] == -1:
            raise ThinningBoundError(f"spine rate above majorant at x={out_x[n - 1]:.6g}")
        ts.append(out_t[:n])
        xs.append(out_x[:n])
        evs.append(out_ev[:n])
        if status == _kernels.HORIZON:
            break
    times, vals, ev = np.concatenate(ts), np.concatenate(xs), np.concatenate(evs)
    cuts = np.flatnonzero(ev == 1)
    segments, jumps = [], []
    lo = 0
    for c in cuts:
        segments.append((float(times[lo]), float(times[c]), GridMotion(times[lo:c], vals[lo:c])))
        jumps.append((float(times[c]), float(vals[c - 1]), float(vals[c])))
        lo = c
    segments.append((float(times[lo]), float(stop), GridMotion(times[lo:], vals[lo:])))
    return segments, jumps, None


def _plasmid_path(model, x0, t0, stop, t, stream, *, tagged=False, rate_mult=1.0):
    segments, jumps = [], []
    x, s = int(x0), t0
    seg_s, times, values = t0, [t0], [x]
    lam, mu = model.lam, model.mu
    while x > 0:
        if tagged:
            bb, bd, bdiv = lam * x, mu * x, rate_mult * x
        else:
            bb, bd, bdiv = lam * (x + 1), mu * x, 2.0 * x
        total = bb + bd + bdiv
        s += stream.exponential() / total
        if s >= stop:
            break
        u = stream.random() * total
        if tagged:
            rb, rd, rdiv = bb, bd, bdiv
        else:
            rb, rd = biased_jump_rates(model, x, s, t)
            rdiv = x * model.lambda_factor(x, s, t)
            if rb > bb * _SLACK or rd > bd * _SLACK or rdiv > bdiv * _SLACK:
                raise ThinningBoundError(f"plasmid spine rates above majorant at x={x}")
        if u < bb:
            if u < rb:
                x += 1
                times.append(s)
                values.append(x)
        elif u < bb + bd:
            if u - bb < rd:
                x -= 1
                times.append(s)
                values.append(x)
        elif u - bb - bd < rdiv:
            if tagged:
                draw = model.offspring_sample(x, stream)
                post = draw.children[int(stream.random() * 2)]
            else:
                post = model.biased_kernel_sample(x, s, t, stream)
            segments.append((seg_s, s, JumpMotion(times, values, s)))
            jumps.append((s, x, post))
            x, seg_s, times, values = post, s, [s], [post]
    segments.append((seg_s, stop, JumpMotion(times, values, stop)))
    return segments, jumps, None


def _simulate(model, x0, t, rng, t0, stop, tagged, rate_mult, rate=None, envelope=None):
    stop = t if stop is None else stop
    if not (0 <= t0 <= stop <= t):
        raise ValueError(f"need 0 <= t0 <= stop <= t, got {t0}, {stop}, {t}")
    x0 = model.check_trait(x0)
    stream = as_stream(rng)
    kind = model.motion_kind
    if t0 == stop:
        segments, jumps, extinct = [(t0, stop, _still(model, x0, t0))], [], None
    elif kind in ("none", "deterministic_flow"):
        segments, jumps, extinct = _flow_path(model, x0, t0, stop, t, stream, rate=rate,
                                              envelope=envelope, tagged=tagged,
                                              rate_mult=rate_mult)
    elif kind == "diffusion":
        if rate is not None or envelope is not None:
            raise NotImplementedError("rate overrides are only supported for flow models")
        segments, jumps, extinct = _feller_path(model, x0, t0, stop, t, stream, tagged=tagged,
                                                rate_mult=rate_mult)
    else:
        if rate is not None or envelope is not None:
            raise NotImplementedError("rate overrides are only supported for flow models")
        segments, jumps, extinct = _plasmid_path(model, x0, t0, stop, t, stream, tagged=tagged,
                                                 rate_mult=rate_mult)
    return TraitPath(stop, segments, jumps, kind="tagged" if tagged else "auxiliary",
                     extinct_at=extinct)


def _still(model, x, t0):
    if model.motion_kind == "diffusion":
        return GridMotion([t0], [x])
    if model.motion_kind == "jump_markov":
        return JumpMotion([t0], [x], t0)
    return FlowMotion(model, x, t0, t0)


def simulate_auxiliary(model: ModelSpec, x0, t: float, rng, *, t0: float = 0.0,
                       stop: float | None = None, rate=None, envelope=None) -> TraitPath:
    """One path of the spine ``Y^(t)`` started from ``Y_{t0} = x0``, run up to ``stop``.

    ``rate(x, s, t)`` replaces the spine division rate of a flow model; it
    must then come with ``envelope = (K, shift)`` such that
    ``rate <= K (B + shift)``.
    """
    if (rate is None) != (envelope is None) and rate is not None:
        raise ValueError("a custom rate needs an envelope (K, shift)")
    return _simulate(model, x0, t, rng, t0, stop, False, 1.0, rate, envelope)


def simulate_tagged_cell(model: ModelSpec, x0, t: float, rng, *, t0: float = 0.0,
                         size_biased: bool = False) -> TraitPath:
    """Line of descent following a uniformly chosen child at each division.

    With ``size_biased=True`` the line divides at rate ``B * mean offspring``,
    the process under which the Feynman-Kac weights are exact; otherwise it
    divides at the plain rate ``B``.
    """
    mult = model.mean_offspring(x0) if size_biased else 1.0
    if size_biased and model.model_id == "yule" and model.p0 > 0:
        # size-biased offspring law never picks the empty draw
        model = type(model)(model.b, model.m, 0.0)
    return _simulate(model, x0, t, rng, t0, None, True, mult)


def sample_pi_t(model: ModelSpec, atoms, t: float, rng):
    """Draw from the initial law reweighted by m(x, 0, t)."""
    from .models import mean_population
    atoms = list(atoms)
    if not atoms:
        raise ValueError("sample_pi_t needs at least one atom")
    w = [float(wi) * mean_population(model, x, 0.0, t) for x, wi in atoms]
    if any(wi < 0 for _, wi in atoms):
        raise ValueError("weights must be nonnegative")
    total = math.fsum(w)
    if total <= 0:
        raise ValueError("all weights are zero")
    u = as_stream(rng).random() * total
    acc = 0.0
    for (x, _), wi in zip(atoms, w):
        acc += wi
        if u < acc:
            return x
    return next(x for (x, _), wi in zip(reversed(atoms), reversed(w)) if wi > 0)


# ---------------------------------------------------------------------------
# the spine rates as printed for two growth models, kept for comparison
def published_rate_linear(model, x, s, t):
    """Linear-growth spine rate with the exponent 2 sqrt(alpha) (t - s)."""
    e = math.exp(2.0 * math.sqrt(model.alpha) * (t - s))
    q = x * math.sqrt(model.alpha / model.a)
    return model.alpha * x * (1.0 + (1.0 + e) / (1.0 - q + e * (1.0 + q)))


def published_rate_exp(model, x, s, t, beta):
    """Exponential-growth spine rate carrying an extra constant ``beta``."""
    integral = model.alpha.exp_integral(s, t, model.a - beta)
    return (model.alpha(s) * x + beta) * (1.0 + 1.0 / (1.0 + x * integral))


def published_variant(model, beta: float = 0.1):
    """``(rate, envelope)`` for :func:`simulate_auxiliary` using the printed formulas."""
    if model.model_id == "linear_growth":
        return partial(published_rate_linear, model), (2.0, 0.0)
    if model.model_id == "exp_growth":
        return partial(published_rate_exp, model, beta=beta), (2.0, beta)
    raise NotImplementedError(f"no printed spine rate for {model.model_id}")
