"""The six bundled branching models."""
from __future__ import annotations

import dataclasses
import functools
import math

import numpy as np
from scipy import integrate, linalg

from .. import _kernels
from ..motion import FlowMotion, GridMotion, JumpMotion
from .base import (AtomicKernel, ModelConfigError, ModelSpec, OffspringDraw,
                   UniformKernel, _phi)
from .environment import PiecewiseConstant


def _positive(name, value, label=None):
    if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
        raise ModelConfigError(f"{label or name} must be > 0, got {value!r}", name)


# ---------------------------------------------------------------------------
@dataclasses.dataclass(frozen=True)
class Yule(ModelSpec):
    """Neutral branching at constant rate ``b``.

    A dividing individual leaves ``m`` copies of itself, or none with
    probability ``p0`` (``p0 > 0`` only serves to exercise extinction code).
    """

    b: float
    m: int = 2
    p0: float = 0.0

    model_id = "yule"
    motion_kind = "none"

    def __post_init__(self):
        _positive("b", self.b)
        if int(self.m) != self.m or self.m < 1:
            raise ModelConfigError(f"m must be a positive integer, got {self.m!r}", "m")
        object.__setattr__(self, "m", int(self.m))
        if not 0.0 <= self.p0 < 1.0:
            raise ModelConfigError(f"p0 must lie in [0, 1), got {self.p0!r}", "p0")

    @property
    def binary(self):
        return self.m == 2 and self.p0 == 0.0

    def division_rate(self, x, t=0.0):
        return self.b

    def mean_offspring(self, x):
        return (1.0 - self.p0) * self.m

    def offspring_sample(self, x, rng, theta=None):
        if self.p0 > 0.0:
            u = rng.random() if theta is None else theta
            if u < self.p0:
                return OffspringDraw(0, [])
        return OffspringDraw(self.m, [x] * self.m)

    def mean_kernel(self, x):
        return AtomicKernel([x], [self.mean_offspring(x)])

    def pair_kernel(self, x, f, g):
        return (1.0 - self.p0) * self.m * (self.m - 1) * f(x) * g(x)

    def integrated_rate(self, x, t0, tau):
        return self.b * tau

    def invert_hazard(self, x, t0, e):
        return e / self.b

    def mean_population(self, x, s, t):
        return math.exp(self.b * (self.mean_offspring(x) - 1.0) * (t - s))

    def lambda_factor(self, x, s, t):
        return self.mean_offspring(x)


# ---------------------------------------------------------------------------
@dataclasses.dataclass(frozen=True)
class LinearGrowth(ModelSpec):
    """Size grows at speed ``a``; division at rate ``alpha * x`` into two halves."""

    a: float
    alpha: float

    model_id = "linear_growth"
    motion_kind = "deterministic_flow"

    def __post_init__(self):
        _positive("a", self.a)
        _positive("alpha", self.alpha, "α")

    def division_rate(self, x, t=0.0):
        return self.alpha * x

    def offspring_sample(self, x, rng, theta=None):
        h = 0.5 * x
        return OffspringDraw(2, [h, h])

    def mean_kernel(self, x):
        return AtomicKernel([0.5 * x], [2.0])

    def pair_kernel(self, x, f, g):
        return 2.0 * f(0.5 * x) * g(0.5 * x)

    def velocity(self, x):
        return self.a

    def flow(self, x, s, t):
        return x + self.a * (t - s)

    def integrated_rate(self, x, t0, tau):
        return self.alpha * tau * (x + 0.5 * self.a * tau)

    def invert_hazard(self, x, t0, e):
        ax = self.alpha * x
        return 2.0 * e / (ax + math.sqrt(ax * ax + 2.0 * self.a * self.alpha * e))

    def mean_population(self, x, s, t):
        abar = math.sqrt(self.a * self.alpha) * (t - s)
        return math.cosh(abar) + x * math.sqrt(self.alpha / self.a) * math.sinh(abar)

    def lambda_factor(self, x, s, t):
        abar = math.sqrt(self.a * self.alpha) * (t - s)
        return 1.0 + math.cosh(abar) / self.mean_population(x, s, t)


# ---------------------------------------------------------------------------
@dataclasses.dataclass(frozen=True)
class ExpGrowth(ModelSpec):
    """Size grows like ``x' = a x``; division at rate ``alpha(t) * x`` into halves.

    ``alpha`` is a constant or a :class:`PiecewiseConstant` environment.
    """

    a: float
    alpha: PiecewiseConstant

    model_id = "exp_growth"
    motion_kind = "deterministic_flow"

    def __post_init__(self):
        _positive("a", self.a)
        alpha = self.alpha
        if isinstance(alpha, (int, float)):
            _positive("alpha", alpha, "α")
            alpha = PiecewiseConstant.constant(alpha)
        elif isinstance(alpha, dict):
            try:
                alpha = PiecewiseConstant(alpha["breaks"], alpha["values"])
            except (KeyError, TypeError, ValueError) as exc:
                raise ModelConfigError(f"alpha: {exc}", "alpha") from None
        if not isinstance(alpha, PiecewiseConstant):
            raise ModelConfigError("alpha must be a number or {breaks, values}", "alpha")
        if alpha.min() <= 0:
            raise ModelConfigError("α must be > 0 on every piece", "alpha")
        object.__setattr__(self, "alpha", alpha)

    def division_rate(self, x, t=0.0):
        return self.alpha(t) * x

    def offspring_sample(self, x, rng, theta=None):
        h = 0.5 * x
        return OffspringDraw(2, [h, h])

    def mean_kernel(self, x):
        return AtomicKernel([0.5 * x], [2.0])

    def pair_kernel(self, x, f, g):
        return 2.0 * f(0.5 * x) * g(0.5 * x)

    def velocity(self, x):
        return self.a * x

    def flow(self, x, s, t):
        return x * math.exp(self.a * (t - s))

    def integrated_rate(self, x, t0, tau):
        return x * self.alpha.exp_integral(t0, t0 + tau, self.a)

    def invert_hazard(self, x, t0, e):
        if x <= 0.0:
            return math.inf
        a = self.a
        for lo, hi, v in self.alpha.pieces(t0):
            scale = v * x * math.exp(a * (lo - t0))
            if hi == math.inf:
                return lo - t0 + math.log1p(a * e / scale) / a
            piece = scale * math.expm1(a * (hi - lo)) / a
            if e <= piece:
                return lo - t0 + math.log1p(a * e / scale) / a
            e -= piece
        return math.inf  # pragma: no cover

    def mean_population(self, x, s, t):
        return 1.0 + x * self.alpha.exp_integral(s, t, self.a)

    def lambda_factor(self, x, s, t):
        return 1.0 + 1.0 / self.mean_population(x, s, t)


# ---------------------------------------------------------------------------
@dataclasses.dataclass(frozen=True)
class Parasite(ModelSpec):
    """Feller-diffusion parasite load with uniform random sharing at division.

    ``dX = g X dt + sqrt(2 sigma2 X) dW``, division rate ``alpha x + beta``.
    ``dt`` is the Euler step used for every path of this model.
    """

    g: float
    sigma2: float
    alpha: float
    beta: float
    dt: float = 1e-3

    model_id = "parasite"
    motion_kind = "diffusion"

    def __post_init__(self):
        _positive("g", self.g)
        _positive("sigma2", self.sigma2, "σ²")
        _positive("alpha", self.alpha, "α")
        _positive("beta", self.beta, "β")
        if not (isinstance(self.dt, (int, float)) and 0 < self.dt <= 0.1):
            raise ModelConfigError(f"dt must lie in (0, 0.1], got {self.dt!r}", "dt")

    def division_rate(self, x, t=0.0):
        return self.alpha * x + self.beta

    def offspring_sample(self, x, rng, theta=None):
        d = rng.random() if theta is None else theta
        y = d * x
        return OffspringDraw(2, [y, x - y])

    def mean_kernel(self, x):
        return UniformKernel(0.0, x, 2.0)

    def pair_kernel(self, x, f, g):
        if x == 0.0:
            return 2.0 * f(0.0) * g(0.0)
        val, _ = integrate.quad(lambda d: f(d * x) * g((1 - d) * x) + g(d * x) * f((1 - d) * x),
                                0.0, 1.0, epsabs=1e-11, epsrel=1e-11)
        return val

    # generator coefficients: G f = drift f' + diffusion f''
    def drift(self, x):
        return self.g * x

    def diffusion(self, x):
        return self.sigma2 * x

    def _kappa(self, s, t):
        return self.alpha * _phi(self.g - self.beta, t - s)

    def mean_population(self, x, s, t):
        return math.exp(self.beta * (t - s)) * (1.0 + x * self._kappa(s, t))

    def lambda_factor(self, x, s, t):
        return 1.0 + 1.0 / (1.0 + x * self._kappa(s, t))

    def biased_kernel_sample(self, x, s, t, rng):
        return _kernels.spine_kernel_inverse(float(x), float(s), float(t), self.g,
                                             self.alpha, self.beta, rng.random())

    def flow(self, x, s, t):
        raise TypeError("the parasite load has no deterministic flow")

    def _chunk(self, remaining):
        return int(min(max(remaining / self.dt + 2, 16), 4096))

    def evolve_trait(self, x, s, t, rng):
        if t < s:
            raise ValueError("evolve_trait needs s <= t")
        gen = rng.generator
        ts, xs = [np.array([s])], [np.array([float(x)])]
        xr, tc = float(x), float(s)
        while True:
            n = self._chunk(t - tc)
            z = gen.standard_normal(n)
            out_t, out_x = np.empty(n), np.empty(n)
            k, xr, tc, status = _kernels.feller_free_chunk(
                xr, tc, t, self.dt, self.g, self.sigma2, z, out_t, out_x)
            ts.append(out_t[:k])
            xs.append(out_x[:k])
            if status == _kernels.HORIZON:
                return GridMotion(np.concatenate(ts), np.concatenate(xs))

    def sample_life(self, x, t0, horizon, rng):
        e = rng.exponential()
        gen = rng.generator
        ts, xs = [np.array([t0])], [np.array([float(x)])]
        xr, tc, h = float(x), float(t0), 0.0
        while True:
            n = self._chunk(min(horizon - tc, 4.0 * (e - h) / (self.alpha * max(xr, 0.0) + self.beta)))
            z = gen.standard_normal(n)
            out_t, out_x = np.empty(n), np.empty(n)
            k, xr, tc, h, status = _kernels.feller_life_chunk(
                xr, tc, horizon, h, e, self.dt, self.g, self.sigma2, self.alpha, self.beta,
                z, out_t, out_x)
            ts.append(out_t[:k])
            xs.append(out_x[:k])
            if status == _kernels.NEED_MORE:
                continue
            motion = GridMotion(np.concatenate(ts), np.concatenate(xs))
            return (tc if status == _kernels.DIED else None), motion


# ---------------------------------------------------------------------------
@dataclasses.dataclass(frozen=True)
class PlasmidBD(ModelSpec):
    """Plasmid copy number as a linear birth-death process.

    Each plasmid replicates at rate ``lam`` and is lost at rate ``mu``; a
    cell with ``x`` plasmids divides at rate ``x`` and each plasmid goes to
    the first daughter with a cell-level probability drawn uniformly.
    """

    lam: float
    mu: float

    model_id = "plasmid_bd"
    motion_kind = "jump_markov"
    trait_kind = "integer"

    def __post_init__(self):
        _positive("lam", self.lam, "λ")
        _positive("mu", self.mu, "μ")
        if not self.lam - self.mu > 0:
            raise ModelConfigError("plasmid_bd requires λ−μ>0", "mu")

    def division_rate(self, x, t=0.0):
        return float(x)

    def jump_rates(self, x):
        """Per-cell (birth, death) rates of the plasmid count."""
        return self.lam * x, self.mu * x

    def offspring_sample(self, x, rng, theta=None):
        d = rng.random() if theta is None else theta
        x = int(x)
        if x <= 64:
            k = sum(1 for _ in range(x) if rng.random() < d)
        else:
            k = int(rng.generator.binomial(x, d))
        return OffspringDraw(2, [k, x - k])

    def mean_kernel(self, x):
        x = int(x)
        return AtomicKernel(range(x + 1), [2.0 / (x + 1)] * (x + 1))

    def pair_kernel(self, x, f, g):
        x = int(x)
        return math.fsum(f(k) * g(x - k) + g(k) * f(x - k) for k in range(x + 1)) / (x + 1)

    def _c(self, s, t):
        return _phi(self.lam - self.mu, t - s)

    def mean_population(self, x, s, t):
        return 1.0 + x * self._c(s, t)

    def lambda_factor(self, x, s, t):
        return 1.0 + 1.0 / self.mean_population(x, s, t)

    def biased_jump_rates(self, x, s, t):
        c = self._c(s, t)
        q = c / (1.0 + c * x)
        return self.lam * x * (1.0 + q), self.mu * x * (1.0 - q)

    def biased_kernel_sample(self, x, s, t, rng):
        # weights proportional to 1 + c k on {0..x}
        x = int(x)
        c = self._c(s, t)
        total = (x + 1) * (1.0 + 0.5 * c * x)
        u = rng.random() * total
        # cumulative weight up to k is (k+1)(1 + c k / 2)
        k = int(math.floor((-(1.0 + 0.5 * c) + math.sqrt((1.0 + 0.5 * c) ** 2 + 2.0 * c * u)) / c)) \
            if c > 0 else int(u)
        k = min(max(k, 0), x)
        while k > 0 and k * (1.0 + 0.5 * c * (k - 1)) > u:
            k -= 1
        while k < x and (k + 1) * (1.0 + 0.5 * c * k) <= u:
            k += 1
        return k

    def _gillespie(self, x, t0, t1, rng, divide):
        times, values = [t0], [int(x)]
        t = t0
        x = int(x)
        pb = self.lam / (self.lam + self.mu + (1.0 if divide else 0.0))
        pd = (self.lam + self.mu) / (self.lam + self.mu + (1.0 if divide else 0.0))
        total_per = self.lam + self.mu + (1.0 if divide else 0.0)
        while x > 0:
            t += rng.exponential() / (total_per * x)
            if t >= t1:
                break
            u = rng.random()
            if u < pb:
                x += 1
            elif u < pd:
                x -= 1
            else:
                return t, JumpMotion(times, values, t)
            times.append(t)
            values.append(x)
        return None, JumpMotion(times, values, t1)

    def evolve_trait(self, x, s, t, rng):
        if t < s:
            raise ValueError("evolve_trait needs s <= t")
        return self._gillespie(x, s, t, rng, divide=False)[1]

    def sample_life(self, x, t0, horizon, rng):
        return self._gillespie(x, t0, horizon, rng, divide=True)


# ---------------------------------------------------------------------------
@functools.lru_cache(maxsize=4096)
def _switch_mean(b0, b1, p, tau):
    q = np.array([[b0 * (1 - 2 * p), 2 * p * b0], [2 * p * b1, b1 * (1 - 2 * p)]])
    return tuple(linalg.expm(q * tau).sum(axis=1))


@dataclasses.dataclass(frozen=True)
class TwoTypeSwitch(ModelSpec):
    """Two types with rates ``b0``, ``b1``; each daughter switches type w.p. ``p``."""

    b0: float
    b1: float
    p: float

    model_id = "two_type_switch"
    motion_kind = "none"
    trait_kind = "flag"

    def __post_init__(self):
        _positive("b0", self.b0, "b₀")
        _positive("b1", self.b1, "b₁")
        if not (isinstance(self.p, (int, float)) and 0.0 <= self.p <= 1.0):
            raise ModelConfigError(f"p must lie in [0, 1], got {self.p!r}", "p")

    def division_rate(self, x, t=0.0):
        return self.b1 if x else self.b0

    def offspring_sample(self, x, rng, theta=None):
        u1, u2 = (rng.random(), rng.random()) if theta is None else theta
        return OffspringDraw(2, [1 - x if u1 < self.p else x, 1 - x if u2 < self.p else x])

    def mean_kernel(self, x):
        return AtomicKernel([x, 1 - x], [2.0 * (1.0 - self.p), 2.0 * self.p])

    def pair_kernel(self, x, f, g):
        ef = (1.0 - self.p) * f(x) + self.p * f(1 - x)
        eg = (1.0 - self.p) * g(x) + self.p * g(1 - x)
        return 2.0 * ef * eg

    def integrated_rate(self, x, t0, tau):
        return self.division_rate(x) * tau

    def invert_hazard(self, x, t0, e):
        return e / self.division_rate(x)

    def mean_population(self, x, s, t):
        return _switch_mean(float(self.b0), float(self.b1), float(self.p), float(t - s))[int(x)]

    def spine_bound(self, x, s, t):
        # Lambda(x, ., t) is monotone on [s, t] and equals 2 at t
        return max(self.lambda_factor(x, s, t), 2.0)


MODELS = {cls.model_id: cls for cls in (Yule, LinearGrowth, ExpGrowth, Parasite, PlasmidBD, TwoTypeSwitch)}
