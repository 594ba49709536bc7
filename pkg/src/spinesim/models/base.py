"""Shared machinery for the bundled branching models."""
from __future__ import annotations

import dataclasses
import math
from typing import NamedTuple, Sequence

from scipy import integrate

from ..motion import FlowMotion


class ModelConfigError(ValueError):
    """Invalid model configuration; ``key`` names the offending parameter."""

    def __init__(self, message: str, key: str | None = None):
        super().__init__(message)
        self.key = key


class NoClosedFormError(NotImplementedError):
    pass


class QuadratureError(ArithmeticError):
    pass


class OffspringDraw(NamedTuple):
    count: int
    children: list


class AtomicKernel:
    """Finite measure ``sum_i w_i delta_{y_i}``."""

    __slots__ = ("atoms", "weights")

    def __init__(self, atoms: Sequence, weights: Sequence[float]):
        self.atoms = tuple(atoms)
        self.weights = tuple(float(w) for w in weights)

    @property
    def mass(self) -> float:
        return math.fsum(self.weights)

    def integrate(self, fn) -> float:
        return math.fsum(w * fn(y) for y, w in zip(self.atoms, self.weights))


class UniformKernel:
    """``mass`` times the uniform law on [lo, hi]."""

    __slots__ = ("lo", "hi", "mass")

    def __init__(self, lo: float, hi: float, mass: float):
        self.lo = float(lo)
        self.hi = float(hi)
        self.mass = float(mass)

    def integrate(self, fn, epsabs: float = 1e-10) -> float:
        width = self.hi - self.lo
        if width <= 0.0:
            return self.mass * fn(self.lo)
        val, err = integrate.quad(fn, self.lo, self.hi, epsabs=epsabs, epsrel=1e-12, limit=200)
        if not err <= epsabs:
            raise QuadratureError(f"quadrature error estimate {err:.3g} exceeds {epsabs:.1g}")
        return self.mass * val / width


def _phi(d: float, tau: float) -> float:
    """(exp(d*tau) - 1) / d with the d -> 0 limit."""
    if d == 0.0:
        return tau
    return math.expm1(d * tau) / d


@dataclasses.dataclass(frozen=True)
class ModelSpec:
    """Base class of an immutable branching model.

    Subclasses fill in the rate, offspring law, trait motion and the
    mean-growth function.  Traits are plain Python scalars.
    """

    model_id = "abstract"
    motion_kind = "none"
    trait_kind = "real"
    has_closed_form_mean = True
    binary = True

    # --- configuration -------------------------------------------------
    @property
    def params(self) -> dict:
        out = {}
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            out[f.name] = v.as_dict() if hasattr(v, "as_dict") else v
        return out

    def to_config(self) -> dict:
        return {"id": self.model_id, **self.params}

    def check_trait(self, x):
        if self.trait_kind == "flag":
            if x not in (0, 1):
                raise ValueError(f"trait must be 0 or 1 for {self.model_id}, got {x!r}")
        elif self.trait_kind == "integer":
            if int(x) != x or x < 0:
                raise ValueError(f"trait must be a nonnegative integer for {self.model_id}, got {x!r}")
        elif not x >= 0:
            raise ValueError(f"trait must be nonnegative for {self.model_id}, got {x!r}")
        return x

    # --- rates and offspring -------------------------------------------
    def division_rate(self, x, t: float = 0.0) -> float:
        raise NotImplementedError

    def mean_offspring(self, x) -> float:
        return 2.0

    def offspring_sample(self, x, rng, theta=None) -> OffspringDraw:
        raise NotImplementedError

    def mean_kernel(self, x):
        """The offspring intensity measure m(x, dy)."""
        raise NotImplementedError

    def pair_kernel(self, x, f, g) -> float:
        """Sum over ordered pairs a != b of distinct children of E[f(child a) g(child b)]."""
        raise NotImplementedError

    # --- motion ---------------------------------------------------------
    def flow(self, x, s: float, t: float):
        return x

    def evolve_trait(self, x, s: float, t: float, rng):
        if t < s:
            raise ValueError("evolve_trait needs s <= t")
        return FlowMotion(self, x, s, t)

    def sample_life(self, x, t0: float, horizon: float, rng):
        """Lifetime of an individual born at ``t0`` with trait ``x``.

        Returns ``(death_time or None, motion)`` with the motion record
        covering ``[t0, min(death_time, horizon)]``.
        """
        tau = self.invert_hazard(x, t0, rng.exponential())
        if t0 + tau < horizon:
            return t0 + tau, FlowMotion(self, x, t0, t0 + tau)
        return None, FlowMotion(self, x, t0, horizon)

    def integrated_rate(self, x, t0: float, tau: float) -> float:
        """Integral of B along the flow from ``(x, t0)`` over ``[t0, t0 + tau]``."""
        raise NotImplementedError

    def invert_hazard(self, x, t0: float, e: float) -> float:
        """Smallest tau with integrated_rate(x, t0, tau) = e (inf if never)."""
        raise NotImplementedError

    # --- first moment ---------------------------------------------------
    def mean_population(self, x, s: float, t: float) -> float:
        raise NoClosedFormError(
            f"{self.model_id} has no closed-form mean; use mean_population_mc")

    def lambda_factor(self, x, s: float, t: float) -> float:
        """Generic Lambda: integral of m(y,s,t)/m(x,s,t) against m(x,dy)."""
        mx = self.mean_population(x, s, t)
        return self.mean_kernel(x).integrate(lambda y: self.mean_population(y, s, t)) / mx

    def spine_bound(self, x, s: float, t: float) -> float:
        """Upper bound of Lambda(Phi(x, s, r), r, t) for r in [s, t]."""
        return self.mean_offspring(x)

    def biased_kernel_sample(self, x, s: float, t: float, rng):
        ker = self.mean_kernel(x)
        if not isinstance(ker, AtomicKernel):
            raise NotImplementedError(f"{self.model_id} needs its own biased kernel sampler")
        w = [wi * self.mean_population(y, s, t) for y, wi in zip(ker.atoms, ker.weights)]
        u = rng.random() * math.fsum(w)
        acc = 0.0
        for y, wi in zip(ker.atoms, w):
            acc += wi
            if u < acc:
                return y
        return ker.atoms[-1]


def make_offspring_draw(children) -> OffspringDraw:
    return OffspringDraw(len(children), list(children))
