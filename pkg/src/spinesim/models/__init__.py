"""Model registry and the model-level operations."""
from __future__ import annotations

import dataclasses
import math

from ..streams import as_stream
from .base import (AtomicKernel, ModelConfigError, ModelSpec, NoClosedFormError,
                   OffspringDraw, QuadratureError, UniformKernel)
from .catalog import MODELS, ExpGrowth, LinearGrowth, Parasite, PlasmidBD, TwoTypeSwitch, Yule
from .environment import PiecewiseConstant

__all__ = [
    "build_model", "division_rate", "offspring_sample", "evolve_trait",
    "mean_population", "mean_population_mc", "lambda_factor",
    "ModelSpec", "OffspringDraw", "AtomicKernel", "UniformKernel",
    "ModelConfigError", "NoClosedFormError", "QuadratureError",
    "Yule", "LinearGrowth", "ExpGrowth", "Parasite", "PlasmidBD", "TwoTypeSwitch",
    "PiecewiseConstant", "MODELS",
]

# Greek and subscript spellings accepted in configuration files
ALIASES = {
    "α": "alpha", "β": "beta", "σ²": "sigma2", "σ2": "sigma2", "λ": "lam", "lambda": "lam",
    "μ": "mu", "b₀": "b0", "b₁": "b1", "p₀": "p0",
}


def build_model(config: dict) -> ModelSpec:
    """Build an immutable model from ``{"id": ..., <parameters>}``.

    >>> build_model({"id": "yule", "b": 1, "m": 2}).model_id
    'yule'
    """
    if not isinstance(config, dict):
        raise ModelConfigError("model configuration must be a mapping")
    cfg = dict(config)
    model_id = cfg.pop("id", cfg.pop("model_id", None))
    if model_id not in MODELS:
        raise ModelConfigError(f"unknown model id {model_id!r}; expected one of {sorted(MODELS)}", "id")
    cls = MODELS[model_id]
    names = {f.name: f for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, value in cfg.items():
        name = ALIASES.get(key, key)
        if name not in names:
            raise ModelConfigError(f"unknown parameter {key!r} for model {model_id}", key)
        if name in kwargs:
            raise ModelConfigError(f"parameter {key!r} given twice", key)
        kwargs[name] = value
    for name, f in names.items():
        if name not in kwargs and f.default is dataclasses.MISSING:
            raise ModelConfigError(f"missing parameter {name!r} for model {model_id}", name)
    return cls(**kwargs)


def division_rate(model: ModelSpec, x, t: float = 0.0) -> float:
    return model.division_rate(model.check_trait(x), t)


def offspring_sample(model: ModelSpec, x, rng, theta=None) -> OffspringDraw:
    return model.offspring_sample(model.check_trait(x), as_stream(rng), theta)


def evolve_trait(model: ModelSpec, x, s: float, t: float, rng):
    return model.evolve_trait(model.check_trait(x), s, t, as_stream(rng))


def _check_times(s, t):
    if not (0 <= s <= t and math.isfinite(t)):
        raise ValueError(f"need 0 <= s <= t < inf, got s={s!r}, t={t!r}")


def mean_population(model: ModelSpec, x, s: float, t: float) -> float:
    """Closed-form m(x, s, t)."""
    _check_times(s, t)
    if not model.has_closed_form_mean:
        raise NoClosedFormError(f"{model.model_id} has no closed form; use mean_population_mc")
    if s == t:
        return 1.0
    return model.mean_population(model.check_trait(x), s, t)


def lambda_factor(model: ModelSpec, x, s: float, t: float, generic: bool = False) -> float:
    """Lambda(x, s, t).

    ``generic=True`` bypasses the closed-form fast path and integrates
    m(y,s,t)/m(x,s,t) against the offspring intensity.
    """
    _check_times(s, t)
    x = model.check_trait(x)
    if generic:
        return ModelSpec.lambda_factor(model, x, s, t)
    return model.lambda_factor(x, s, t)


def mean_population_mc(model: ModelSpec, x, s: float, t: float, n: int, rng, caps=None):
    from .montecarlo import mean_population_mc as _mc
    return _mc(model, x, s, t, n, rng, caps)
