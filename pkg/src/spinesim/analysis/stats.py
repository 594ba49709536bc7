"""Monte Carlo estimates, comparison reports and two-sample tests."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import stats as sps


@dataclass(frozen=True)
class MCEstimate:
    n: int
    mean: float
    std_error: float
    ci_level: float = 0.99

    def __post_init__(self):
        if self.std_error < 0:
            raise ValueError("std_error must be >= 0")
        if not 0 < self.ci_level < 1:
            raise ValueError("ci_level must lie in (0, 1)")

    @classmethod
    def from_samples(cls, samples, ci_level: float = 0.99) -> "MCEstimate":
        x = np.asarray(samples, dtype=float)
        n = x.size
        if n == 0:
            raise ValueError("no samples")
        se = float(x.std(ddof=1) / math.sqrt(n)) if n >= 2 else 0.0
        return cls(n, float(x.mean()), se, ci_level)

    @classmethod
    def exact(cls, value: float, n: int = 1, ci_level: float = 0.99) -> "MCEstimate":
        return cls(n, float(value), 0.0, ci_level)

    @property
    def ci(self) -> tuple[float, float]:
        q = sps.norm.ppf(0.5 + self.ci_level / 2)
        return self.mean - q * self.std_error, self.mean + q * self.std_error

    def scaled(self, c: float) -> "MCEstimate":
        return MCEstimate(self.n, c * self.mean, abs(c) * self.std_error, self.ci_level)

    def overlaps(self, other: "MCEstimate") -> bool:
        a, b = self.ci
        c, d = other.ci
        return bool(a <= d and c <= b)

    def __str__(self):
        return f"{self.mean:.6g} ± {self.std_error:.2g} (n={self.n})"


def z_score(a: MCEstimate, b: MCEstimate) -> float:
    se = math.hypot(a.std_error, b.std_error)
    diff = a.mean - b.mean
    if se == 0.0:
        return 0.0 if diff == 0.0 else math.copysign(math.inf, diff)
    return diff / se


@dataclass
class VerificationReport:
    """Paired estimates of both sides of an identity.

    ``policy`` is ``"z"`` (pass iff ``|z| <= threshold``) or
    ``"ci_overlap"`` (pass iff the two confidence intervals overlap).
    Both verdicts are always recorded.
    """

    identity: str
    lhs: MCEstimate
    rhs: MCEstimate
    policy: str = "z"
    threshold: float = 3.0
    details: dict = field(default_factory=dict)

    @property
    def z(self) -> float:
        return z_score(self.lhs, self.rhs)

    @property
    def z_pass(self) -> bool:
        return bool(abs(self.z) <= self.threshold)

    @property
    def ci_overlap(self) -> bool:
        return self.lhs.overlaps(self.rhs)

    @property
    def passed(self) -> bool:
        if self.policy == "z":
            return self.z_pass
        if self.policy == "ci_overlap":
            return self.ci_overlap
        raise ValueError(f"unknown pass policy {self.policy!r}")

    def tolerance_policy(self) -> str:
        if self.policy == "z":
            return f"|z| <= {self.threshold:g}"
        return f"{self.lhs.ci_level:.0%} confidence intervals overlap"

    def to_dict(self) -> dict:
        return {
            "identity": self.identity,
            "lhs": asdict(self.lhs),
            "rhs": asdict(self.rhs),
            "z": float(self.z),
            "z_pass": self.z_pass,
            "ci_overlap": self.ci_overlap,
            "policy": self.tolerance_policy(),
            "pass": self.passed,
            "details": self.details,
        }

    def __str__(self):
        verdict = "PASS" if self.passed else "FAIL"
        return (f"{self.identity}: lhs {self.lhs} | rhs {self.rhs} | z={self.z:+.2f} "
                f"[{self.tolerance_policy()}] {verdict}")


@dataclass(frozen=True)
class EmpiricalDistribution:
    values: np.ndarray

    def __post_init__(self):
        v = np.sort(np.asarray(self.values, dtype=float))
        if v.size == 0:
            raise ValueError("empty sample")
        object.__setattr__(self, "values", v)

    @classmethod
    def of(cls, samples) -> "EmpiricalDistribution":
        return samples if isinstance(samples, cls) else cls(samples)

    @property
    def n(self) -> int:
        return int(self.values.size)

    def cdf(self, x):
        return np.searchsorted(self.values, x, side="right") / self.n

    def frequencies(self):
        """``(support, relative frequency)`` for discrete samples."""
        support, counts = np.unique(self.values, return_counts=True)
        return support, counts / self.n


def ks_two_sample(a, b) -> tuple[float, float]:
    """Two-sample Kolmogorov-Smirnov distance and its asymptotic p-value."""
    a, b = EmpiricalDistribution.of(a), EmpiricalDistribution.of(b)
    grid = np.concatenate([a.values, b.values])
    d = float(np.max(np.abs(a.cdf(grid) - b.cdf(grid))))
    en = a.n * b.n / (a.n + b.n)
    return d, float(sps.kstwobign.sf(math.sqrt(en) * d))


def bootstrap_ks(a, b, rng, n_boot: int = 200, level: float = 0.95):
    """Percentile bootstrap interval of the KS distance."""
    a, b = EmpiricalDistribution.of(a), EmpiricalDistribution.of(b)
    gen = rng.generator if hasattr(rng, "generator") else np.random.default_rng(rng)
    ds = np.empty(n_boot)
    for i in range(n_boot):
        ra = gen.choice(a.values, a.n)
        rb = gen.choice(b.values, b.n)
        ds[i] = ks_two_sample(ra, rb)[0]
    lo, hi = np.quantile(ds, [(1 - level) / 2, (1 + level) / 2])
    return float(lo), float(hi)


def poisson_chisquare(counts, mu: float, min_expected: float = 5.0):
    """Chi-square goodness of fit of integer counts to Poisson(mu).

    Unit cells are merged from both tails until each cell expects at least
    ``min_expected`` observations; the outer cells absorb the tails.
    """
    x = np.asarray(counts, dtype=int)
    n = x.size
    top = int(max(x.max(initial=0), sps.poisson.ppf(1 - 1e-12, mu))) + 1
    exp = n * sps.poisson.pmf(np.arange(top + 1), mu)
    exp[-1] = n * sps.poisson.sf(top - 1, mu)
    obs = np.bincount(np.minimum(x, top), minlength=top + 1).astype(float)
    # merge the right tail, then the left tail
    while len(exp) > 1 and exp[-1] < min_expected:
        exp[-2] += exp[-1]
        obs[-2] += obs[-1]
        exp, obs = exp[:-1], obs[:-1]
    while len(exp) > 1 and exp[0] < min_expected:
        exp[1] += exp[0]
        obs[1] += obs[0]
        exp, obs = exp[1:], obs[1:]
    if len(exp) < 2:
        return 0.0, 1.0
    res = sps.chisquare(obs, exp * (obs.sum() / exp.sum()))
    return float(res.statistic), float(res.pvalue)
