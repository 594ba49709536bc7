"""Piecewise-constant time-varying coefficients."""
from __future__ import annotations

import bisect
import math
from dataclasses import dataclass


@dataclass(frozen=True)
class PiecewiseConstant:
    """A right-continuous step function on [0, inf).

    ``values[i]`` holds on ``[breaks[i-1], breaks[i])`` with ``breaks[-1]``
    read as 0 and the last value extended to infinity.
    """

    breaks: tuple = ()
    values: tuple = (1.0,)

    def __post_init__(self):
        object.__setattr__(self, "breaks", tuple(float(b) for b in self.breaks))
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        if len(self.values) != len(self.breaks) + 1:
            raise ValueError("piecewise function needs len(values) == len(breaks) + 1")
        if any(b <= 0 for b in self.breaks) or list(self.breaks) != sorted(set(self.breaks)):
            raise ValueError("breaks must be positive and strictly increasing")

    @classmethod
    def constant(cls, value: float) -> "PiecewiseConstant":
        return cls((), (value,))

    @property
    def is_constant(self) -> bool:
        return not self.breaks

    def __call__(self, t: float) -> float:
        return self.values[bisect.bisect_right(self.breaks, t)]

    def min(self) -> float:
        return min(self.values)

    def pieces(self, s: float, t: float = math.inf):
        """Yield ``(start, end, value)`` covering [s, t)."""
        i = bisect.bisect_right(self.breaks, s)
        lo = s
        while lo < t:
            hi = self.breaks[i] if i < len(self.breaks) else math.inf
            hi = min(hi, t)
            yield lo, hi, self.values[i]
            lo = hi
            i += 1

    def exp_integral(self, s: float, t: float, a: float) -> float:
        """Closed form of the integral of value(r) * exp(a (r - s)) over [s, t]."""
        total = 0.0
        for lo, hi, v in self.pieces(s, t):
            if v == 0.0:
                continue
            if a == 0.0:
                total += v * (hi - lo)
            else:
                total += v * math.exp(a * (lo - s)) * math.expm1(a * (hi - lo)) / a
        return total

    def as_dict(self):
        if self.is_constant:
            return self.values[0]
        return {"breaks": list(self.breaks), "values": list(self.values)}
