"""Trait trajectories between two division events.

Three storage policies, matching the three kinds of trait motion:

* :class:`FlowMotion` keeps only the starting point and re-evaluates the
  deterministic flow on demand (also used for constant traits);
* :class:`GridMotion` keeps the integrator grid of a diffusion and
  interpolates linearly between nodes;
* :class:`JumpMotion` keeps the event times of a pure-jump trait and is
  right-continuous.
"""
from __future__ import annotations

import bisect

import numpy as np


class FlowMotion:
    __slots__ = ("model", "x0", "t0", "t1")

    def __init__(self, model, x0, t0, t1):
        self.model = model
        self.x0 = x0
        self.t0 = t0
        self.t1 = t1

    def value_at(self, t):
        return self.model.flow(self.x0, self.t0, t)

    @property
    def terminal(self):
        return self.model.flow(self.x0, self.t0, self.t1)

    def points(self):
        return [(self.t0, self.x0), (self.t1, self.terminal)]

    def __repr__(self):
        return f"FlowMotion(x0={self.x0!r}, [{self.t0}, {self.t1}])"


class GridMotion:
    __slots__ = ("times", "values")

    def __init__(self, times, values):
        self.times = np.asarray(times, dtype=float)
        self.values = np.asarray(values, dtype=float)

    @property
    def t0(self):
        return float(self.times[0])

    @property
    def t1(self):
        return float(self.times[-1])

    @property
    def x0(self):
        return float(self.values[0])

    def value_at(self, t):
        return float(np.interp(t, self.times, self.values))

    @property
    def terminal(self):
        return float(self.values[-1])

    def points(self):
        return list(zip(self.times.tolist(), self.values.tolist()))

    def __repr__(self):
        return f"GridMotion({len(self.times)} nodes, [{self.t0}, {self.t1}])"


class JumpMotion:
    __slots__ = ("times", "values", "t1")

    def __init__(self, times, values, t1):
        self.times = list(times)
        self.values = list(values)
        self.t1 = t1

    @property
    def t0(self):
        return self.times[0]

    @property
    def x0(self):
        return self.values[0]

    def value_at(self, t):
        return self.values[bisect.bisect_right(self.times, t) - 1]

    @property
    def terminal(self):
        return self.values[-1]

    def points(self):
        pts = list(zip(self.times, self.values))
        pts.append((self.t1, self.values[-1]))
        return pts

    def __repr__(self):
        return f"JumpMotion({len(self.times) - 1} jumps, [{self.t0}, {self.t1}])"
