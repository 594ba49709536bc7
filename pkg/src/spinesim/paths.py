"""Piecewise trait trajectories with division events.

One representation serves the auxiliary (spine) process, lineages read off
a simulated tree, and tagged-cell paths.
"""
from __future__ import annotations

import bisect
import csv
import numbers
from dataclasses import dataclass, field


def fmt(v) -> str:
    """Decimal text with 17 significant digits; integers stay integers."""
    if v is None:
        return ""
    if isinstance(v, numbers.Integral):
        return str(int(v))
    return format(float(v), ".17g")


@dataclass
class TraitPath:
    """A trajectory on ``[start, horizon]``.

    ``segments[i] = (a, b, motion)`` tile the interval; ``jumps[i] =
    (time, pre, post)`` separates segment i from segment i + 1.
    """

    horizon: float
    segments: list = field(default_factory=list)
    jumps: list = field(default_factory=list)
    kind: str = "auxiliary"
    extinct_at: float | None = None

    @property
    def start(self) -> float:
        return self.segments[0][0]

    @property
    def x0(self):
        return self.segments[0][2].x0

    @property
    def division_count(self) -> int:
        return len(self.jumps)

    @property
    def division_times(self):
        return [j[0] for j in self.jumps]

    def value_at(self, s: float):
        starts = [seg[0] for seg in self.segments]
        i = max(bisect.bisect_right(starts, s) - 1, 0)
        a, b, motion = self.segments[i]
        if s > b + 1e-12:
            raise ValueError(f"time {s} outside the path [{self.start}, {self.horizon}]")
        return motion.value_at(min(s, b))

    @property
    def terminal(self):
        a, b, motion = self.segments[-1]
        return motion.value_at(b)

    def rows(self):
        """``(time, trait, event)`` records in time order."""
        out = []
        for i, (a, b, motion) in enumerate(self.segments):
            pts = motion.points()
            if i > 0:
                pts = pts[1:]
            out.extend((t, x, "motion") for t, x in pts if a <= t <= b)
            if i < len(self.jumps):
                t, pre, post = self.jumps[i]
                out.append((t, post, "division"))
        return out

    def check(self):
        """Structural invariants; raises AssertionError on violation."""
        assert len(self.segments) == len(self.jumps) + 1
        for i, (t, pre, post) in enumerate(self.jumps):
            assert self.segments[i][1] == t == self.segments[i + 1][0]
            assert self.segments[i + 1][2].x0 == post
            if i:
                assert t > self.jumps[i - 1][0]
        return True


PATH_COLUMNS = ("replicate", "time", "trait", "event")


def write_paths_csv(fh, paths, header_lines=()):
    """Write paths, one row per record, after ``# ``-prefixed header lines."""
    for line in header_lines:
        fh.write(f"# {line}\n")
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(PATH_COLUMNS)
    for rep, path in paths:
        for t, x, ev in path.rows():
            w.writerow((rep, fmt(t), fmt(x), ev))
