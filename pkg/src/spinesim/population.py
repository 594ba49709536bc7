"""Event-driven simulation of the whole branching population.

Each individual draws its lifetime at birth from its own random stream
(hazard inversion along deterministic flows, Euler or Gillespie paths
otherwise), and a priority queue releases divisions in time order.  Because
streams are keyed by Ulam-Harris labels, the tree does not depend on the
order in which events are processed.
"""
from __future__ import annotations

import csv
import heapq
import math
from dataclasses import dataclass

from .paths import TraitPath, fmt
from .streams import as_stream

ROOT = ()


def format_label(label: tuple) -> str:
    return ".".join(map(str, label)) if label else "∅"


def parse_label(text: str) -> tuple:
    if text in ("∅", ""):
        return ()
    return tuple(int(p) for p in text.split("."))


@dataclass(frozen=True)
class Caps:
    max_individuals: int = 1_000_000
    max_events: int = 10_000_000

    def __post_init__(self):
        if self.max_individuals < 1 or self.max_events < 1:
            raise ValueError("caps must be positive")


class CapExceededError(RuntimeError):
    """Raised when a population outgrows its caps; carries the partial tree."""

    def __init__(self, message, tree, time_reached):
        super().__init__(message)
        self.tree = tree
        self.time_reached = time_reached


class Individual:
    __slots__ = ("label", "parent", "birth", "death", "x_birth", "motion",
                 "n_children", "generation")

    def __init__(self, label, parent, birth, death, x_birth, motion, generation):
        self.label = label
        self.parent = parent
        self.birth = birth
        self.death = death
        self.x_birth = x_birth
        self.motion = motion
        self.n_children = 0
        self.generation = generation

    def alive_at(self, s: float) -> bool:
        return self.birth <= s and (self.death is None or s < self.death)

    def trait_at(self, s: float):
        return self.motion.value_at(s)

    @property
    def trait_at_death(self):
        return self.motion.terminal

    def __repr__(self):
        return (f"Individual({format_label(self.label)}, birth={self.birth:.6g}, "
                f"death={self.death}, x_birth={self.x_birth!r})")


class PopulationTree:
    """Genealogy of one simulated population, indexed by label."""

    def __init__(self, model, horizon, start=0.0, seed=None, caps=None):
        self.model = model
        self.horizon = horizon
        self.start = start
        self.seed = seed
        self.caps = caps
        self.individuals: dict[tuple, Individual] = {}
        self.roots: list[tuple] = []
        self.extinct_at: float | None = None
        self.n_events = 0

    def __len__(self):
        return len(self.individuals)

    def __getitem__(self, label) -> Individual:
        return self.individuals[label]

    def __iter__(self):
        return iter(self.individuals.values())

    def _check_time(self, s):
        if not self.start <= s <= self.horizon:
            raise ValueError(f"time {s} outside [{self.start}, {self.horizon}]")

    def alive(self, s: float):
        self._check_time(s)
        return [ind for ind in self.individuals.values() if ind.alive_at(s)]

    def count_alive(self, s: float) -> int:
        if s == self.horizon:
            return sum(1 for ind in self.individuals.values() if ind.death is None)
        return len(self.alive(s))

    def deaths(self, until: float | None = None):
        until = self.horizon if until is None else until
        return [ind for ind in self.individuals.values()
                if ind.death is not None and ind.death <= until]

    def ancestors(self, label):
        """Individuals from the root down to ``label`` inclusive."""
        chain = []
        while label is not None:
            ind = self.individuals[label]
            chain.append(ind)
            label = ind.parent
        chain.reverse()
        return chain

    def ancestor_at(self, label, s: float) -> Individual:
        for ind in self.ancestors(label):
            if ind.alive_at(s) or (ind.death is None and s == self.horizon):
                return ind
        raise ValueError(f"{format_label(label)} has no ancestor alive at {s}")


def simulate_population(model, init, horizon, caps=None, rng=0, start=0.0) -> PopulationTree:
    """Simulate the population started from one individual per entry of ``init``.

    A single initial individual is labelled ∅; several are labelled 1..n.
    Raises :class:`CapExceededError` with the partial tree if the caps are hit.
    """
    if not (horizon >= start >= 0) or math.isinf(horizon):
        raise ValueError(f"need 0 <= start <= horizon < inf, got {start}, {horizon}")
    caps = caps or Caps()
    stream = as_stream(rng)
    tree = PopulationTree(model, horizon, start, seed=stream.key, caps=caps)
    inds = tree.individuals
    heap = []
    alive = 0
    sample_life = model.sample_life

    def born(label, parent, t0, x, st, gen):
        nonlocal alive
        death, motion = sample_life(x, t0, horizon, st)
        inds[label] = Individual(label, parent, t0, death, x, motion, gen)
        alive += 1
        if len(inds) > caps.max_individuals:
            raise CapExceededError(
                f"population exceeded {caps.max_individuals} individuals at t={t0:.6g}",
                tree, t0)
        if death is not None:
            heapq.heappush(heap, (death, label, st))

    init = [model.check_trait(x) for x in init]
    if len(init) == 1:
        tree.roots.append(ROOT)
        born(ROOT, None, start, init[0], stream.spawn(0), 0)
    else:
        for i, x in enumerate(init, 1):
            tree.roots.append((i,))
            born((i,), None, start, x, stream.spawn(i), 0)

    while heap:
        t, label, st = heapq.heappop(heap)
        tree.n_events += 1
        if tree.n_events > caps.max_events:
            raise CapExceededError(f"more than {caps.max_events} division events by t={t:.6g}",
                                   tree, t)
        ind = inds[label]
        draw = model.offspring_sample(ind.motion.terminal, st)
        ind.n_children = draw.count
        alive -= 1
        for j, y in enumerate(draw.children, 1):
            born(label + (j,), label, t, y, st.spawn(j), ind.generation + 1)
        if alive == 0:
            tree.extinct_at = t
    return tree


def population_snapshot(tree: PopulationTree, s: float):
    """``[(label, trait at s)]`` for the individuals alive at ``s``."""
    if s > tree.horizon:
        raise ValueError(f"snapshot time {s} is beyond the horizon {tree.horizon}")
    return [(ind.label, ind.trait_at(s)) for ind in tree.alive(s)]


def lineage_of(tree: PopulationTree, u, t: float) -> TraitPath:
    """Trait along the ancestral lineage of ``u`` on [start, t]."""
    if u not in tree.individuals or not (
            tree.individuals[u].alive_at(t)
            or (t == tree.horizon and tree.individuals[u].death is None)):
        raise ValueError(f"{format_label(u)} is not alive at {t}")
    chain = tree.ancestors(u)
    segments, jumps = [], []
    for a, b in zip(chain, chain[1:]):
        segments.append((a.birth, a.death, a.motion))
        jumps.append((a.death, a.motion.terminal, b.x_birth))
    last = chain[-1]
    segments.append((last.birth, t, last.motion))
    return TraitPath(t, segments, jumps, kind="lineage")


TREE_COLUMNS = ("replicate", "label", "parent", "alpha", "beta", "trait_at_birth", "trait_at_horizon")


def write_tree_csv(fh, trees, header_lines=()):
    """One row per individual; ``trees`` yields ``(replicate, tree)``."""
    for line in header_lines:
        fh.write(f"# {line}\n")
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(TREE_COLUMNS)
    for rep, tree in trees:
        for ind in tree:
            at_h = ind.motion.value_at(tree.horizon) if ind.death is None else None
            w.writerow((rep, format_label(ind.label),
                        "" if ind.parent is None else format_label(ind.parent),
                        fmt(ind.birth), fmt(ind.death), fmt(ind.x_birth), fmt(at_h)))
