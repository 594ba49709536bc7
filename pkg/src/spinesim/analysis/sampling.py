"""Uniform sampling of lineages from simulated trees and the sampling limit."""
from __future__ import annotations

from functools import partial

import numpy as np

from ..auxiliary import sample_pi_t, simulate_auxiliary
from ..parallel import map_replicates
from ..population import Caps, lineage_of, simulate_population
from ..streams import as_stream
from .stats import bootstrap_ks, ks_two_sample


class ExtinctionError(RuntimeError):
    """No surviving population within the resampling budget."""


def _uniform_alive(tree, t, stream):
    alive = tree.alive(t)
    if not alive:
        raise ExtinctionError(f"population extinct by t={t}")
    return alive[int(stream.random() * len(alive))]


def sample_uniform_lineage(tree, t: float, rng):
    """Lineage of an individual drawn uniformly among those alive at ``t``."""
    ind = _uniform_alive(tree, t, as_stream(rng))
    return lineage_of(tree, ind.label, t)


def division_count(path) -> int:
    return path.division_count


def draw_initial(atoms, n: int, rng):
    """``n`` i.i.d. traits from the discrete law ``[(x, weight), ...]``."""
    xs = [x for x, _ in atoms]
    w = np.array([float(wi) for _, wi in atoms])
    if w.size == 0 or (w < 0).any() or w.sum() <= 0:
        raise ValueError("initial law needs nonnegative weights, not all zero")
    cum = np.cumsum(w / w.sum())
    stream = as_stream(rng)
    return [xs[min(int(np.searchsorted(cum, stream.random(), side="right")), len(xs) - 1)]
            for _ in range(n)]


def surviving_tree(model, atoms, n_init: int, t: float, rng, caps=None, max_attempts: int = 1000):
    """Population from ``n_init`` i.i.d. founders, resimulated until alive at ``t``."""
    stream = as_stream(rng)
    for attempt in range(max_attempts):
        st = stream.spawn(attempt)
        init = draw_initial(atoms, n_init, st.spawn(0))
        tree = simulate_population(model, init, t, caps, st.spawn(1))
        if tree.count_alive(t) > 0:
            return tree
    raise ExtinctionError(f"no surviving population in {max_attempts} attempts")


def _sampled_count(model, atoms, n_init, t, caps, stream, i):
    st = stream.spawn(i)
    tree = surviving_tree(model, atoms, n_init, t, st.spawn(0), caps)
    return _uniform_alive(tree, t, st.spawn(1)).generation


def _spine_count(model, atoms, t, stream, i):
    st = stream.spawn(i)
    x = sample_pi_t(model, atoms, t, st.spawn(0))
    return simulate_auxiliary(model, x, t, st.spawn(1)).division_count


def sampled_division_counts(model, atoms, n_init: int, t: float, replicates: int, rng,
                            caps=None, threads: int = 1) -> np.ndarray:
    """Division counts of uniformly sampled lineages, one surviving tree each."""
    task = partial(_sampled_count, model, list(atoms), n_init, t, caps or Caps(), as_stream(rng))
    return np.array(map_replicates(task, replicates, threads), dtype=int)


def spine_division_counts(model, atoms, t: float, replicates: int, rng,
                          threads: int = 1) -> np.ndarray:
    """Division counts of spine paths started from the reweighted initial law."""
    task = partial(_spine_count, model, list(atoms), t, as_stream(rng))
    return np.array(map_replicates(task, replicates, threads), dtype=int)


def check_sampling_convergence(model, atoms, n_grid, t: float, rng, replicates: int = 5000,
                               caps=None, threads: int = 1, n_boot: int = 200):
    """KS distance between sampled-lineage and spine division counts over ``n_grid``.

    One spine sample serves as the common reference for every ``n``.
    Returns ``[(n, D, p_value, (boot_lo, boot_hi)), ...]``.
    """
    n_grid = [int(n) for n in n_grid]
    if any(b <= a for a, b in zip(n_grid, n_grid[1:])) or n_grid[0] < 1:
        raise ValueError("n grid must be positive and increasing")
    root = as_stream(rng)
    spine = spine_division_counts(model, atoms, t, replicates, root.spawn(0), threads)
    out = []
    for n in n_grid:
        sampled = sampled_division_counts(model, atoms, n, t, replicates, root.spawn(1).spawn(n),
                                          caps, threads)
        d, p = ks_two_sample(sampled, spine)
        ci = bootstrap_ks(sampled, spine, root.spawn(2).spawn(n), n_boot=n_boot)
        out.append((n, d, p, ci))
    return out
