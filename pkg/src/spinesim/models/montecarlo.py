"""Monte Carlo estimate of the mean population size."""
from __future__ import annotations

import numpy as np

from ..streams import as_stream


def mean_population_mc(model, x, s, t, n, rng, caps=None):
    """Sample mean of N_t over ``n`` populations started from one individual (x, s)."""
    from ..analysis.stats import MCEstimate
    from ..population import Caps, CapExceededError, simulate_population

    if n < 2:
        raise ValueError("mean_population_mc needs n >= 2")
    if t == s:
        return MCEstimate.exact(1.0, n)
    stream = as_stream(rng)
    caps = caps or Caps()
    counts = np.empty(n)
    for i in range(n):
        try:
            tree = simulate_population(model, [x], t, caps, stream.spawn(i), start=s)
        except CapExceededError as exc:
            exc.partial_report = MCEstimate.from_samples(counts[:i]) if i >= 2 else None
            exc.replicate = i
            raise
        counts[i] = tree.count_alive(t)
    return MCEstimate.from_samples(counts)
