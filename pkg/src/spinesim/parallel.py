"""Fan replicate work out to worker processes, merging in replicate order.

Every replicate draws from a stream derived from its own index, so results
do not depend on how replicates are split across workers.
"""
from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor


def default_threads() -> int:
    return os.cpu_count() or 1


def _run_block(task, lo, hi):
    return [task(i) for i in range(lo, hi)]


def map_replicates(task, n: int, threads: int = 1, block: int | None = None) -> list:
    """``[task(0), ..., task(n - 1)]``, computed on ``threads`` processes.

    ``task`` must be picklable when ``threads > 1`` (a module-level function
    or a :func:`functools.partial` of one).
    """
    if n <= 0:
        return []
    threads = max(1, min(int(threads), n))
    if threads == 1:
        return _run_block(task, 0, n)
    block = block or max(1, -(-n // (4 * threads)))
    starts = list(range(0, n, block))
    out = []
    with ProcessPoolExecutor(max_workers=threads) as pool:
        futures = [pool.submit(_run_block, task, lo, min(lo + block, n)) for lo in starts]
        for fut in futures:
            out.extend(fut.result())
    return out
