"""Inertial particles in Stokes flow and their monokinetic mean-field limit."""
import os

import numba

if "NUMBA_THREADING_LAYER" not in os.environ:
    # omp keeps the prange loops quiet on hosts with an old TBB
    numba.config.THREADING_LAYER = "omp"

__version__ = "0.1.0"


def set_threads(k):
    """Use ``k`` numba worker threads (capped by ``NUMBA_NUM_THREADS``).

    Pair sums are accumulated in a fixed order per target, so results do
    not depend on ``k``.
    """
    k = max(1, min(int(k), numba.config.NUMBA_NUM_THREADS))
    numba.set_num_threads(k)
    return k
