"""Quenched random walks in random environment at the moderate-deviation scale."""

import os

# prefer OpenMP; the system TBB is too old for numba and only produces a warning
os.environ.setdefault("NUMBA_THREADING_LAYER_PRIORITY", "omp tbb workqueue")

__version__ = "0.1.0"
