import os

# Keep BLAS single-threaded before numpy loads anywhere: the matrices here
# are small enough that thread fan-out costs more than it saves, and it keeps
# timings stable across machines.
os.environ.setdefault("OPENBLAS_NUM_THREADS", "1")
os.environ.setdefault("OMP_NUM_THREADS", "1")

import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)
