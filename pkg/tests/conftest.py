import time

import pytest
from hypothesis import settings

from poisson_capacity.solver import SolverConfig, sweep

settings.register_profile("default", deadline=None, print_blob=True)
settings.load_profile("default")

SWEEP_AMPLITUDES = [round(0.1 * k, 12) for k in range(1, 151)]


@pytest.fixture(scope="session")
def solved_sweep():
    """Continuation sweep over A = 0.1, 0.2, ..., 15 with default settings.

    Returns (results, elapsed seconds). Shared by every test that needs solved
    distributions so the sweep runs once per session.
    """
    t0 = time.perf_counter()
    results = sweep(SWEEP_AMPLITUDES, SolverConfig())
    return results, time.perf_counter() - t0


@pytest.fixture(scope="session")
def solved_by_amplitude(solved_sweep):
    return {r.amplitude: r for r in solved_sweep[0]}
