import numpy as np
import pytest

from fplab import DensityState, Grid, GridFunction


def random_density(grid: Grid, rng: np.random.Generator, mass: float = 1.0,
                   modes: int = 4) -> DensityState:
    """Smooth random nonnegative density with exactly the requested mass."""
    amps = rng.uniform(-0.7, 0.7, modes)
    base = 1.0 + sum(
        a * np.cos((k + 1) * np.pi * grid.centers) for k, a in enumerate(amps)
    )
    vals = base * base
    vals *= mass / (np.sum(vals) * grid.h)
    return DensityState(GridFunction(grid, vals))


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240811)
