import numpy as np
import pytest

from aggdiff.grids import RadialGrid, random_bump_profile

random_profile = random_bump_profile


@pytest.fixture(scope="session")
def grid_d2() -> RadialGrid:
    return RadialGrid(2, 20.0, 512)


@pytest.fixture(scope="session")
def grid_d3() -> RadialGrid:
    return RadialGrid(3, 20.0, 512)
