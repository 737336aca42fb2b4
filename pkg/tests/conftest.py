import pytest

from pathbench.scene import cornell_box, furnace_sphere


@pytest.fixture(scope="session")
def cornell():
    return cornell_box()


@pytest.fixture(scope="session")
def furnace():
    return furnace_sphere()
