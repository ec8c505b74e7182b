import pytest

from cascadelab.spectral import SpectralModel


@pytest.fixture(scope="session")
def gaussian():
    return SpectralModel.gaussian_critical()


@pytest.fixture(scope="session")
def seed():
    return 20260810
