import numpy as np
import pytest

from pdediscover.simulate import generate_benchmark, preset


@pytest.fixture(scope="session")
def burgers_field():
    return generate_benchmark(preset("burgers"))


@pytest.fixture(scope="session")
def kdv_field():
    return generate_benchmark(preset("kdv"))


@pytest.fixture(scope="session")
def klein_gordon_field():
    return generate_benchmark(preset("klein_gordon"))


@pytest.fixture(scope="session")
def convection_diffusion_field():
    return generate_benchmark(preset("convection_diffusion"))


def rel_l2(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.linalg.norm(a - b) / np.linalg.norm(b))
