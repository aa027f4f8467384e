import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from rabisim import DeviceParams, HilbertLayout


@pytest.fixture
def params() -> DeviceParams:
    return DeviceParams()


@pytest.fixture
def layout_2x25() -> HilbertLayout:
    return HilbertLayout.of(("qubit", 2), ("mode", 25))


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20170613)


def random_hermitian(rng: np.random.Generator, dim: int) -> np.ndarray:
    m = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    return (m + m.conj().T) / 2
