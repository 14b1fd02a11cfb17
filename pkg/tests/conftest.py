import numpy as np
import pytest

from fockprobe import build_setup


@pytest.fixture(scope="session")
def natural_setup():
    """Desk-scale case: unit cavity, c = 1, slow atom, second harmonic resonant."""
    return build_setup(
        1.0, 1e-3, light_speed=1.0, resonant_with_mode=2,
        coupling_ratio=1e-4, unit_mode="natural",
    )


def random_setup(rng):
    """Off-resonant-ish random desk-scale setup for property grids."""
    length = rng.uniform(0.5, 2.0)
    speed = 10.0 ** rng.uniform(-4.0, -1.0)
    alpha = int(rng.integers(1, 5))
    gap = alpha * np.pi / length * (1.0 + rng.uniform(-0.3, 0.3))
    return build_setup(
        length, speed, light_speed=1.0, atom_gap=gap,
        coupling_ratio=1e-4, unit_mode="natural",
    )


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)
