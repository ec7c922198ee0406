import math
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]
SRC = ROOT / "src"
for entry in (ROOT, SRC):
    if str(entry) not in sys.path:
        sys.path.insert(0, str(entry))

import pytest

from src.models import Mode, ModeLattice, ParticleParams, UnitsConfig, build_lattice


@pytest.fixture
def units():
    return UnitsConfig()


@pytest.fixture
def params():
    return ParticleParams(mass=1.0, charge=1.0, coupling_scale=1.0)


@pytest.fixture
def lattice(units, params):
    """L = 2π, n_max = 1: six wave vectors of unit length, twelve modes at ω = 1."""

    return build_lattice(2.0 * math.pi, 1, units, params)


def make_single_mode(
    *,
    n=(0, 0, 1),
    k=(0.0, 0.0, 1.0),
    omega=1.0,
    v0=-0.5,
    polarization=1,
    box_length=2.0 * math.pi,
    units=None,
):
    mode = Mode(
        n=n,
        polarization=polarization,
        k=k,
        omega=omega,
        eps1=(1.0, 0.0, 0.0),
        eps2=(0.0, 1.0, 0.0),
        v0=v0,
    )
    return ModeLattice(box_length, 1, (mode,), units or UnitsConfig())


@pytest.fixture
def single_mode():
    return make_single_mode
