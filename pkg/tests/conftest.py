import math
from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from cnsflow.condition_a import REMARK_SET
from cnsflow.config import gaussian_mixture, load_config
from cnsflow.field import GridSpec, gradient
from cnsflow.measures import Atom, Filament, RadonMeasureSpec
from cnsflow.picard import solve_picard

settings.register_profile("default", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

ROOT = Path(__file__).resolve().parents[1]
CONFIGS = ROOT / "configs"


def emit(line: str, capsys=None):
    """Print a line past pytest's capture."""
    if capsys is None:
        print(line)
        return
    with capsys.disabled():
        print("\n" + line)


@pytest.fixture(scope="session")
def grid128():
    return GridSpec(8.0, 128)


@pytest.fixture(scope="session")
def smooth_cfg():
    return load_config(CONFIGS / "smooth_small.json")


def square_ring(r: float, density: float) -> Filament:
    return Filament(((r, 0.0), (0.0, r), (-r, 0.0), (0.0, -r), (r, 0.0)), density)


def dirac_filament_data(grid, c_amp=0.01):
    mu_n = RadonMeasureSpec((Atom((0.2, 0.1), 1.0),))
    mu_z = RadonMeasureSpec(filaments=(square_ring(0.6, 0.05),))
    c0 = gaussian_mixture(grid, [{"center": (0.0, 0.0), "variance": 1.0, "amplitude": c_amp}])
    return mu_n, c0, mu_z


def potential_gradient(grid):
    return gradient(gaussian_mixture(grid, [{"center": (0.3, 0.0), "variance": 2.0, "amplitude": 0.5}]))


@pytest.fixture(scope="session")
def dirac_runs(grid128):
    """Converged Picard runs on Dirac ``n0`` and filament ``zeta0``, with and without a potential."""
    data = dirac_filament_data(grid128)
    gp = potential_gradient(grid128)
    return {
        "no-potential": (solve_picard(data, REMARK_SET, None, T=0.1, M=16), data, None),
        "potential": (solve_picard(data, REMARK_SET, gp, T=0.1, M=16), data, gp),
    }


def rel_l2(a, b) -> float:
    den = math.sqrt(float(np.sum(a.values**2)))
    return math.sqrt(float(np.sum((a.values - b.values) ** 2))) / den if den else 0.0
