import math
import warnings

import pytest

from kerrchaos.floquet import floquet_solve
from kerrchaos.model import derived_scales, params_from_targets

# the six benchmark operating points: (K/omega0, Gamma, reference n_min)
BENCHMARK_POINTS = {
    "A": (0.53e-4, 8.5, 8.079),
    "B": (5.02e-4, 8.5, 7.249),
    "C": (0.53e-4, 80.0, 77.007),
    "D": (2.91e-4, 80.0, 66.134),
    "E": (8.33e-4, 80.0, 197.924),
    "F": (25e-4, 80.0, 336.598),
}

DRIVE_RATIO = 1.999866


@pytest.fixture(scope="session")
def point_a_params():
    return params_from_targets(*BENCHMARK_POINTS["A"][:2])


@pytest.fixture(scope="session")
def point_a_scales(point_a_params):
    return derived_scales(point_a_params)


@pytest.fixture(scope="session")
def point_a_solution(point_a_params, point_a_scales):
    """Shared Floquet solution at the weakly nonlinear benchmark point."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return floquet_solve(
            point_a_params, n=136, steps=1024, t0=point_a_scales.T_d / 4.0
        )


@pytest.fixture(scope="session")
def fast_params():
    """Strongly nonlinear but cheap parameter set for wiring-level tests."""
    return params_from_targets(3e-3, 5.0)


@pytest.fixture(scope="session")
def fast_scales(fast_params):
    return derived_scales(fast_params)
