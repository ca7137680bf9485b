"""Shared solved instances, cached per session (several modules reuse them)."""

import numpy as np
import pytest

from expdist.grid import MapField, TriGrid, weight_eval
from expdist.params import DistortionParams
from expdist.solver import BoundarySpec, SolveConfig, solve

AFFINE_A, AFFINE_B = 1.5, 0.5  # f0 = 1.5 z + 0.5 conj(z) = 2x + iy
QUARTIC_EPS = 0.2


def affine_map(n=33):
    grid = TriGrid.unit_square(n)
    return MapField.from_function(grid, lambda z: AFFINE_A * z + AFFINE_B * np.conj(z))


def solve_quartic(n, p=1.0, **kw):
    cfg = SolveConfig(
        p=p, grid_n=n, boundary=BoundarySpec("quartic", eps=QUARTIC_EPS),
        max_iters=kw.pop("max_iters", 60000), **kw,
    )
    return solve(cfg)


@pytest.fixture(scope="session")
def affine33():
    return affine_map(33)


@pytest.fixture(scope="session")
def quartic17():
    return solve_quartic(17)


@pytest.fixture(scope="session")
def quartic33():
    return solve_quartic(33)


@pytest.fixture(scope="session")
def quartic65():
    return solve_quartic(65)


@pytest.fixture
def p1():
    return DistortionParams(1.0)


@pytest.fixture
def euclid33(affine33):
    return weight_eval("euclidean", affine33.grid)
