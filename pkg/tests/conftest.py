import numpy as np
import pytest

from fracembed.fracops import FracParams, Grid, GridFn


@pytest.fixture
def unit_grid():
    return Grid(0.0, 1.0, 64)


@pytest.fixture
def bump():
    """Sample ``t^2 (1-t)^2`` factory vanishing at both ends."""

    def make(g: Grid) -> GridFn:
        t = g.nodes
        return GridFn(g, t**2 * (1 - t) ** 2)

    return make


def sup(v, mask=None):
    v = np.abs(np.asarray(v))
    return float(np.max(v[..., mask] if mask is not None else v))


REVERSIBLE = FracParams(0.7, 0.7, 0.0)
CLASSICAL = FracParams(1.0, 1.0, 0.0)
