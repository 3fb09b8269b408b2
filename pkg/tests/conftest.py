import numpy as np
import pytest

from fppforge.render import make_scene, render_depth
from fppforge.shapes import make_plane_facing


@pytest.fixture(scope="session")
def warm_kernels():
    """Trigger JIT compilation once so timed tests measure the algorithm."""
    params = make_scene(resolution=(8, 8), pattern_resolution=(16, 16), noise_sigma=0.0)
    plane = make_plane_facing(params.camera, 1.5, 0.2)
    render_depth(plane, params)
    from fppforge.render import render_fringe

    render_fringe(plane, params)
    return True


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
