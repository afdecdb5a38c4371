import numpy as np
import pytest

from ppblowup.constants import estimate_embeddings
from ppblowup.fem import assemble_operators, build_mesh
from ppblowup.model import ModelParams


def setup(n=3, s=1.0, p=4.0, R=1.0, M=60, grading=2.0, quad_order=6):
    params = ModelParams(n, s, p, R)
    mesh = build_mesh(params, M, grading, quad_order)
    return mesh, assemble_operators(mesh)


@pytest.fixture(scope="session")
def small():
    """n=3, s=1, p=4 on a 60-element graded mesh, with embedding estimates."""
    mesh, ops = setup()
    return mesh, ops, estimate_embeddings(mesh, ops, 4.0)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
