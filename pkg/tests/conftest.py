import warnings

import numpy as np
import pytest

from delaywave.discretize import build_mesh
from delaywave.generator import assemble_generator
from delaywave.model import HypothesisWarning, ModelParams


@pytest.fixture
def params():
    return ModelParams()


@pytest.fixture
def small_system(params):
    mesh = build_mesh(params, 20)
    return assemble_generator(params, mesh, 4)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def undamped(**kw):
    """Validation-mode parameters (damping and coupling off)."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", HypothesisWarning)
        return ModelParams(kappa1=0.0, kappa2=0.0, c0=0.0, enforce_H=False, **kw)
