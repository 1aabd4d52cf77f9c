import numpy as np
import pytest

from blowlab.model import ModelKind, ModelParams


@pytest.fixture
def d05():
    """Reference parameter set: R=K=1, M=1.2, p=2, D=0.5, E=0.2, A=0.2, C=0.3."""
    return ModelParams()


@pytest.fixture
def d04():
    return ModelParams(D=0.4)


@pytest.fixture
def d4676():
    return ModelParams(D=0.4676)


@pytest.fixture
def delayed_prey():
    return ModelParams(kind=ModelKind.DELAYED_PREY, tau=1.0)


@pytest.fixture
def delayed_predator():
    return ModelParams(kind=ModelKind.DELAYED_PREDATOR, tau=1.0)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def random_params_with_interior(rng, n):
    """Random parameter sets that admit an interior equilibrium."""
    out = []
    while len(out) < n:
        p = ModelParams(
            R=float(rng.uniform(0.5, 2.0)),
            K=float(rng.uniform(0.5, 2.0)),
            M=float(rng.uniform(0.5, 2.0)),
            p=float(rng.uniform(1.0, 2.5)),
            C=float(rng.uniform(0.05, 1.0)),
            D=float(rng.uniform(0.2, 0.8)),
            E=float(rng.uniform(0.05, 0.5)),
            A=float(rng.uniform(0.05, 0.5)),
        )
        num = p.E - p.A * p.D
        if num <= 1e-3:
            continue
        xs = num / p.D
        if xs >= 0.9 * p.K:
            continue
        out.append(p)
    return out
