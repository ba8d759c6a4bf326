import numpy as np
import pytest

from api.schemas import ObjectiveSpec, RunConfig, SketchKind, SketchSpec
from base.utils.logging import setup_logging
from federated.objectives import from_spec


@pytest.fixture(autouse=True, scope="session")
def _quiet_logs():
    setup_logging("WARNING")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def quadratic():
    """4 homogeneous clients in d = 8 with the Hessian spectrum pinned to [0.5, 2]."""
    return from_spec(ObjectiveSpec(kind="quadratic", N=4, d=8, n_per_client=16,
                                   spectrum=(0.5, 2.0), seed=7))


@pytest.fixture
def heterogeneous():
    return from_spec(ObjectiveSpec(kind="quadratic", N=4, d=8, n_per_client=16,
                                   heterogeneity=0.5, spectrum=(0.5, 2.0), seed=11,
                                   ball_radius=10.0))


def make_run(d: int, *, kind=SketchKind.IDENTITY, b=None, **overrides) -> RunConfig:
    b = d if b is None else b
    fields = dict(T=20, K=1, eta_local=0.1, sketch=SketchSpec(kind=kind, d=d, b_sketch=b))
    fields.update(overrides)
    return RunConfig(**fields)
