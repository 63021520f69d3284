"""Pytest fixtures for the actionlift test suite.

Provides the reference vehicle configurations, seeded random generators,
hypothesis profiles and config-singleton isolation.
"""

from __future__ import annotations

import os
from collections.abc import Iterator

import hypothesis
import numpy as np
import pytest

from actionlift.config import LiftConfig, reset_config
from actionlift.core.types import ModelKind, RawActionSequence, Scheme

hypothesis.settings.register_profile("default", max_examples=50, deadline=None)
hypothesis.settings.register_profile("fast", max_examples=10, deadline=None)
hypothesis.settings.register_profile("thorough", max_examples=1000, deadline=None)
hypothesis.settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


def make_config(
    model: ModelKind = ModelKind.KBM,
    scheme: Scheme = Scheme.EULER,
    dt: float = 0.5,
    n_int: int = 5,
    **overrides: float,
) -> LiftConfig:
    """LiftConfig with the reference vehicle parameters."""
    params: dict[str, float] = {
        "wheelbase": 2.9,
        "delta_max": 0.6,
        "a_max": 1.0,
        "kappa_max": 0.4,
        "sharpness_max": 0.1,
    }
    params.update(overrides)
    return LiftConfig(dt=dt, n_int=n_int, scheme=scheme, model=model, **params)


def random_actions(rng: np.random.Generator, horizon: int = 8) -> RawActionSequence:
    return RawActionSequence(rng.standard_normal((horizon, 3)))


@pytest.fixture(autouse=True)
def _isolated_config(monkeypatch: pytest.MonkeyPatch) -> Iterator[None]:
    """Reset cached settings around every test and ignore a developer .env."""
    for key in list(os.environ):
        if key.startswith("ACTIONLIFT_"):
            monkeypatch.delenv(key)
    reset_config()
    yield
    reset_config()


@pytest.fixture
def kbm_cfg() -> LiftConfig:
    """Reference KBM configuration (semi-implicit Euler, dt = 0.5 s)."""
    return make_config(ModelKind.KBM)


@pytest.fixture
def ccpp_cfg() -> LiftConfig:
    """Reference CCPP configuration (Euler substeps, n_int = 5)."""
    return make_config(ModelKind.CCPP)


@pytest.fixture(
    params=[
        (ModelKind.KBM, Scheme.EULER),
        (ModelKind.KBM, Scheme.RK4),
        (ModelKind.CCPP, Scheme.EULER),
        (ModelKind.CCPP, Scheme.RK4),
    ],
    ids=["kbm-euler", "kbm-rk4", "ccpp-euler", "ccpp-rk4"],
)
def analytic_cfg(request: pytest.FixtureRequest) -> LiftConfig:
    """Every analytic (model, scheme) pair with reference parameters."""
    model, scheme = request.param
    return make_config(model, scheme)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240501)
