"""
Shared fixtures for the PCOPO workbench tests
"""

import pytest
from hypothesis import strategies as st

from pcopo.models.params import ModelParams, SimConfig
from pcopo.physics import correlations

# (M0, M1) pairs of the four reference configurations
REFERENCE_CONFIGS = [(0.0, 0.0), (0.5, 0.0), (0.0, 0.5), (0.5, 0.5)]


def at_relative_pump(M0: float, M1: float, fraction: float) -> ModelParams:
    """Parameters pumped at a fraction of their own threshold"""
    base = ModelParams(M0=M0, M1=M1)
    return base.with_E(fraction * correlations.analytic_threshold(base))


@st.composite
def below_threshold_params(draw, max_fraction: float = 0.98):
    """Resonant parameters strictly below threshold; M0 = 0 is drawn explicitly"""
    M0 = draw(st.one_of(st.just(0.0), st.floats(0.0, 1.0)))
    M1 = draw(st.floats(0.0, 1.0))
    delta0 = draw(st.floats(-0.5, 0.5))
    fraction = draw(st.floats(0.0, max_fraction))
    base = ModelParams(M0=M0, M1=M1, delta0=delta0)
    return base.with_E(fraction * correlations.analytic_threshold(base))


@pytest.fixture
def opo_params():
    """Homogeneous OPO at E = 0.92"""
    return ModelParams(E=0.92)


@pytest.fixture
def crystal_params():
    """Both modulations on, 5% below threshold"""
    return at_relative_pump(0.5, 0.5, 0.95)


@pytest.fixture
def small_grid():
    """64-point grid two critical wavelengths wide, short runs"""
    return SimConfig(
        grid_points=64,
        box_wavelengths=2,
        dt=1e-3,
        t_transient=1.0,
        t_measure=2.0,
        sample_interval=0.5,
        n_trajectories=2,
        seed=3,
    )


@pytest.fixture
def isolated(tmp_path, monkeypatch):
    """Run from an empty directory so no config/config.yaml is picked up"""
    monkeypatch.chdir(tmp_path)
    monkeypatch.delenv("PCOPO_WORKERS", raising=False)
    return tmp_path
