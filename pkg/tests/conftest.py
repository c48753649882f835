"""Shared fixtures: small grids, the reference kernel, canned scenario runs.

Session-scoped run fixtures keep the suite fast; every consumer treats the
results as read-only.
"""
import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from efviz.discretization import Grid1D
from efviz.kernel import RelaxationKernel
from efviz.solver import ScenarioConfig, initial_profile, run

settings.register_profile(
    "suite",
    derandomize=True,
    max_examples=50,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("suite")


@pytest.fixture(scope="session")
def grid50():
    return Grid1D(0.0, 1.0, 50)


@pytest.fixture(scope="session")
def grid200():
    return Grid1D(0.0, 1.0, 200)


@pytest.fixture(scope="session")
def ref_kernel():
    return RelaxationKernel.exponential_sum([(0.25, 1.0)])


@pytest.fixture(scope="session")
def small_run(grid200, ref_kernel):
    """Smooth sub-blow-up scenario with memory; the generic regular run."""
    u0 = 0.05 * initial_profile("sine", grid200)
    u1 = np.zeros(grid200.n)
    cfg = ScenarioConfig(p=3, grid=grid200, kernel=ref_kernel, u0=u0, u1=u1,
                         dtau=grid200.dx / 2, tau_max=1.0)
    return run(cfg)


@pytest.fixture(scope="session")
def blowup_run(ref_kernel):
    """Negative-energy scenario that crosses the sup-norm threshold."""
    g = Grid1D(0.0, 1.0, 50)
    prof = initial_profile("sine", g)
    cfg = ScenarioConfig(p=3, grid=g, kernel=ref_kernel, u0=5.1 * prof,
                         u1=2.55 * prof, dtau=g.dx / 2, tau_max=2.0)
    return run(cfg)
