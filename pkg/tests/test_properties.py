import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from radmhd.bound import ALPHA_HI, ALPHA_LO, bound_shape, k_alpha, optimal_alpha
from radmhd.core import RadialGrid, build_compatible_u0, FluidParams, weighted_l2
from radmhd.diagnostics import inequality_chain
from radmhd.core import VacuumTracker
from radmhd.solver import stable_dt, transport_density
from radmhd.core import RadialState

GRID = RadialGrid(32, 1.0)
profiles = arrays(np.float64, GRID.n + 1, elements=st.floats(-1e3, 1e3))
scalars = st.floats(-1e3, 1e3)


@given(profiles, scalars)
def test_norm_homogeneous(g, c):
    assert np.isclose(weighted_l2(c * g, GRID), abs(c) * weighted_l2(g, GRID), rtol=1e-12, atol=1e-9)


@given(profiles, profiles)
def test_norm_triangle(f, g):
    assert weighted_l2(f + g, GRID) <= weighted_l2(f, GRID) + weighted_l2(g, GRID) + 1e-9


@given(st.floats(ALPHA_LO, ALPHA_HI))
def test_k_at_least_two(alpha):
    assert k_alpha(alpha) >= 2.0


@given(st.floats(ALPHA_LO, ALPHA_HI))
def test_optimum_dominates(alpha):
    assert bound_shape(alpha) <= bound_shape(optimal_alpha()) * (1 + 1e-12)


@settings(max_examples=50)
@given(arrays(np.float64, GRID.n + 1, elements=st.floats(-5, 5)), st.floats(0.05, 1.0),
       st.floats(1.01, 1.99))
def test_cauchy_schwarz_step(B, R, alpha):
    B = B.copy()
    B[0] = 0.0
    c = inequality_chain(B, VacuumTracker(R), FluidParams(), alpha, GRID, divu_norm=1.0)
    assert c.keyc1_holds


@settings(max_examples=50)
@given(arrays(np.float64, GRID.n + 1, elements=st.floats(0, 10)),
       arrays(np.float64, GRID.n + 1, elements=st.floats(-5, 5)))
def test_upwind_positivity(rho, u):
    u = u.copy()
    u[0] = u[-1] = 0.0
    state = RadialState(0.0, rho, u, np.zeros_like(u))
    dt = stable_dt(state, FluidParams(), GRID, 0.4, dt_max=1.0)
    assert np.all(transport_density(rho, u, dt, GRID) >= -1e-12 * max(1.0, rho.max()))


@settings(max_examples=30)
@given(arrays(np.float64, GRID.n + 1, elements=st.floats(-2, 2)),
       arrays(np.float64, GRID.n + 1, elements=st.floats(0, 2)))
def test_compatible_u0_endpoints(B, rho):
    B = B.copy()
    B[0] = 0.0
    u = build_compatible_u0(FluidParams(), rho, B, GRID)
    assert u[0] == 0.0 and u[-1] == 0.0
