import numpy as np
import pytest

from fplab import (
    DensityState,
    GridFunction,
    WeightSpec,
    make_grid,
    project_density,
    quadrature,
    sample,
)
from fplab.errors import InvalidInitialDataError, NumericalInputError


def test_make_grid_basic():
    g = make_grid(4)
    assert g.h == 0.5
    np.testing.assert_allclose(g.centers, [-0.75, -0.25, 0.25, 0.75], atol=1e-15)


def test_make_grid_single_cell():
    g = make_grid(1)
    assert g.h == 2.0
    np.testing.assert_allclose(g.centers, [0.0])


def test_make_grid_fine():
    g = make_grid(1000)
    assert g.h == 0.002
    assert abs(g.centers[0] + 0.999) < 1e-15


def test_make_grid_rejects_zero():
    with pytest.raises(ValueError):
        make_grid(0)
    with pytest.raises(ValueError):
        make_grid(-3)


@pytest.mark.parametrize("n", [4, 7, 100, 401])
def test_grid_invariants(n):
    g = make_grid(n)
    assert np.all(np.diff(g.centers) > 0)
    assert np.all(np.abs(g.centers) < 1.0)
    # exact mirror symmetry, needed for parity preservation in the solver
    assert np.all(g.centers == -g.centers[::-1])
    assert abs(g.h * n - 2.0) <= 2.0 * np.finfo(float).eps


def test_quadrature_examples():
    g = make_grid(800)
    ones = sample(lambda w: np.ones_like(w), g)
    assert abs(quadrature(ones, WeightSpec(p=2)) - 2.0 / 3.0) <= 2 * g.h ** 2
    assert abs(quadrature(ones, WeightSpec(r=1)) - 4.0 / 3.0) <= 2 * g.h ** 2
    lin = sample(lambda w: w, g)
    assert abs(quadrature(lin, WeightSpec(q=2.0)) - 2.0 / 3.0) <= 2 * g.h ** 2


def test_quadrature_odd_weight_vanishes_on_symmetric_function():
    g = make_grid(256)
    even = sample(lambda w: np.exp(-w * w), g)
    assert abs(quadrature(even, WeightSpec(s=1))) <= 1e-14


def test_quadrature_second_order_convergence():
    def err(n, fn, exact):
        g = make_grid(n)
        return abs(quadrature(sample(fn, g)) - exact)

    # generic smooth integrand: clean O(h^2)
    ratio = err(100, np.exp, np.e - 1.0 / np.e) / err(200, np.exp, np.e - 1.0 / np.e)
    assert 3.5 <= ratio <= 4.5
    # (1-w^2)^2 has vanishing boundary derivative, so the h^2 Euler-Maclaurin
    # term cancels and the midpoint rule superconverges at O(h^4)
    poly = lambda w: (1.0 - w * w) ** 2
    ratio = err(100, poly, 16.0 / 15.0) / err(200, poly, 16.0 / 15.0)
    assert 14.0 <= ratio <= 18.0


def test_quadrature_rejects_nonfinite():
    g = make_grid(8)
    with pytest.raises(NumericalInputError):
        GridFunction(g, np.array([1.0] * 7 + [np.nan]))


def test_quadrature_fractional_power_needs_nonnegative():
    g = make_grid(8)
    f = sample(lambda w: w, g)
    with pytest.raises(NumericalInputError):
        quadrature(f, WeightSpec(q=1.5))


def test_weight_spec_validation():
    with pytest.raises(ValueError):
        WeightSpec(p=-1)
    with pytest.raises(ValueError):
        WeightSpec(s=3)
    with pytest.raises(ValueError):
        WeightSpec(q=0.5)


def test_project_uniform_mass_exact():
    g = make_grid(100)
    st = project_density(lambda w: 0.5 * np.ones_like(w), g)
    assert abs(quadrature(st.function) - 1.0) <= 1e-12


def test_project_parabola_mass():
    g = make_grid(400)
    st = project_density(lambda w: 0.75 * (1.0 - w * w), g)
    # raw midpoint sampling carries the h^2/8 quadrature excess
    assert abs(quadrature(st.function) - 1.0) <= 4e-6
    st = project_density(lambda w: 0.75 * (1.0 - w * w), g, target_mass=1.0)
    assert abs(quadrature(st.function) - 1.0) <= 1e-12


def test_project_rejects_negative_datum():
    g = make_grid(16)
    with pytest.raises(InvalidInitialDataError):
        project_density(lambda w: -w, g)


def test_grid_function_shape_mismatch():
    g = make_grid(8)
    with pytest.raises(ValueError):
        GridFunction(g, np.zeros(9))


def test_density_state_negativity_guard():
    g = make_grid(8)
    vals = np.full(8, 0.1)
    vals[3] = -1e-6
    with pytest.raises(InvalidInitialDataError):
        DensityState(GridFunction(g, vals))
    # a dip within tolerance is accepted
    ok = np.full(8, 0.1)
    ok[3] = -1e-13
    DensityState(GridFunction(g, ok))
