import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from quatgeo.domain import (DegreeError, DiscreteForm, IcosphereDomain, LonLatDomain, TorusDomain,
                            domain_from_config, exterior_derivative, hodge_star, integrate_2form,
                            wedge_as_quadratic)

SQUARE = TorusDomain(1j, 16, 16, 2 * np.pi)


def _one_form(domain, a, b):
    return DiscreteForm(1, np.stack([np.broadcast_to(a, domain.grid_shape), np.broadcast_to(b, domain.grid_shape)]),
                        domain)


def test_torus_validation():
    with pytest.raises(ValueError):
        TorusDomain(-1j, 8, 8)
    with pytest.raises(ValueError):
        TorusDomain(1j, 1, 8)


def test_torus_cell_areas_sum_to_fundamental_domain():
    d = TorusDomain(0.3 + 1.7j, 12, 10)
    assert np.isclose(d.weights.sum(), 1.7)
    assert d.wrap(-1, 10) == (11, 0)


def test_config_roundtrip():
    for d in (TorusDomain(0.5 + 2j, 8, 6, 3.0), IcosphereDomain(2), LonLatDomain(16, 12, 5.0)):
        assert domain_from_config(d.config()) == d
    with pytest.raises(ValueError):
        domain_from_config({"type": "klein"})
    with pytest.raises(ValueError, match="tau_im"):
        domain_from_config({"type": "torus", "nx": 4, "ny": 4})


def test_icosphere_vertices_are_unit():
    d = IcosphereDomain(4)
    assert np.max(np.abs(np.linalg.norm(d.vertices, axis=1) - 1)) < 1e-12


def test_icosphere_area_converges():
    areas = [IcosphereDomain(k).area for k in (3, 4, 5)]
    errs = [abs(a - 4 * np.pi) for a in areas]
    assert errs[0] > errs[1] > errs[2]
    assert errs[2] < 1e-3 * 4 * np.pi


def test_hodge_star_dx_is_minus_dy():
    # (*w)(X) = w(J X) with J d/dx = d/dy: *dx = -dy, *dy = dx
    dx = _one_form(SQUARE, 1.0, 0.0)
    np.testing.assert_array_equal(hodge_star(dx).values, _one_form(SQUARE, 0.0, -1.0).values)


def test_hodge_star_of_dz():
    dz = _one_form(SQUARE, 1.0 + 0j, 1j)
    np.testing.assert_allclose(hodge_star(dz).values, 1j * dz.values)


def test_hodge_star_rejects_other_degrees():
    with pytest.raises(DegreeError):
        hodge_star(DiscreteForm(0, np.zeros(SQUARE.grid_shape), SQUARE))


def test_wedge_examples():
    dx, dy = _one_form(SQUARE, 1.0, 0.0), _one_form(SQUARE, 0.0, 1.0)
    assert np.all(wedge_as_quadratic(dx, dy).values == 1.0)
    rng = np.random.default_rng(0)
    w = DiscreteForm(1, rng.normal(size=(2,) + SQUARE.grid_shape), SQUARE)
    assert np.max(np.abs(wedge_as_quadratic(w, w).values)) == 0.0
    dz, dzbar = _one_form(SQUARE, 1.0 + 0j, 1j), _one_form(SQUARE, 1.0 + 0j, -1j)
    np.testing.assert_allclose(wedge_as_quadratic(dz, dzbar).values, -2j)


def test_wedge_rejects_mismatched_values():
    real = _one_form(SQUARE, 1.0, 0.0)
    quat = DiscreteForm(1, np.zeros((2,) + SQUARE.grid_shape + (4,)), SQUARE, quaternionic=True)
    with pytest.raises(ValueError):
        wedge_as_quadratic(real, quat)


def test_integration_examples():
    area = DiscreteForm(2, np.ones(SQUARE.grid_shape), SQUARE)
    assert integrate_2form(area) == pytest.approx(4 * np.pi**2, rel=1e-15)
    ico = IcosphereDomain(5)
    assert abs(integrate_2form(DiscreteForm(2, np.ones(ico.grid_shape), ico)) - 4 * np.pi) < 1e-3 * 4 * np.pi
    with pytest.raises(DegreeError):
        integrate_2form(_one_form(SQUARE, 1.0, 0.0))


def test_exterior_derivative_examples():
    const = DiscreteForm(0, np.full(SQUARE.grid_shape, 3.0), SQUARE)
    assert exterior_derivative(const).max_abs() == 0.0
    d = TorusDomain(1j, 32, 32, 2 * np.pi)
    x, _ = d.coords
    # a periodic function that equals x up to the wrap: x - 2 pi * sawtooth is not smooth, so use sin
    df = exterior_derivative(DiscreteForm(0, np.sin(x), d))
    np.testing.assert_allclose(df.values[0], np.cos(x), atol=1e-12)
    assert np.max(np.abs(df.values[1])) < 1e-12
    with pytest.raises(DegreeError):
        exterior_derivative(DiscreteForm(2, np.zeros(d.grid_shape), d))


def _smooth(d, seed=0):
    rng = np.random.default_rng(seed)
    x, y = d.coords
    c = rng.normal(size=4)
    return c[0] * np.sin(x + 2 * y) + c[1] * np.cos(3 * x - y) + c[2] * np.sin(y) * np.cos(x) + c[3]


def test_first_derivative_converges_at_second_order():
    errs = []
    for n in (16, 32, 64, 128):
        d = TorusDomain(1j, n, n, 2 * np.pi)
        x, y = d.coords
        f = np.sin(x + 2 * y) + np.cos(3 * x - y)
        exact = np.cos(x + 2 * y) - 3 * np.sin(3 * x - y)
        errs.append(np.max(np.abs(exterior_derivative(DiscreteForm(0, f, d), "fd").values[0] - exact)))
    slopes = -np.diff(np.log2(errs))
    assert np.all(slopes >= 1.9)


def test_dd_vanishes():
    for method in ("fd", "spectral"):
        d = TorusDomain(0.2 + 1.1j, 24, 20, 2.0)
        f = DiscreteForm(0, _smooth(d), d)
        assert exterior_derivative(exterior_derivative(f, method), method).max_abs() < 1e-10


def test_forms_check_shapes():
    with pytest.raises(ValueError):
        DiscreteForm(1, np.zeros(SQUARE.grid_shape), SQUARE)
    with pytest.raises(DegreeError):
        DiscreteForm(3, np.zeros(SQUARE.grid_shape), SQUARE)


# ---------------------------------------------------------------------------
# properties

seeds = st.integers(0, 2**31 - 1)


@given(seeds)
def test_star_squared_is_minus_identity(seed):
    rng = np.random.default_rng(seed)
    w = DiscreteForm(1, rng.normal(size=(2,) + SQUARE.grid_shape + (4,)), SQUARE, quaternionic=True)
    assert np.max(np.abs(hodge_star(hodge_star(w)).values + w.values)) < 1e-13


@given(seeds)
def test_star_commutes_with_functions(seed):
    rng = np.random.default_rng(seed)
    w = DiscreteForm(1, rng.normal(size=(2,) + SQUARE.grid_shape), SQUARE)
    f = rng.normal(size=SQUARE.grid_shape)
    np.testing.assert_allclose(hodge_star(w.scale(f)).values, hodge_star(w).scale(f).values, atol=1e-14)


@given(seeds)
def test_wedge_with_star_is_definite(seed):
    rng = np.random.default_rng(seed)
    # with *w = w o J the real scalar density is -|w|^2 ...
    w = DiscreteForm(1, rng.normal(size=(2,) + SQUARE.grid_shape), SQUARE)
    np.testing.assert_allclose(-wedge_as_quadratic(w, hodge_star(w)).values, np.sum(w.values**2, axis=0))
    # ... and for Im H-valued forms the real part is +|w|^2, the energy density
    v = rng.normal(size=(2,) + SQUARE.grid_shape + (4,))
    v[..., 0] = 0.0
    q = DiscreteForm(1, v, SQUARE, quaternionic=True)
    dens = wedge_as_quadratic(q, hodge_star(q)).values[..., 0]
    assert np.min(dens) >= 0.0
    np.testing.assert_allclose(dens, np.sum(v**2, axis=(0, -1)))


@given(seeds)
def test_wedge_star_antisymmetry(seed):
    rng = np.random.default_rng(seed)
    w = DiscreteForm(1, rng.normal(size=(2,) + SQUARE.grid_shape + (4,)), SQUARE, quaternionic=True)
    e = DiscreteForm(1, rng.normal(size=(2,) + SQUARE.grid_shape + (4,)), SQUARE, quaternionic=True)
    lhs = wedge_as_quadratic(w, hodge_star(e)).values
    rhs = -wedge_as_quadratic(hodge_star(w), e).values
    assert np.max(np.abs(lhs - rhs)) < 1e-13


@given(seeds, st.floats(-3, 3), st.floats(-3, 3))
def test_integration_is_linear(seed, a, b):
    rng = np.random.default_rng(seed)
    w = DiscreteForm(2, rng.normal(size=SQUARE.grid_shape), SQUARE)
    e = DiscreteForm(2, rng.normal(size=SQUARE.grid_shape), SQUARE)
    lhs = integrate_2form(w.scale(a) + e.scale(b))
    assert abs(lhs - a * integrate_2form(w) - b * integrate_2form(e)) < 1e-12 * max(1.0, abs(lhs))


@given(seeds, st.sampled_from(["fd", "spectral"]))
def test_stokes_on_torus(seed, method):
    rng = np.random.default_rng(seed)
    d = TorusDomain(complex(rng.uniform(-0.5, 0.5), rng.uniform(0.5, 2)), 16, 12, 2 * np.pi)
    alpha = DiscreteForm(1, np.stack([_smooth(d, seed), _smooth(d, seed + 1)]), d)
    assert abs(integrate_2form(exterior_derivative(alpha, method))) < 1e-10
