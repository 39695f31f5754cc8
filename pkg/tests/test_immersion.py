import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from quatgeo.domain import IcosphereDomain, LonLatDomain, TorusDomain
from quatgeo.immersion import (NonConformalWarning, OpenDomainError, ResolutionError, SingularCellError, SphereMap,
                               connection_split, degree_of_normal, derive_shape, derive_shape_mesh, dstar_residual,
                               gauss_bonnet, harmonic_energy_and_relation, hopf_field, immersion_preset, normal_map,
                               revolution_torus_preset, willmore_energy, willmore_energy_hopf)
from quatgeo.quatlinalg import from_vector, qmul


def torus_of_revolution_willmore(big_r, small_r):
    """Closed form for the torus of revolution: pi^2 R^2 / (r sqrt(R^2 - r^2))."""
    return math.pi**2 * big_r**2 / (small_r * math.sqrt(big_r**2 - small_r**2))


@pytest.fixture(scope="module")
def clifford():
    surface, dom = immersion_preset("revolution-torus", {"nx": 64, "ny": 64})
    return derive_shape(dom, surface)


@pytest.fixture(scope="module")
def unit_mesh():
    ico = IcosphereDomain(5)
    return derive_shape_mesh(ico, ico.vertices, ico.vertices)


def test_round_sphere_mesh_curvatures(unit_mesh):
    assert np.max(np.abs(unit_mesh.H - 1)) < 0.01
    assert np.max(np.abs(unit_mesh.K - 1)) < 0.01


def test_round_sphere_mesh_willmore_vanishes(unit_mesh):
    assert abs(willmore_energy(unit_mesh)) < 1e-3


def test_sphere_gauss_bonnet(unit_mesh):
    assert abs(gauss_bonnet(unit_mesh) - 4 * np.pi) < 0.01 * 4 * np.pi


def test_analytic_sphere_is_umbilic():
    surface, dom = immersion_preset("sphere", {"nx": 32, "ny": 64})
    data = derive_shape(dom, surface)
    np.testing.assert_allclose(data.H, 1.0, atol=1e-12)
    np.testing.assert_allclose(data.K, 1.0, atol=1e-12)
    qx, qy = hopf_field(data)
    assert max(np.max(np.abs(qx)), np.max(np.abs(qy))) < 1e-12
    assert np.max(np.abs(np.linalg.norm(data.N, axis=-1) - 1)) < 1e-10


def test_cylinder_curvatures():
    surface, dom = immersion_preset("cylinder", {"radius": 0.5, "nx": 32, "ny": 16})
    data = derive_shape(dom, surface)
    np.testing.assert_allclose(data.H, 1.0, atol=1e-12)
    np.testing.assert_allclose(data.K, 0.0, atol=1e-12)


def test_cylinder_hopf_route_matches_curvature_route():
    surface, dom = immersion_preset("cylinder", {"radius": 0.5, "nx": 32, "ny": 16})
    data = derive_shape(dom, surface)
    w1, w2 = willmore_energy(data), willmore_energy_hopf(data)
    assert abs(w1 - w2) < 1e-6 * w1
    # (H^2 - K) |df|^2 = 1 * (1/4) over a 2 pi x 2 pi cell
    assert w1 == pytest.approx(np.pi**2, rel=1e-12)


def test_torus_of_revolution(clifford):
    assert clifford.K.min() < 0 < clifford.K.max()
    total = np.sum(np.abs(clifford.K) * clifford.area_density * clifford.domain.weights)
    assert abs(gauss_bonnet(clifford)) < 0.01 * total
    w = willmore_energy(clifford)
    assert abs(w - 2 * np.pi**2) < 0.01 * 2 * np.pi**2
    assert abs(w - willmore_energy_hopf(clifford)) < 5e-3 * w


def test_willmore_is_scale_invariant():
    surface, dom = immersion_preset("revolution-torus", {"nx": 48, "ny": 48})
    w = willmore_energy(derive_shape(dom, surface))
    for c in (0.1, 3.0, 17.0):
        assert willmore_energy(derive_shape(dom, surface.scaled(c))) == pytest.approx(w, rel=1e-9)


def _perturbed_torus(eps, seed=0):
    surface, dom = immersion_preset("revolution-torus", {"nx": 48, "ny": 48})
    base = derive_shape(dom, surface)
    rng = np.random.default_rng(seed)
    x, y = dom.coords
    modes = [np.sin(x + y), np.cos(2 * y), np.sin(x) * np.cos(y), np.cos(x - 2 * y)]
    bump = np.stack([sum(rng.normal() * m for m in modes) for _ in range(3)], -1)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", NonConformalWarning)
        return derive_shape(dom, samples=base.f + eps * bump)


def test_hopf_field_anticommutes_on_random_immersion():
    data = _perturbed_torus(0.05, seed=3)
    qx, qy = hopf_field(data)
    n = from_vector(data.N)
    sx, sy = data.star(qx, qy)
    scale = max(np.max(np.abs(qx)), np.max(np.abs(qy)))
    assert max(np.max(np.abs(sx + qmul(n, qx))), np.max(np.abs(sy + qmul(n, qy)))) < 1e-10 * scale


def test_non_conformal_input_warns():
    surface, dom = immersion_preset("revolution-torus", {"nx": 32, "ny": 32})
    base = derive_shape(dom, surface)
    x, _ = dom.coords
    with pytest.warns(NonConformalWarning):
        data = derive_shape(dom, samples=base.f + 0.05 * np.stack([np.sin(x), 0 * x, 0 * x], -1))
    assert data.conformality_residual > 1e-3


def test_singular_cells_are_reported():
    dom = TorusDomain(1j, 8, 8, 2 * np.pi)
    x, y = dom.coords
    with pytest.raises(SingularCellError) as err:
        derive_shape(dom, samples=np.stack([np.sin(x), np.cos(x), 0 * x], -1))
    assert len(err.value.cells) == 64


def test_open_domain_needs_periods():
    dom = TorusDomain(1j, 16, 16, 2 * np.pi)
    x, y = dom.coords
    plane = np.stack([x, y, 0 * x], -1)
    with pytest.raises(OpenDomainError), pytest.warns(NonConformalWarning):
        willmore_energy(derive_shape(dom, samples=plane))
    data = derive_shape(dom, samples=plane, periods=[(2 * np.pi, 0, 0), (0, 2 * np.pi, 0)])
    assert abs(willmore_energy(data)) < 1e-12


def test_energy_relation_identity_map():
    rel = harmonic_energy_and_relation(normal_map("identity", LonLatDomain(64, 256)))
    assert abs(rel.E - 4 * np.pi) < 0.01 * 4 * np.pi
    assert rel.W < 1e-3 * 4 * np.pi
    assert rel.degree == 1
    assert rel.residual < 0.02 * 4 * np.pi


def test_energy_relation_constant_map():
    rel = harmonic_energy_and_relation(normal_map("constant", TorusDomain(1j, 8, 8)))
    assert (rel.E, rel.W, rel.degree) == (0.0, 0.0, 0)


def test_energy_relation_equator_map():
    rel = harmonic_energy_and_relation(normal_map("equator", TorusDomain(0.7j, 32, 16, 2 * np.pi)))
    assert rel.degree == 0
    assert abs(rel.E - 2 * rel.W) < 0.01 * rel.E


def test_energy_relation_rejects_non_unit():
    m = normal_map("constant", TorusDomain(1j, 8, 8))
    m.N[0, 0, 2] = 1.5
    with pytest.raises(ValueError):
        harmonic_energy_and_relation(m)


def test_degrees():
    lonlat = LonLatDomain(64, 256)
    assert degree_of_normal(normal_map("identity", lonlat))[0] == 1
    assert degree_of_normal(normal_map("antipodal", lonlat))[0] == -1
    _, dom = immersion_preset("revolution-torus", {"nx": 48, "ny": 48})
    assert degree_of_normal(normal_map("torus-gauss", dom))[0] == 0


def test_degree_resolution_error():
    # a truncated chart that covers only half the sphere has signed area 2 pi: gap 0.5
    lonlat = LonLatDomain(32, 64, ymax=7.0)
    m = normal_map("identity", lonlat)
    y = lonlat.coords[1]
    half = np.where(y[..., None] > 0, m.N, np.array([0.0, 0.0, 1.0]))
    cut = SphereMap(lonlat, half, np.where(y[..., None] > 0, m.Nx, 0.0), np.where(y[..., None] > 0, m.Ny, 0.0))
    with pytest.raises(ResolutionError):
        degree_of_normal(cut)


def test_dstar_residual_separates_harmonic_maps():
    harmonic = normal_map("equator", TorusDomain(1j, 32, 32, 2 * np.pi))
    assert dstar_residual(harmonic, "A") < 1e-12
    assert dstar_residual(harmonic, "Q") < 1e-12
    _, dom = immersion_preset("revolution-torus", {"nx": 48, "ny": 48})
    assert dstar_residual(normal_map("torus-gauss", dom), "A") > 1e-2


def test_dstar_residual_fd_resolves_equator_map():
    errs = []
    for n in (16, 32, 64):
        errs.append(dstar_residual(normal_map("equator", TorusDomain(1j, n, n, 2 * np.pi)), "A", "fd"))
    assert max(errs) < 1e-12


def test_connection_split_reconstructs_n_dn():
    _, dom = immersion_preset("revolution-torus", {"nx": 32, "ny": 32})
    m = normal_map("torus-gauss", dom)
    split = connection_split(m)
    n = from_vector(m.N)
    nx, ny = from_vector(m.Nx), from_vector(m.Ny)
    ax, ay = split.A
    qx, qy = split.Q
    # 2 *(A + Q) = N *dN with *(a, b) = (b, -a)
    assert np.max(np.abs(2 * (ay + qy) - qmul(n, ny))) < 1e-12
    assert np.max(np.abs(-2 * (ax + qx) + qmul(n, nx))) < 1e-12
    # *A = N A, *Q = -N Q
    assert np.max(np.abs(ay - qmul(n, ax))) < 1e-12
    assert np.max(np.abs(qy + qmul(n, qx))) < 1e-12


# ---------------------------------------------------------------------------
# properties


@given(st.floats(1.2, 4.0), st.floats(0.3, 2.0))
def test_revolution_tori_match_closed_form(ratio, small_r):
    big_r = ratio * small_r
    surface = revolution_torus_preset(big_r, small_r)
    _, dom = immersion_preset("revolution-torus", {"R": big_r, "r": small_r, "nx": 48, "ny": 96})
    data = derive_shape(dom, surface)
    w, wq = willmore_energy(data), willmore_energy_hopf(data)
    assert abs(w - wq) < 5e-3 * w
    assert abs(w - torus_of_revolution_willmore(big_r, small_r)) < 0.01 * w
    total = np.sum(np.abs(data.K) * data.area_density * dom.weights)
    assert abs(gauss_bonnet(data)) < 0.01 * total


@given(st.integers(0, 2**31 - 1), st.floats(0.0, 0.05))
def test_willmore_routes_agree_on_perturbed_tori(seed, eps):
    data = _perturbed_torus(eps, seed)
    w, wq = willmore_energy(data), willmore_energy_hopf(data)
    assert abs(w - wq) < 5e-3 * max(w, wq)
    total = np.sum(np.abs(data.K) * data.area_density * data.domain.weights)
    assert abs(gauss_bonnet(data)) < 0.01 * total
