import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from quatgeo.dirac import (SPIN_STRUCTURES, Cluster, ClusteringError, DiracMatrix, Spectrum, SpinStructureTorus,
                           assemble_dirac_flat_torus, assemble_dirac_round_sphere, check_eigenvalue_bound,
                           compute_spectrum, dirac_to_holomorphic, flat_torus_oracle)
from quatgeo.domain import IcosphereDomain, TorusDomain

SQUARE = TorusDomain(1j, 12, 12, 2 * np.pi)


def _signed_oracle(domain, eps, cutoff):
    """Independent Fourier oracle: eigenvalues +-|2 pi (xi + eps) . dual basis| per mode."""
    w1, w2 = domain.generators
    # dual basis b_k with <b_k, w_l> = delta_kl, vectors in R^2
    a = np.array([[w1.real, w2.real], [w1.imag, w2.imag]])
    b = np.linalg.inv(a).T
    vals = []
    for m1 in range(-16, 17):
        for m2 in range(-16, 17):
            k = 2 * np.pi * ((m1 + eps.eps1) * b[:, 0] + (m2 + eps.eps2) * b[:, 1])
            lam = np.linalg.norm(k)
            if lam <= cutoff:
                vals += [lam, -lam]
    return np.sort(vals)


def test_spin_structures():
    assert len(set(SPIN_STRUCTURES)) == 4
    assert SpinStructureTorus.parse("1/2, 0") == SpinStructureTorus(0.5, 0.0)
    with pytest.raises(ValueError):
        SpinStructureTorus(0.25, 0.0)
    with pytest.raises(ValueError):
        SpinStructureTorus.parse("0.5")


def test_trivial_spin_structure_has_kernel():
    s = compute_spectrum(assemble_dirac_flat_torus(SQUARE, SpinStructureTorus(0, 0)), 12)
    zero = s.near(0.0)
    assert abs(zero.lam) < 1e-12 and zero.mult == 1


def test_lowest_eigenvalue_square_torus():
    s = compute_spectrum(assemble_dirac_flat_torus(SQUARE, SpinStructureTorus(0.5, 0.5)), 12)
    assert min(c.lam for c in s.positive()) == pytest.approx(1 / np.sqrt(2), abs=1e-12)


@pytest.mark.parametrize("eps", SPIN_STRUCTURES)
def test_flat_torus_matches_oracle(eps):
    d = assemble_dirac_flat_torus(SQUARE, eps)
    s = compute_spectrum(d, 40)
    top = max(abs(c.lam) for c in s.clusters)
    got = np.sort([c.lam for c in s.clusters for _ in range(c.complex_count)])
    ref = _signed_oracle(SQUARE, eps, top + 1e-9)
    assert len(got) == len(ref)
    assert np.max(np.abs(got - ref)) < 1e-6
    # the library's own oracle agrees with this one
    np.testing.assert_allclose(flat_torus_oracle(SQUARE, eps, top + 1e-9), ref, atol=1e-12)


def test_finite_differences_converge_at_second_order():
    eps = SpinStructureTorus(0.5, 0.5)
    errs = []
    for n in (8, 16, 32):
        d = assemble_dirac_flat_torus(TorusDomain(1j, n, n, 2 * np.pi), eps, method="fd")
        s = compute_spectrum(d, 40)
        errs.append(abs(min(c.lam for c in s.positive()) - 1 / np.sqrt(2)))
    slopes = -np.diff(np.log2(errs))
    assert np.all(slopes > 1.9)


def test_shift_moves_every_cluster():
    d = assemble_dirac_flat_torus(TorusDomain(1j, 6, 6, 2 * np.pi), SpinStructureTorus(0.5, 0))
    base = compute_spectrum(d, d.dimension)
    shifted = compute_spectrum(d.shifted(0.3), d.dimension)
    np.testing.assert_allclose(sorted(c.lam + 0.3 for c in base.clusters), sorted(c.lam for c in shifted.clusters),
                               atol=1e-10)
    assert [c.mult for c in base.clusters] == [c.mult for c in shifted.clusters]


def test_zero_request_gives_empty_spectrum():
    s = compute_spectrum(assemble_dirac_flat_torus(SQUARE, SpinStructureTorus()), 0)
    assert s.clusters == [] and len(s.eigenvalues) == 0


def test_odd_cluster_count_is_an_error():
    d = DiracMatrix(np.diag([1.0, 1.0, 2.0, 3.0, 3.0]), 1.0, 1, np.eye(5))
    with pytest.raises(ClusteringError):
        compute_spectrum(d, 5)


def test_bound_examples():
    s = Spectrum([Cluster(1.0, 1, 2, 1e-6, 0.0)], np.array([1.0, 1.0]))
    (row,) = check_eigenvalue_bound(s, 4 * np.pi, 0)
    assert row.margin == pytest.approx(0.0, abs=1e-12) and row.passed
    s0 = Spectrum([Cluster(0.0, 2, 4, 1e-6, 0.0)], np.zeros(4))
    (row,) = check_eigenvalue_bound(s0, 3.0, 2)
    assert row.rhs == 0.0 and row.passed
    with pytest.raises(ValueError):
        check_eigenvalue_bound(s, 0.0, 0)


def test_bound_on_square_torus():
    d = assemble_dirac_flat_torus(SQUARE, SpinStructureTorus(0.5, 0.5))
    rows = check_eigenvalue_bound(compute_spectrum(d, 40), d.area, 1)
    assert all(r.passed for r in rows)
    first = min((r for r in rows if r.lam > 0), key=lambda r: r.lam)
    assert first.lhs == pytest.approx(2 * np.pi**2)
    assert first.rhs == pytest.approx(np.pi * (first.mult**2 - 1))


def test_holomorphic_descriptor():
    zero = dirac_to_holomorphic(0.0, 5.0, 1, 1)
    assert zero.willmore == 0.0 and zero.complex_holomorphic and zero.degree == 0
    for n in (1, 2, 3):
        h = dirac_to_holomorphic(float(n), 4 * np.pi, 0, n)
        assert (h.degree, h.genus, h.h0) == (-1, 0, n)
        assert h.willmore == pytest.approx(4 * np.pi * n**2)
    assert dirac_to_holomorphic(3.0, 2.0, 1, 1).willmore == pytest.approx(9 * dirac_to_holomorphic(1.0, 2.0, 1, 1).willmore)


@pytest.fixture(scope="module")
def sphere_levels():
    out = {}
    for level in (3, 4):
        d = assemble_dirac_round_sphere(IcosphereDomain(level))
        out[level] = (d, compute_spectrum(d, 24, cluster_tol=1e-2))
    return out


def test_sphere_operator_is_hermitian(sphere_levels):
    for d, _ in sphere_levels.values():
        assert d.hermiticity_residual() < 1e-12


def test_sphere_spectrum_structure(sphere_levels):
    _, s = sphere_levels[4]
    for n in (1, 2, 3):
        for sign in (1, -1):
            c = s.near(sign * n)
            assert abs(c.lam - sign * n) < 0.02 * n
            assert c.mult == n


def test_sphere_refinement_reduces_errors(sphere_levels):
    for n in (1, 2, 3):
        for sign in (1, -1):
            errs = [abs(sphere_levels[lv][1].near(sign * n).lam - sign * n) for lv in (3, 4)]
            if max(errs) < 1e-12:
                continue  # lambda = +1 is exact on every mesh (constant spinors)
            assert errs[1] < errs[0]


# ---------------------------------------------------------------------------
# properties

moduli = st.tuples(st.floats(-0.5, 0.5), st.floats(0.6, 1.8)).map(lambda t: complex(*t))


@given(moduli, st.sampled_from(SPIN_STRUCTURES), st.integers(3, 6), st.sampled_from(["spectral", "fd"]))
def test_spectrum_is_symmetric(tau, eps, n, method):
    # the Fourier band {m + eps} is symmetric for odd sizes at eps = 0 and even sizes at
    # eps = 1/2; otherwise one unresolved extreme mode is unpaired
    nx = 2 * n + (eps.eps1 == 0) if method == "spectral" else 2 * n
    ny = 2 * n - 2 + (eps.eps2 == 0) if method == "spectral" else 2 * n - 1
    d = assemble_dirac_flat_torus(TorusDomain(tau, nx, ny, 2 * np.pi), eps, method)
    assert d.hermiticity_residual() < 1e-12
    assert d.anticommutator_residual() < 1e-12
    s = compute_spectrum(d, d.dimension, cluster_tol=1e-8)
    pos = {round(c.lam, 7): c.mult for c in s.clusters if c.lam > 1e-9}
    neg = {round(-c.lam, 7): c.mult for c in s.clusters if c.lam < -1e-9}
    assert pos == neg
    assert [c.lam for c in s.clusters] == sorted(c.lam for c in s.clusters)


@given(moduli, st.sampled_from(SPIN_STRUCTURES))
def test_spectrum_is_invariant_under_lattice_relabelling(tau, eps):
    # tau -> tau + 1 keeps the lattice; the second generator becomes w1 + w2,
    # so its phase picks up eps1
    cutoff = 2.33
    relabelled = SpinStructureTorus(eps.eps1, (eps.eps1 + eps.eps2) % 1.0)
    a = _signed_oracle(TorusDomain(tau, 8, 8, 2 * np.pi), eps, cutoff)
    b = _signed_oracle(TorusDomain(tau + 1, 8, 8, 2 * np.pi), relabelled, cutoff)
    assert len(a) == len(b) and np.allclose(a, b, atol=1e-12)
    da = compute_spectrum(assemble_dirac_flat_torus(TorusDomain(tau, 12, 12, 2 * np.pi), eps), 20)
    db = compute_spectrum(assemble_dirac_flat_torus(TorusDomain(tau + 1, 12, 12, 2 * np.pi), relabelled), 20)
    common = min(max(abs(c.lam) for c in da.clusters), max(abs(c.lam) for c in db.clusters)) - 1e-9
    la = sorted((round(c.lam, 8), c.mult) for c in da.clusters if abs(c.lam) < common)
    lb = sorted((round(c.lam, 8), c.mult) for c in db.clusters if abs(c.lam) < common)
    assert la == lb


@given(st.lists(st.tuples(st.floats(0.01, 5.0), st.integers(1, 6)), min_size=1, max_size=6), st.integers(0, 4),
       st.floats(0.5, 50.0))
def test_bound_rhs_is_monotone_in_multiplicity(rows, g, area):
    clusters = [Cluster(lam, m, 2 * m, 1e-6, 0.0) for lam, m in rows]
    out = check_eigenvalue_bound(Spectrum(clusters, np.array([])), area, g)
    for r in out:
        assert r.lhs == pytest.approx(r.lam**2 * area)
        assert r.passed == (r.margin >= -1e-9 * max(1.0, r.rhs))
    by_m = sorted({(r.mult, r.rhs) for r in out})
    assert all(a[1] <= b[1] for a, b in zip(by_m, by_m[1:]))
