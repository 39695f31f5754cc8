"""Dirac operators on flat tori and on the round sphere, spectra and eigenvalue bounds.

Spinors are trivialised as ``C^2``-valued functions.  On a flat torus the
operator is ``D = sigma_1 (-i d/dx) + sigma_2 (-i d/dy)`` acting on functions
with boundary phases ``exp(2 pi i eps_a)`` along the lattice generators,
assembled spectrally.  On the unit sphere the Dirac operator is unitarily
equivalent to ``sigma . L + 1`` with ``L = -i x cross grad``; its spectrum is
``+-n`` with complex multiplicity ``2n``.  That operator is discretised on an
icosphere by a least-squares P1 form ``sum_f A_f |(D psi)(c_f)|^2`` for
``D^2`` (which has no spurious zero modes) and a Galerkin form for ``D``
that is only used to split each ``lambda^2`` cluster by sign.

Both spinor bundles carry the quaternionic structure ``sigma_2 o conj`` which
commutes with ``D``; eigenvalue multiplicities are therefore even over ``C``
and are reported over ``H``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .domain import IcosphereDomain, TorusDomain

__all__ = [
    "SpinStructureTorus",
    "DiracMatrix",
    "Cluster",
    "Spectrum",
    "ClusteringError",
    "BoundRow",
    "HolomorphicDescriptor",
    "assemble_dirac_flat_torus",
    "assemble_dirac_round_sphere",
    "compute_spectrum",
    "check_eigenvalue_bound",
    "dirac_to_holomorphic",
    "flat_torus_oracle",
    "SPIN_STRUCTURES",
]

SIGMA = np.array(
    [
        [[0, 1], [1, 0]],
        [[0, -1j], [1j, 0]],
        [[1, 0], [0, -1]],
    ],
    dtype=complex,
)


class ClusteringError(ValueError):
    """A cluster has an odd complex multiplicity."""


@dataclass(frozen=True)
class SpinStructureTorus:
    """Boundary phases ``exp(2 pi i eps)`` along the two generators, ``eps`` in ``{0, 1/2}``."""

    eps1: float = 0.0
    eps2: float = 0.0

    def __post_init__(self):
        for e in (self.eps1, self.eps2):
            if e not in (0.0, 0.5):
                raise ValueError(f"spin phase must be 0 or 1/2, got {e}")

    @classmethod
    def parse(cls, text: str) -> SpinStructureTorus:
        parts = [p.strip() for p in str(text).split(",")]
        if len(parts) != 2:
            raise ValueError("spin structure is given as 'e1,e2'")
        vals = []
        for p in parts:
            v = float(p.replace("1/2", "0.5"))
            vals.append(v)
        return cls(*vals)

    def as_tuple(self) -> tuple[float, float]:
        return (self.eps1, self.eps2)


SPIN_STRUCTURES = tuple(SpinStructureTorus(a, b) for a in (0.0, 0.5) for b in (0.0, 0.5))


@dataclass
class DiracMatrix:
    """Assembled Dirac operator.

    ``matrix`` is Hermitian.  ``grading`` is an operator anticommuting with
    ``D`` (``sigma_3`` on tori, ``sigma . nu`` on the sphere).  Sphere
    operators also carry the least-squares pair ``(stiffness, mass)`` for
    ``D^2``.
    """

    matrix: object
    area: float
    genus: int
    grading: object
    stiffness: object = None
    mass: object = None
    name: str = ""
    meta: dict = field(default_factory=dict)

    @property
    def dimension(self) -> int:
        return self.matrix.shape[0]

    def hermiticity_residual(self) -> float:
        m = self.matrix
        d = m - m.conj().T
        if sp.issparse(d):
            return float(abs(d).max()) if d.nnz else 0.0
        return float(np.max(np.abs(d)))

    def anticommutator_residual(self) -> float:
        m, g = self.matrix, self.grading
        a = g @ m + m @ g
        if sp.issparse(a):
            return float(abs(a).max()) / max(float(abs(m).max()), 1e-300) if a.nnz else 0.0
        return float(np.max(np.abs(a))) / max(float(np.max(np.abs(m))), 1e-300)

    def shifted(self, c: float) -> DiracMatrix:
        """``D + c Id`` (loses the grading property)."""
        eye = sp.identity(self.dimension, format="csr") if sp.issparse(self.matrix) else np.eye(self.dimension)
        return DiracMatrix(self.matrix + c * eye, self.area, self.genus, self.grading, name=self.name + f"+{c}")


# ---------------------------------------------------------------------------
# flat torus


def _twisted_derivative(n: int, eps: float) -> np.ndarray:
    """Dense matrix of d/ds on ``[0, 1)`` for functions with phase ``exp(2 pi i eps)``."""
    s = np.arange(n) / n
    m = np.fft.fftfreq(n, d=1.0 / n)
    f = np.fft.fft(np.eye(n), axis=0)  # f @ v = fft(v)
    finv = np.conj(f.T) / n
    e = np.exp(2j * np.pi * eps * s)
    return (e[:, None] * (finv @ (2j * np.pi * (m + eps)[:, None] * f))) * np.conj(e)[None, :]


def _twisted_derivative_fd(n: int, eps: float) -> np.ndarray:
    """Centred second-order difference on ``[0, 1)`` with the twisted wrap."""
    d = np.zeros((n, n), dtype=complex)
    ph = np.exp(2j * np.pi * eps)
    for j in range(n):
        up, dn = j + 1, j - 1
        d[j, up % n] += 0.5 * n * (ph if up == n else 1.0)
        d[j, dn % n] -= 0.5 * n * (np.conj(ph) if dn < 0 else 1.0)
    return d


def assemble_dirac_flat_torus(domain: TorusDomain, eps: SpinStructureTorus, method: str = "spectral") -> DiracMatrix:
    """``sigma_1 (-i d/dx) + sigma_2 (-i d/dy)`` with twisted boundary phases.

    ``method="spectral"`` is exact on the resolved modes; ``"fd"`` uses centred
    differences and converges at second order.
    """
    if method == "spectral":
        deriv = _twisted_derivative
    elif method == "fd":
        deriv = _twisted_derivative_fd
    else:
        raise ValueError(f"unknown assembly method {method!r}")
    ds = deriv(domain.nx, eps.eps1)
    dt = deriv(domain.ny, eps.eps2)
    i_x, i_y = np.eye(domain.nx), np.eye(domain.ny)
    d_s = np.kron(ds, i_y)
    d_t = np.kron(i_x, dt)
    dx = d_s / domain.scale
    dy = (d_t - domain.tau.real * d_s) / (domain.scale * domain.tau.imag)
    z = np.zeros_like(dx)
    mat = np.block([[z, -1j * dx - dy], [-1j * dx + dy, z]])
    mat = 0.5 * (mat + mat.conj().T)
    nsite = domain.nx * domain.ny
    grading = np.kron(SIGMA[2], np.eye(nsite))
    return DiracMatrix(mat, domain.area, 1, grading, name="flat-torus", meta={"eps": eps.as_tuple()})


def flat_torus_oracle(domain: TorusDomain, eps: SpinStructureTorus, cutoff: float, modes: int | None = None):
    """Eigenvalues ``+-|k|`` for ``k`` dual to the lattice with the given phases, ``|k| < cutoff``.

    Returned as a sorted array with complex multiplicity (each ``k`` gives
    ``+|k|`` and ``-|k|`` once).
    """
    w1, w2 = domain.generators
    g = np.array([[w1.real, w1.imag], [w2.real, w2.imag]])
    ginv = np.linalg.inv(g)
    # |k| >= 2 pi |m + eps| / (largest singular value of g)
    smax = np.linalg.norm(g, 2)
    span = int(math.ceil(cutoff * smax / (2.0 * np.pi))) + 2 if modes is None else modes
    vals = []
    for m1 in range(-span, span + 1):
        for m2 in range(-span, span + 1):
            k = 2.0 * np.pi * ginv @ np.array([m1 + eps.eps1, m2 + eps.eps2])
            r = float(np.hypot(*k))
            if r < cutoff:
                vals.extend([r, -r])
    return np.sort(np.array(vals))


# ---------------------------------------------------------------------------
# round sphere


def assemble_dirac_round_sphere(domain: IcosphereDomain) -> DiracMatrix:
    """Discrete ``sigma . L + 1`` on the icosphere.

    Per face, ``(D psi)(c_f) = sum_k (-i sigma . (n_f x g_k) + 1/3) psi_k`` with
    ``g_k`` the P1 gradients.  The stiffness ``B^H A B`` and the lumped
    (Voronoi-free barycentric) mass define the ``D^2`` eigenproblem; the
    Hermitised Galerkin matrix ``(P^H A B + B^H A P) / 2`` is stored as ``matrix``.
    """
    v, faces = domain.vertices, domain.faces
    nv, nf = len(v), len(faces)
    area, normal, _, _ = domain.face_geometry
    grads = domain.barycentric_gradients  # (nf, 3, 3)
    rows, cols, vals = [], [], []
    prow, pcol, pval = [], [], []
    for k in range(3):
        c = np.cross(normal, grads[:, k])  # n x g_k
        blk = -1j * np.einsum("fa,aij->fij", c, SIGMA) + np.eye(2) / 3.0
        for a in range(2):
            for b in range(2):
                rows.append(2 * np.arange(nf) + a)
                cols.append(b * nv + faces[:, k])
                vals.append(blk[:, a, b])
            prow.append(2 * np.arange(nf) + a)
            pcol.append(a * nv + faces[:, k])
            pval.append(np.full(nf, 1.0 / 3.0))
    shape = (2 * nf, 2 * nv)
    bmat = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=shape)
    pmat = sp.csr_matrix((np.concatenate(pval), (np.concatenate(prow), np.concatenate(pcol))), shape=shape)
    wts = sp.diags(np.repeat(area, 2))
    stiff = (bmat.conj().T @ wts @ bmat).tocsc()
    stiff = 0.5 * (stiff + stiff.conj().T)
    lumped = np.zeros(nv)
    for k in range(3):
        np.add.at(lumped, faces[:, k], area / 3.0)
    mass = sp.diags(np.concatenate([lumped, lumped])).tocsc()
    gal = pmat.conj().T @ wts @ bmat
    gal = (0.5 * (gal + gal.conj().T)).tocsr()
    # grading sigma . nu at the vertices
    gx = sp.diags(v[:, 0])
    gy = sp.diags(v[:, 1])
    gz = sp.diags(v[:, 2])
    grading = sp.bmat([[gz, gx - 1j * gy], [gx + 1j * gy, -gz]]).tocsr()
    return DiracMatrix(gal, float(np.sum(area)), 0, grading, stiff, mass, name="round-sphere",
                       meta={"level": domain.level, "vertices": nv})


# ---------------------------------------------------------------------------
# spectra


@dataclass(frozen=True)
class Cluster:
    lam: float
    mult: int  # quaternionic
    complex_count: int
    gap: float
    spread: float


@dataclass
class Spectrum:
    clusters: list
    eigenvalues: np.ndarray

    def positive(self) -> list:
        return [c for c in self.clusters if c.lam > 0]

    def near(self, lam: float) -> Cluster:
        return min(self.clusters, key=lambda c: abs(c.lam - lam))


def _cluster(vals: np.ndarray, tol: float):
    vals = np.sort(vals)
    groups = []
    for v in vals:
        if groups and abs(v - groups[-1][-1]) <= tol * max(1.0, abs(v)):
            groups[-1].append(v)
        else:
            groups.append([v])
    return groups


def _smallest_dense(mat, count):
    m = mat.toarray() if sp.issparse(mat) else np.asarray(mat)
    w = sla.eigh(m, eigvals_only=True)
    order = np.argsort(np.abs(w), kind="stable")
    return w[order[:count]]


def _sphere_eigs(d: DiracMatrix, count: int):
    """Signed eigenvalues of the sphere operator from the ``D^2`` pencil."""
    n = d.dimension
    if n <= 600:
        w2, vec = sla.eigh(d.stiffness.toarray(), d.mass.toarray())
        w2, vec = w2[:count], vec[:, :count]
    else:
        w2, vec = spla.eigsh(d.stiffness, k=min(count, n - 2), M=d.mass, sigma=0.0, which="LM",
                             v0=np.ones(n, dtype=complex))
        order = np.argsort(w2)
        w2, vec = w2[order], vec[:, order]
    w2 = np.clip(w2.real, 0.0, None)
    lam = np.sqrt(w2)
    # split each lambda^2 cluster by the sign of the Galerkin operator; magnitudes
    # come from the D^2 Rayleigh quotient of each Galerkin eigenvector
    out = np.empty_like(lam)
    for grp in _index_groups(lam, 1e-2):
        v = vec[:, grp]
        g = v.conj().T @ (d.matrix @ v)
        mgram = v.conj().T @ (d.mass @ v)
        sgram = v.conj().T @ (d.stiffness @ v)
        mgram = 0.5 * (mgram + mgram.conj().T)
        s, y = sla.eigh(0.5 * (g + g.conj().T), mgram)
        ray = np.einsum("ij,ik,kj->j", y.conj(), sgram, y).real / np.einsum("ij,ik,kj->j", y.conj(), mgram, y).real
        out[grp] = np.where(s < 0, -1.0, 1.0) * np.sqrt(np.clip(ray, 0.0, None))
    return out


def _index_groups(sorted_vals: np.ndarray, tol: float):
    groups, cur = [], [0]
    for i in range(1, len(sorted_vals)):
        if abs(sorted_vals[i] - sorted_vals[i - 1]) <= tol * max(1.0, abs(sorted_vals[i])):
            cur.append(i)
        else:
            groups.append(cur)
            cur = [i]
    if len(sorted_vals):
        groups.append(cur)
    return groups


def compute_spectrum(d: DiracMatrix, k: int, cluster_tol: float = 1e-6, dense_limit: int = 4000) -> Spectrum:
    """Clusters among the ``k`` smallest-magnitude eigenvalues.

    Extra eigenvalues are computed so that the last cluster is complete;
    clusters cut off by the eigensolver window are dropped.  Sphere operators
    are solved via the ``D^2`` pencil (``k`` counts eigenvalues of ``D``).
    """
    if k <= 0:
        return Spectrum([], np.array([]))
    if cluster_tol <= 0:
        raise ValueError("cluster tolerance must be positive")
    n = d.dimension
    pad = max(8, k // 2)
    want = min(n, k + pad)
    if d.stiffness is not None:
        vals = _sphere_eigs(d, want)
        complete_all = want >= n
    elif n <= dense_limit:
        vals = _smallest_dense(d.matrix, want)
        complete_all = want >= n
    else:
        m = d.matrix
        vals, _ = spla.eigsh(sp.csc_matrix(m), k=min(want, n - 2), sigma=1e-7, which="LM", v0=np.ones(n, dtype=complex))
        vals = vals.real
        complete_all = False
    vals = np.asarray(vals, dtype=float)
    edge = np.max(np.abs(vals)) if len(vals) else 0.0
    first_k = np.sort(np.abs(vals))[: min(k, len(vals))]
    kth = first_k[-1] if len(first_k) else 0.0
    clusters = []
    for grp in _cluster(vals, cluster_tol):
        lam = float(np.mean(grp))
        if np.min(np.abs(grp)) > kth * (1 + 1e-12) + 1e-14:
            continue
        if not complete_all and np.max(np.abs(grp)) >= edge * (1 - cluster_tol) - 1e-14:
            continue
        count = len(grp)
        if count % 2:
            raise ClusteringError(
                f"cluster at lambda={lam:.6g} has odd complex multiplicity {count}; "
                f"cluster tolerance {cluster_tol:g} is too tight or too loose"
            )
        clusters.append(Cluster(lam, count // 2, count, cluster_tol, float(np.ptp(grp))))
    clusters.sort(key=lambda c: c.lam)
    return Spectrum(clusters, np.sort(vals))


# ---------------------------------------------------------------------------
# bounds


@dataclass(frozen=True)
class BoundRow:
    lam: float
    mult: int
    lhs: float
    rhs: float
    margin: float
    passed: bool


def eigenvalue_bound_rhs(m: int, g: int) -> float:
    """Lower bound for ``lambda^2 area`` of an eigenvalue of quaternionic multiplicity ``m``."""
    if g == 0:
        return 4.0 * np.pi * m * m
    return max(0.0, np.pi / g * (m * m - g * g))


def check_eigenvalue_bound(s: Spectrum, area: float, g: int, slack: float = 1e-9) -> list[BoundRow]:
    """``lambda^2 area >= 4 pi m^2`` (genus 0) or ``pi/g (m^2 - g^2)`` (genus ``g >= 1``).

    ``slack`` is relative to the right-hand side; the margin is ``lhs - rhs``.
    """
    if area <= 0:
        raise ValueError("area must be positive")
    rows = []
    for c in s.clusters:
        lhs = c.lam**2 * area
        rhs = eigenvalue_bound_rhs(c.mult, g)
        margin = lhs - rhs
        rows.append(BoundRow(c.lam, c.mult, lhs, rhs, margin, bool(margin >= -slack * max(1.0, rhs))))
    return rows


@dataclass(frozen=True)
class HolomorphicDescriptor:
    """Quaternionic holomorphic line bundle attached to a Dirac eigenvalue."""

    degree: int
    genus: int
    willmore: float
    h0: int
    lam: float

    @property
    def complex_holomorphic(self) -> bool:
        return self.willmore == 0.0


def dirac_to_holomorphic(lam: float, area: float, genus: int, mult: int) -> HolomorphicDescriptor:
    """Spin bundle of degree ``g - 1`` with ``W = lambda^2 area`` and ``h0 = m``."""
    return HolomorphicDescriptor(genus - 1, genus, float(lam) ** 2 * area, int(mult), float(lam))
