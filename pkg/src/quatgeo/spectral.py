"""Harmonic tori in the 2-sphere: the associated family of flat connections and its spectral data.

A harmonic map ``N: T^2 -> S^2`` splits the trivial connection on ``H`` as
``A = 1/4 (N dN + *dN)``, ``Q = 1/4 (N dN - *dN)``.  The family

    omega_mu = 1/2 (mu + 1/mu - 2) A + i/2 (1/mu - mu) *A

(``i`` acting on the right, i.e. as a scalar in the complex representation)
defines connections ``d + omega_mu`` that are flat for all ``mu`` exactly when
``N`` is harmonic.  Their holonomies along the two lattice generators commute,
and the spectral curve branches at the odd-order zeros of the discriminant of a
generic combination ``H_1 + c H_2``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.integrate import solve_ivp
from scipy.special import ellipe, ellipj, ellipk

from .domain import TorusDomain
from .immersion import ConnectionSplit, SphereMap, connection_split
from .quatlinalg import complex_rep, qmul

__all__ = [
    "HarmonicTorusData",
    "ConnectionFamilySample",
    "HolonomyScan",
    "BranchPoint",
    "SpectralSummary",
    "CMCReconstruction",
    "Verdict",
    "NonUnitError",
    "HolonomyIntegrationError",
    "BranchPointError",
    "equator_geodesic",
    "delaunay",
    "harmonic_from_samples",
    "harmonic_preset",
    "build_aq",
    "aq_residuals",
    "connection_family",
    "holonomy",
    "holonomy_scan",
    "branch_detect",
    "harmonic_energy",
    "energy_area_bound",
    "integrate_cmc",
    "small_energy_verdict",
    "s3_willmore_convert",
    "delaunay_energy",
    "delaunay_axis_period",
]

log = logging.getLogger(__name__)

E_SYM = np.array([[0, -1], [1, 0]], dtype=complex)
GOLDEN = 0.5 * (math.sqrt(5.0) - 1.0)
# generic real weight for H_1 + c H_2; real keeps the mu -> 1/conj(mu) symmetry
MIX = 1.0 / math.pi
# off-centre split so that refined cell edges avoid symmetry circles and lines
SPLIT = 0.5 - 0.1 * GOLDEN


class NonUnitError(ValueError):
    pass


class HolonomyIntegrationError(RuntimeError):
    pass


class BranchPointError(ValueError):
    """The form ``A`` vanishes somewhere, so ``2 *A`` does not integrate to an immersion."""


# ---------------------------------------------------------------------------
# data


def _quat(v):
    v = np.asarray(v, dtype=float)
    return np.concatenate([np.zeros(v.shape[:-1] + (1,)), v], axis=-1)


@dataclass
class HarmonicTorusData:
    """A sphere-valued map on a flat torus with evaluation at arbitrary points.

    ``sampler(x, y)`` returns ``(N, N_x, N_y)`` as imaginary quaternion arrays.
    The map must be doubly periodic with respect to ``domain.generators``.
    """

    domain: TorusDomain
    sampler: Callable
    name: str = "custom"
    params: dict = field(default_factory=dict)

    def sphere_map(self) -> SphereMap:
        x, y = self.domain.coords
        n, nx, ny = self.sampler(x, y)
        return SphereMap(self.domain, n[..., 1:], nx[..., 1:], ny[..., 1:])

    def forms_at(self, x, y):
        """``A(d/dx)`` and ``A(d/dy)`` at arbitrary points."""
        n, nx, ny = self.sampler(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
        return 0.25 * (qmul(n, nx) + ny), 0.25 * (qmul(n, ny) - nx)


def equator_geodesic(length: float = 2.0 * np.pi, nx: int = 32, ny: int = 32) -> HarmonicTorusData:
    """``N = cos x i + sin x j`` on the rectangular torus ``2 pi x length``."""
    dom = TorusDomain(1j * length / (2.0 * np.pi), nx, ny, 2.0 * np.pi)

    def sampler(x, y):
        x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
        z = np.zeros_like(x)
        n = np.stack([z, np.cos(x), np.sin(x), z], -1)
        nxv = np.stack([z, -np.sin(x), np.cos(x), z], -1)
        return n, nxv, np.zeros_like(n)

    return HarmonicTorusData(dom, sampler, "equator-geodesic", {"length": length})


def delaunay(a: float = 0.4, b: float = 0.6, nx: int = 32, ny: int = 48) -> HarmonicTorusData:
    """Gauss map of the unduloid with neck and bulge radii in the ratio ``a : b``.

    ``N = dn(y) (cos x i + sin x j) + k sn(y) k`` with ``k = (b - a)/(a + b)``
    is harmonic on the torus ``2 pi x 4 K(k)``.  The CMC surface integrated
    from it has ``H = 1``, neck ``a/(a + b)`` and bulge ``b/(a + b)``.
    """
    if not (0 < a <= b):
        raise ValueError("Delaunay radii need 0 < a <= b")
    k = (b - a) / (a + b)
    m = k * k
    length = 4.0 * float(ellipk(m))
    dom = TorusDomain(1j * length / (2.0 * np.pi), nx, ny, 2.0 * np.pi)

    def sampler(x, y):
        x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
        sn, cn, dn, _ = ellipj(y, m)
        z = np.zeros_like(x)
        c, s = np.cos(x), np.sin(x)
        n = np.stack([z, dn * c, dn * s, k * sn], -1)
        nxv = np.stack([z, -dn * s, dn * c, z], -1)
        ddn = -m * sn * cn
        nyv = np.stack([z, ddn * c, ddn * s, k * cn * dn], -1)
        return n, nxv, nyv

    return HarmonicTorusData(dom, sampler, "delaunay", {"a": a, "b": b, "k": k})


def delaunay_energy(k: float) -> float:
    """Closed form ``4 pi (2 E(k) - (1 - k^2) K(k))`` of the unduloid Gauss map energy."""
    m = k * k
    return float(4.0 * np.pi * (2.0 * ellipe(m) - (1.0 - m) * ellipk(m)))


def delaunay_axis_period(k: float) -> np.ndarray:
    """Translation period ``-2 E(k) k`` of the CMC unduloid along its axis (quaternion)."""
    return np.array([0.0, 0.0, 0.0, -2.0 * float(ellipe(k * k))])


class _FourierField:
    """Trigonometric interpolant of periodic grid samples on a flat torus."""

    def __init__(self, domain: TorusDomain, values):
        self.domain = domain
        v = np.asarray(values, dtype=float)
        nx, ny = domain.nx, domain.ny
        c = np.fft.fft2(v, axes=(0, 1)) / (nx * ny)
        self.m = np.fft.fftfreq(nx, d=1.0 / nx)
        self.n = np.fft.fftfreq(ny, d=1.0 / ny)
        # Nyquist terms are kept so the nodes are reproduced; eval takes the real part
        self.c = c

    def _st(self, x, y):
        d = self.domain
        t = y / (d.scale * d.tau.imag)
        s = x / d.scale - d.tau.real * t
        return s, t

    def eval(self, x, y, deriv=None):
        x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
        s, t = self._st(x.ravel(), y.ravel())
        es = np.exp(2j * np.pi * s[:, None] * self.m[None, :])
        et = np.exp(2j * np.pi * t[:, None] * self.n[None, :])
        c = self.c
        d = self.domain
        if deriv is not None:
            ks = 2j * np.pi * self.m[:, None] / d.scale
            kt = 2j * np.pi * self.n[None, :] / d.scale
            if deriv == "x":
                fac = ks
            else:
                fac = (kt - d.tau.real * ks) / d.tau.imag
            c = c * fac[..., None]
        out = np.einsum("pm,mnc,pn->pc", es, c, et).real
        return out.reshape(x.shape + (c.shape[-1],))


def harmonic_from_samples(domain: TorusDomain, samples, name: str = "samples") -> HarmonicTorusData:
    """Ingest ``(nx, ny, 3)`` samples of a sphere-valued map; evaluation by Fourier interpolation."""
    v = np.asarray(samples, dtype=float)
    if v.shape != domain.grid_shape + (3,):
        raise ValueError(f"expected samples of shape {domain.grid_shape + (3,)}, got {v.shape}")
    res = float(np.max(np.abs(np.linalg.norm(v, axis=-1) - 1.0)))
    if res > 1e-6:
        raise NonUnitError(f"samples are not unit vectors (max deviation {res:.3g})")
    fld = _FourierField(domain, v)

    def sampler(x, y):
        return _quat(fld.eval(x, y)), _quat(fld.eval(x, y, "x")), _quat(fld.eval(x, y, "y"))

    return HarmonicTorusData(domain, sampler, name, {})


def _parse_args(text: str):
    inner = text[text.index("(") + 1: text.rindex(")")]
    return [float(p) for p in inner.split(",") if p.strip()]


def harmonic_preset(name: str, nx: int | None = None, ny: int | None = None) -> HarmonicTorusData:
    """``"equator-geodesic"``, ``"equator-geodesic(L)"`` or ``"delaunay(a,b)"``."""
    key = name.strip().lower()
    kw = {k: v for k, v in (("nx", nx), ("ny", ny)) if v is not None}
    if key.startswith("equator-geodesic"):
        args = _parse_args(key) if "(" in key else []
        return equator_geodesic(*args, **kw)
    if key.startswith("delaunay"):
        args = _parse_args(key) if "(" in key else []
        if len(args) not in (0, 2):
            raise ValueError("delaunay preset takes two radii: delaunay(a,b)")
        return delaunay(*args, **kw)
    raise ValueError(f"unknown harmonic preset {name!r}")


# ---------------------------------------------------------------------------
# A and Q


def build_aq(data: HarmonicTorusData | SphereMap, unit_tol: float = 1e-8) -> ConnectionSplit:
    m = data.sphere_map() if isinstance(data, HarmonicTorusData) else data
    res = m.unit_residual()
    if res > unit_tol:
        raise NonUnitError(f"N is not unit length (max deviation {res:.3g})")
    return connection_split(m)


def aq_residuals(split: ConnectionSplit) -> dict:
    """Pointwise type conditions and the reconstruction ``2 *(A + Q) = N *dN``."""
    n = split.S
    ax, ay = split.A
    qx, qy = split.Q
    sa = (ay, -ax)
    sq = (qy, -qx)
    type_a = max(np.max(np.abs(sa[i] - qmul(n, split.A[i]))) for i in range(2))
    type_q = max(np.max(np.abs(sq[i] + qmul(n, split.Q[i]))) for i in range(2))
    aq = np.max(np.abs(qmul(ax, qy) - qmul(ay, qx)))
    qa = np.max(np.abs(qmul(qx, ay) - qmul(qy, ax)))
    # N dN recovered from A + Q: (A + Q) = 1/2 N dN
    ndn = (2.0 * (ax + qx), 2.0 * (ay + qy))
    dn = (-qmul(n, ndn[0]), -qmul(n, ndn[1]))
    sdn = (dn[1], -dn[0])
    lhs = (2.0 * (sa[0] + sq[0]), 2.0 * (sa[1] + sq[1]))
    recon = max(np.max(np.abs(lhs[i] - qmul(n, sdn[i]))) for i in range(2))
    return {"type_A": float(type_a), "type_Q": float(type_q), "A_wedge_Q": float(aq),
            "Q_wedge_A": float(qa), "reconstruction": float(recon)}


# ---------------------------------------------------------------------------
# the mu-family


def _coeffs(mu):
    mu = np.asarray(mu, dtype=complex)
    if np.any(mu == 0):
        raise ValueError("mu must be nonzero")
    return 0.5 * (mu + 1.0 / mu - 2.0), 0.5j * (1.0 / mu - mu)


@dataclass
class ConnectionFamilySample:
    """``omega_mu`` on the grid as ``(nx, ny, 2, 2)`` arrays for ``d/dx`` and ``d/dy``."""

    mu: complex
    form_x: np.ndarray
    form_y: np.ndarray
    domain: TorusDomain

    def curvature_residual(self, method: str = "spectral") -> float:
        """``max |d omega + omega ^ omega|`` on the grid."""
        wx, wy = self.form_x, self.form_y
        _, dywx = self.domain.gradient(wx, method)
        dxwy, _ = self.domain.gradient(wy, method)
        f = dxwy - dywx + wx @ wy - wy @ wx
        return float(np.max(np.abs(f)))

    def symmetry_residual(self) -> float:
        """Distance to commuting with the quaternionic structure (zero on ``|mu| = 1``)."""
        e = E_SYM
        return float(max(np.max(np.abs(e @ np.conj(w) @ e.T - w)) for w in (self.form_x, self.form_y)))


def connection_family(data: HarmonicTorusData | ConnectionSplit, mu: complex,
                      domain: TorusDomain | None = None) -> ConnectionFamilySample:
    c1, c2 = _coeffs(mu)
    if isinstance(data, HarmonicTorusData):
        split, domain = build_aq(data), data.domain
    else:
        split = data
    ax, ay = split.A
    ra, rb = complex_rep(ax), complex_rep(ay)
    # *A = (A_y, -A_x)
    wx = c1 * ra + c2 * rb
    wy = c1 * rb - c2 * ra
    return ConnectionFamilySample(complex(mu), wx, wy, domain)


def holonomy(data: HarmonicTorusData, mu, generator: int = 1, rtol: float = 1e-10, atol: float = 1e-12,
             renormalize: bool = True) -> np.ndarray:
    """Parallel transport of ``d + omega_mu`` once around a lattice generator from the origin.

    Solves ``dPsi/dt = -omega_mu(gamma') Psi`` with an adaptive 8th-order
    Runge-Kutta scheme, vectorised over ``mu``.  Returns ``(..., 2, 2)``.
    """
    mus = np.asarray(mu, dtype=complex)
    shape = mus.shape
    mus = np.atleast_1d(mus)
    mus = mus.ravel()
    c1, c2 = _coeffs(mus)
    if generator not in (1, 2):
        raise ValueError("generator is 1 or 2")
    w = data.domain.generators[generator - 1]
    vx, vy = w.real, w.imag

    def rhs(t, y):
        ax, ay = data.forms_at(t * vx, t * vy)
        a = vx * ax + vy * ay
        sa = vx * ay - vy * ax
        ra, rs = complex_rep(a), complex_rep(sa)
        om = c1[:, None, None] * ra + c2[:, None, None] * rs
        out = -(om @ y.reshape(-1, 2, 2)).ravel()
        # the step controller loops forever on NaN, so stop here
        if not np.all(np.isfinite(out)):
            raise HolonomyIntegrationError(f"non-finite connection form at t={t:.6g} on generator {generator}")
        return out

    y0 = np.tile(np.eye(2, dtype=complex), (len(mus), 1, 1)).ravel()
    # at mu = 1 the integrand vanishes and the error norm is 0/0; non-finite forms are caught in rhs
    with np.errstate(invalid="ignore"):
        sol = solve_ivp(rhs, (0.0, 1.0), y0, method="DOP853", rtol=rtol, atol=atol)
    if not sol.success:
        raise HolonomyIntegrationError(
            f"monodromy integration failed for generator {generator}: {sol.message} "
            f"(nfev={sol.nfev}, t={sol.t[-1]:.6g})"
        )
    h = sol.y[:, -1].reshape(-1, 2, 2)
    det = np.linalg.det(h)
    corr = float(np.max(np.abs(det - 1.0)))
    if renormalize and corr > 0:
        h = h / np.sqrt(det)[:, None, None]
        log.debug("holonomy det renormalised, max |det - 1| = %.3g (generator %d)", corr, generator)
    return h.reshape(shape + (2, 2))


# ---------------------------------------------------------------------------
# scans and branch points


def _sym(h):
    return E_SYM @ np.conj(h) @ E_SYM.T


@dataclass
class HolonomyScan:
    """Holonomies on a polar grid ``mu = exp(s + i theta)`` of the annulus."""

    s: np.ndarray
    theta: np.ndarray
    mu: np.ndarray
    H1: np.ndarray
    H2: np.ndarray
    unit_mu: np.ndarray
    unit_H1: np.ndarray
    unit_H2: np.ndarray

    @property
    def t1(self):
        return np.trace(self.H1, axis1=-2, axis2=-1)

    @property
    def t2(self):
        return np.trace(self.H2, axis1=-2, axis2=-1)

    def invariants(self) -> dict:
        hs = (self.H1, self.H2)
        det = max(float(np.max(np.abs(np.linalg.det(h) - 1.0))) for h in hs)
        norm = np.maximum(1.0, np.linalg.norm(self.H1, axis=(-2, -1)) * np.linalg.norm(self.H2, axis=(-2, -1)))
        comm = float(np.max(np.linalg.norm(self.H1 @ self.H2 - self.H2 @ self.H1, axis=(-2, -1)) / norm))
        # the s-grid is symmetric, so 1/conj(mu) sits at the reflected row
        sym = 0.0
        for h in hs:
            refl = h[::-1]
            scale = np.maximum(1.0, np.linalg.norm(h, axis=(-2, -1)))
            sym = max(sym, float(np.max(np.linalg.norm(refl - _sym(h), axis=(-2, -1)) / scale)))
        eye = np.eye(2)
        uni = max(float(np.max(np.abs(h @ np.conj(np.swapaxes(h, -1, -2)) - eye)))
                  for h in (self.unit_H1, self.unit_H2))
        return {"det": det, "commutator": comm, "symmetry": sym, "unitarity": uni,
                "cauchy_riemann": self.cauchy_riemann_residual()}

    def cauchy_riemann_residual(self) -> float:
        """Centred-difference residual of ``d t / d s + i d t / d theta`` relative to ``|t|``."""
        out = 0.0
        ds = self.s[1] - self.s[0]
        dth = self.theta[1] - self.theta[0]
        for t in (self.t1, self.t2):
            dts = (t[2:, 1:-1] - t[:-2, 1:-1]) / (2 * ds)
            dtt = (t[1:-1, 2:] - t[1:-1, :-2]) / (2 * dth)
            scale = np.max(np.abs(t))
            out = max(out, float(np.max(np.abs(dts + 1j * dtt)) / scale))
        return out


def _symmetric_s(annulus, grid):
    lo, hi = annulus
    if not (0 < lo < 1 < hi):
        raise ValueError("annulus must satisfy 0 < r_in < 1 < r_out")
    if abs(lo * hi - 1.0) > 1e-12:
        raise ValueError("annulus must be symmetric under mu -> 1/conj(mu): r_in * r_out = 1")
    return np.linspace(math.log(lo), math.log(hi), grid)


def holonomy_scan(data: HarmonicTorusData, annulus=(0.25, 4.0), grid: int = 41, rtol: float = 1e-10) -> HolonomyScan:
    s = _symmetric_s(annulus, grid)
    theta = 2.0 * np.pi * (np.arange(grid) + GOLDEN) / grid
    mu = np.exp(s[:, None] + 1j * theta[None, :])
    umu = np.exp(1j * theta)
    allmu = np.concatenate([mu.ravel(), umu])
    h1 = holonomy(data, allmu, 1, rtol)
    h2 = holonomy(data, allmu, 2, rtol)
    n = mu.size
    return HolonomyScan(s, theta, mu, h1[:n].reshape(mu.shape + (2, 2)), h2[:n].reshape(mu.shape + (2, 2)),
                        umu, h1[n:], h2[n:])


@dataclass(frozen=True)
class BranchPoint:
    mu: complex
    order: int
    sign1: int
    sign2: int
    disc1: float
    disc2: float
    scalar: bool
    flags: tuple = ()


@dataclass
class SpectralSummary:
    branch_points: list
    genus: int
    genus_interval: tuple
    pair_residual: float
    zero_count: int
    flags: list
    scan: HolonomyScan | None = None
    invariants: dict = field(default_factory=dict)
    annulus: tuple = (0.25, 4.0)

    def to_dict(self) -> dict:
        return {
            "branch_points": [[b.mu.real, b.mu.imag] for b in self.branch_points],
            "branch_orders": [b.order for b in self.branch_points],
            "branch_signs": [[b.sign1, b.sign2] for b in self.branch_points],
            "genus": self.genus,
            "genus_interval": list(self.genus_interval),
            "pair_residual": self.pair_residual,
            "zero_count": self.zero_count,
            "flags": list(self.flags),
            "invariants": dict(self.invariants),
        }


class _Disc:
    """Cached discriminant of ``H_1 + c H_2`` on ``mu = exp(z)``, ``z = s + i theta``."""

    def __init__(self, data, c, rtol):
        self.data, self.c, self.rtol = data, c, rtol
        self.cache: dict = {}
        self.evals = 0

    @staticmethod
    def _key(z):
        return (round(z.real, 13), round(z.imag, 13))

    def ensure(self, zs):
        new = []
        seen = set()
        for z in zs:
            k = self._key(z)
            if k not in self.cache and k not in seen:
                seen.add(k)
                new.append(z)
        if new:
            vals = self.evaluate(np.exp(np.array(new)))
            for z, v in zip(new, vals):
                self.cache[self._key(z)] = v
            self.evals += len(new)

    def __call__(self, z):
        return self.cache[self._key(z)]

    def evaluate(self, mus):
        h1 = holonomy(self.data, mus, 1, self.rtol)
        h2 = holonomy(self.data, mus, 2, self.rtol)
        m = h1 + self.c * h2
        tr = np.trace(m, axis1=-2, axis2=-1)
        return tr**2 - 4.0 * np.linalg.det(m)


def _edge_windings(disc: _Disc, edges, max_depth: int = 16, max_step: float = np.pi / 4, chord: float = 0.5):
    """Phase increment of the discriminant along straight edges ``(z0, z1)``.

    A segment is refined until its phase step is below ``max_step`` and the
    chord ``|v1 - v0|`` is below ``chord * min(|v0|, |v1|)``.  The phase test
    alone aliases near a zero close to the edge, where a full turn can hide
    between two samples of similar phase.
    """
    params = [np.array([0.0, 1.0]) for _ in edges]
    flags = [False] * len(edges)
    for _ in range(max_depth + 1):
        disc.ensure([z0 + t * (z1 - z0) for (z0, z1), ts in zip(edges, params) for t in ts])
        todo = False
        for i, ((z0, z1), ts) in enumerate(zip(edges, params)):
            v = np.array([disc(z0 + t * (z1 - z0)) for t in ts])
            dph = np.angle(v[1:] / v[:-1])
            small = np.minimum(np.abs(v[1:]), np.abs(v[:-1]))
            bad = (np.abs(dph) > max_step) | (np.abs(v[1:] - v[:-1]) > chord * small)
            if np.any(bad):
                if len(ts) > 2**max_depth:
                    flags[i] = True
                    continue
                mids = 0.5 * (ts[:-1] + ts[1:])[bad]
                params[i] = np.sort(np.concatenate([ts, mids]))
                todo = True
        if not todo:
            break
    disc.ensure([z0 + t * (z1 - z0) for (z0, z1), ts in zip(edges, params) for t in ts])
    out = []
    for (z0, z1), ts, fl in zip(edges, params, flags):
        v = np.array([disc(z0 + t * (z1 - z0)) for t in ts])
        out.append((float(np.sum(np.angle(v[1:] / v[:-1]))), fl))
    return out


def _cell_edges(cell):
    s0, s1, t0, t1 = cell
    a, b, c, d = complex(s0, t0), complex(s1, t0), complex(s1, t1), complex(s0, t1)
    return [(a, b), (b, c), (c, d), (d, a)]


def _cell_windings(disc, cells):
    edges = [e for c in cells for e in _cell_edges(c)]
    res = _edge_windings(disc, edges)
    out = []
    for i in range(len(cells)):
        ph = sum(r[0] for r in res[4 * i: 4 * i + 4]) / (2 * np.pi)
        fl = any(r[1] for r in res[4 * i: 4 * i + 4])
        w = int(round(ph))
        out.append((w, fl or abs(ph - w) > 0.1))
    return out


def _polish(disc: _Disc, z, cell, steps: int = 30):
    """Newton iteration for a simple zero in ``z = log mu``; stays inside the cell."""
    s0, s1, t0, t1 = cell
    for _ in range(steps):
        h = 1e-6
        v = disc.evaluate(np.exp(np.array([z, z + h, z - h])))
        d = (v[1] - v[2]) / (2 * h)
        if d == 0:
            break
        step = v[0] / d
        zn = z - step
        zn = complex(min(max(zn.real, s0), s1), min(max(zn.imag, t0), t1))
        if abs(zn - z) < 1e-13:
            z = zn
            break
        z = zn
    return z


def branch_detect(data: HarmonicTorusData, annulus=(0.25, 4.0), grid: int = 41, rtol: float = 1e-10,
                  c: float = MIX, min_cell: float = 1e-5, cluster_tol: float = 1e-3,
                  scan: HolonomyScan | None = None) -> SpectralSummary:
    """Branch points of the spectral curve inside the annulus, by cellwise argument principle.

    Zeros of ``Delta = tr(M)^2 - 4 det(M)``, ``M = H_1 + c H_2``, are counted
    in each polar cell with adaptive edge refinement.  Cells with more than one
    zero are subdivided down to ``min_cell``; a zero cluster of odd total order
    is a branch point.  Refinement also stops once ``|Delta|`` at every corner
    of a cell is below the integration noise floor.  Subdividing every nonzero cell keeps a multiple zero
    that straddles a cell edge from being counted as two simple ones; nearby
    terminal cells are merged within ``cluster_tol``.  Rings adjacent to ``|mu| = 1`` are merged so that no
    cell boundary lies on the unit circle.
    """
    if scan is None:
        scan = holonomy_scan(data, annulus, grid, rtol)
    disc = _Disc(data, c, rtol)
    s_nodes = [v for v in scan.s if abs(v) > 1e-12]
    th_nodes = list(scan.theta) + [scan.theta[0] + 2 * np.pi]
    # seed the cache with the scan
    for i, sv in enumerate(scan.s):
        for j, tv in enumerate(scan.theta):
            m = scan.H1[i, j] + c * scan.H2[i, j]
            disc.cache[disc._key(complex(sv, tv))] = np.trace(m) ** 2 - 4 * np.linalg.det(m)
    last = scan.theta[0] + 2 * np.pi
    for i, sv in enumerate(scan.s):
        disc.cache[disc._key(complex(sv, last))] = disc(complex(sv, scan.theta[0]))
    cells = [(s_nodes[i], s_nodes[i + 1], th_nodes[j], th_nodes[j + 1])
             for i in range(len(s_nodes) - 1) for j in range(len(th_nodes) - 1)]
    flags = []
    # boundary windings give the total zero count in the annulus
    lo, hi = s_nodes[0], s_nodes[-1]
    bnd = _edge_windings(disc, [(complex(lo, th_nodes[j]), complex(lo, th_nodes[j + 1])) for j in range(grid)]
                         + [(complex(hi, th_nodes[j]), complex(hi, th_nodes[j + 1])) for j in range(grid)])
    w_in = sum(b[0] for b in bnd[:grid]) / (2 * np.pi)
    w_out = sum(b[0] for b in bnd[grid:]) / (2 * np.pi)
    zero_count = int(round(w_out - w_in))
    # below this |Delta| the integrated holonomies no longer resolve the phase
    floor = 1e4 * rtol * float(np.median(np.abs([disc(complex(a, b)) for a in scan.s for b in scan.theta])))
    terminal = []  # (cell, winding, flagged)
    active = cells
    while active:
        ws = _cell_windings(disc, active)
        nxt = []
        for cell, (w, fl) in zip(active, ws):
            if w == 0 and not fl:
                continue
            if w < 0:
                flags.append(f"negative winding {w} in cell {cell}")
                continue
            size = max(cell[1] - cell[0], cell[3] - cell[2])
            corner = max(abs(disc(e[0])) for e in _cell_edges(cell))
            if size < min_cell or corner < floor:
                terminal.append((cell, w, fl))
                continue
            s0, s1, t0, t1 = cell
            sm, tm = s0 + SPLIT * (s1 - s0), t0 + SPLIT * (t1 - t0)
            nxt += [(s0, sm, t0, tm), (sm, s1, t0, tm), (s0, sm, tm, t1), (sm, s1, tm, t1)]
        active = nxt
    found = sum(w for _, w, _ in terminal)
    if found != zero_count:
        flags.append(f"cellwise zero count {found} differs from boundary count {zero_count}")
    # polish simple zeros, then merge zeros closer than cluster_tol into clusters
    zeros = []
    for cell, w, fl in terminal:
        z0 = complex(cell[0] + 0.5 * (cell[1] - cell[0]), cell[2] + 0.5 * (cell[3] - cell[2]))
        zeros.append([_polish(disc, z0, cell) if (w == 1 and not fl) else z0, w, fl])
    clusters = []
    for z, w, fl in sorted(zeros, key=lambda t: (t[0].real, t[0].imag)):
        for cl in clusters:
            if abs(cl[0] - z) < cluster_tol:
                cl[1] += w
                cl[2] = cl[2] or fl
                cl[3] = True
                break
        else:
            clusters.append([z, w, fl, False])
    bps = []
    unresolved = 0
    ds = s_nodes[1] - s_nodes[0]
    for z, w, fl, merged in clusters:
        if w % 2 == 0:
            continue
        mu = complex(np.exp(z))
        h1 = holonomy(data, mu, 1, rtol)
        h2 = holonomy(data, mu, 2, rtol)
        t1, t2 = np.trace(h1), np.trace(h2)
        d1, d2 = abs(t1**2 - 4), abs(t2**2 - 4)
        eye = np.eye(2)
        scalar = bool(min(np.max(np.abs(h1 - eye)), np.max(np.abs(h1 + eye))) < 1e-6
                      and min(np.max(np.abs(h2 - eye)), np.max(np.abs(h2 + eye))) < 1e-6)
        bflags = []
        if fl:
            bflags.append("unresolved winding")
            unresolved += 1
        if merged:
            bflags.append("merged cluster")
        if abs(abs(mu) - 1.0) < 1e-6:
            bflags.append("on unit circle")
        if abs(z.real - lo) < 2 * ds or abs(z.real - hi) < 2 * ds:
            bflags.append("near annulus boundary")
        if scalar:
            bflags.append("both holonomies scalar")
        bps.append(BranchPoint(mu, w, int(np.sign(t1.real)) or 1, int(np.sign(t2.real)) or 1, float(d1), float(d2),
                               scalar, tuple(bflags)))
    # pair under mu -> 1/conj(mu)
    pair_res = 0.0
    used = set()
    pairs = 0
    for i, b in enumerate(bps):
        if i in used:
            continue
        target = 1.0 / np.conj(b.mu)
        cand = [(abs(o.mu - target), j) for j, o in enumerate(bps) if j != i and j not in used]
        if not cand:
            flags.append(f"branch point {b.mu:.6g} has no symmetric partner")
            continue
        dist, j = min(cand)
        pair_res = max(pair_res, dist)
        used.update((i, j))
        pairs += 1
    if len(bps) % 2:
        flags.append("odd number of branch points")
    genus = pairs
    interval = (genus, genus + unresolved)
    inv = scan.invariants()
    return SpectralSummary(bps, genus, interval, float(pair_res), zero_count, flags, scan, inv, tuple(annulus))


# ---------------------------------------------------------------------------
# energies, bounds and CMC surfaces


def harmonic_energy(data: HarmonicTorusData | SphereMap) -> float:
    """``E = 1/2 int |dN|^2`` by grid quadrature."""
    m = data.sphere_map() if isinstance(data, HarmonicTorusData) else data
    dens = 0.5 * (np.sum(m.Nx**2, -1) + np.sum(m.Ny**2, -1))
    return float(np.sum(dens * m.domain.weights))


def energy_area_bound(g: int, kind: str = "harmonic") -> float:
    """Lower bound on the energy (harmonic tori) or area (CMC tori) in terms of spectral genus."""
    if g < 0:
        raise ValueError("spectral genus must be non-negative")
    if kind == "harmonic":
        return np.pi / 2 * ((g + 1) ** 2 if g % 2 else (g + 1) ** 2 - 1)
    if kind == "cmc":
        return np.pi / 4 * ((g + 2) ** 2 if g % 2 == 0 else (g + 2) ** 2 - 1)
    raise ValueError(f"kind must be 'harmonic' or 'cmc', got {kind!r}")


def s3_willmore_convert(h: float, area: float) -> float:
    """Willmore energy ``(H^2 + 1) area`` of a CMC torus in the 3-sphere."""
    if area <= 0:
        raise ValueError("area must be positive")
    return (h * h + 1.0) * area


@dataclass(frozen=True)
class Verdict:
    triggered: bool
    consistent: bool
    message: str


def small_energy_verdict(energy: float, summary: SpectralSummary | int) -> Verdict:
    """Harmonic tori with ``E < 4 pi`` have spectral genus zero."""
    genus = summary.genus if isinstance(summary, SpectralSummary) else int(summary)
    if energy >= 4.0 * np.pi:
        return Verdict(False, True, f"E = {energy:.6g} >= 4 pi; no constraint")
    if genus == 0:
        return Verdict(True, True, f"E = {energy:.6g} < 4 pi and genus 0: map factors through a homomorphism")
    return Verdict(True, False, f"contradiction: E = {energy:.6g} < 4 pi but spectral genus {genus}")


@dataclass
class CMCReconstruction:
    f: np.ndarray
    periods: np.ndarray
    conformality_residual: float
    cmc_residual: float
    parallel_cmc_residual: float
    closedness_residual: float

    @property
    def residuals(self) -> dict:
        return {"conformality": self.conformality_residual, "cmc": self.cmc_residual,
                "parallel_cmc": self.parallel_cmc_residual, "closedness": self.closedness_residual}


def _cmc_residual(dom, fx, fy, method):
    fxx, _ = dom.gradient(fx, method)
    _, fyy = dom.gradient(fy, method)
    res = -(fxx + fyy) + 2.0 * np.cross(fx, fy)
    return float(np.max(np.abs(res)))


def integrate_cmc(data: HarmonicTorusData, method: str = "spectral", zero_tol: float = 1e-8) -> CMCReconstruction:
    """Integrate ``df = 2 *A`` to the CMC surface with Gauss map ``N``.

    Residuals: conformality ``|*df - N df|``, the CMC equation
    ``-Lap f + 2 f_x x f_y`` (also for the parallel surface ``f + N``) and
    closedness of ``2 *A``.  Periods are returned per generator as quaternions.
    """
    split = build_aq(data)
    dom = data.domain
    ax, ay = split.A
    amag = np.sum(ax**2 + ay**2, -1)
    if np.min(amag) < zero_tol * np.max(amag):
        idx = np.unravel_index(np.argmin(amag), amag.shape)
        raise BranchPointError(f"A vanishes near grid point {idx}; 2 *A is not an immersion there")
    fx, fy = 2.0 * ay, -2.0 * ax
    _, dyfx = dom.gradient(fx, method)
    dxfy, _ = dom.gradient(fy, method)
    closed = float(np.max(np.abs(dxfy - dyfx)))
    n = split.S
    conf = max(float(np.max(np.abs(fy - qmul(n, fx)))), float(np.max(np.abs(-fx - qmul(n, fy)))))
    vx, vy = fx[..., 1:], fy[..., 1:]
    cmc = _cmc_residual(dom, vx, vy, method)
    m = data.sphere_map()
    par = _cmc_residual(dom, vx + m.Nx, vy + m.Ny, method)
    periods = []
    for w in dom.generators:
        periods.append(np.mean(w.real * fx + w.imag * fy, axis=(0, 1)))
    f = _integrate_closed(dom, fx, fy)
    return CMCReconstruction(f, np.array(periods), conf, cmc, par, closed)


def _integrate_closed(dom: TorusDomain, fx, fy):
    """Primitive of a closed periodic 1-form: linear part from the means plus a Fourier solve."""
    mx, my = fx.mean(axis=(0, 1)), fy.mean(axis=(0, 1))
    x, y = dom.coords
    lin = x[..., None] * mx + y[..., None] * my
    ms = np.fft.fftfreq(dom.nx, d=1.0 / dom.nx)[:, None]
    ns = np.fft.fftfreq(dom.ny, d=1.0 / dom.ny)[None, :]
    kx = 2 * np.pi * ms / dom.scale
    ky = (2 * np.pi * ns / dom.scale - dom.tau.real * kx) / dom.tau.imag
    kk = kx**2 + ky**2
    kk[0, 0] = 1.0
    gx = np.fft.fft2(fx - mx, axes=(0, 1))
    gy = np.fft.fft2(fy - my, axes=(0, 1))
    ph = -1j * (kx[..., None] * gx + ky[..., None] * gy) / kk[..., None]
    ph[0, 0] = 0
    return lin + np.fft.ifft2(ph, axes=(0, 1)).real
