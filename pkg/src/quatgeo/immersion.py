"""Conformal immersions into R^3 = Im H and their quaternionic invariants.

Vectors of R^3 are identified with imaginary quaternions, so ``N df`` is the
quaternion product ``-<N, df> + N x df``.  Mean curvature is signed so that
the round sphere with outward normal has ``H = 1``; with this sign the Hopf
field is ``Q = 1/2 N (dN - H df)``, the ``Kbar`` part of ``1/2 N dN``.

Two kinds of input are accepted:

* analytic surfaces (:class:`RevolutionSurface` and the presets built on it)
  that return exact first and second derivatives at any point,
* sampled positions on a grid domain (derivatives by the domain) or on an
  icosphere (discrete cotangent curvature).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .domain import IcosphereDomain, LonLatDomain, TorusDomain
from .quatlinalg import from_vector, qmul, to_vector

__all__ = [
    "RevolutionSurface",
    "SphereMap",
    "ImmersionData",
    "ConnectionSplit",
    "SingularCellError",
    "ResolutionError",
    "OpenDomainError",
    "NonConformalWarning",
    "sphere_preset",
    "cylinder_preset",
    "revolution_torus_preset",
    "immersion_preset",
    "derive_shape",
    "derive_shape_mesh",
    "MeshShape",
    "EnergyRelation",
    "gauss_bonnet",
    "revolution_torus_period",
    "dstar_residual",
    "hopf_field",
    "willmore_energy",
    "willmore_energy_hopf",
    "connection_split",
    "harmonic_energy_and_relation",
    "degree_of_normal",
    "normal_map",
]


class SingularCellError(ValueError):
    """``df`` is degenerate at some cells."""

    def __init__(self, cells):
        self.cells = [tuple(int(i) for i in c) for c in cells]
        super().__init__(f"df is degenerate at {len(self.cells)} cell(s): {self.cells[:10]}")


class ResolutionError(ValueError):
    """The signed area of a normal map is too far from an integer multiple of 4 pi."""


class OpenDomainError(ValueError):
    """Closed-surface integrals were requested on data without period closure."""


class NonConformalWarning(UserWarning):
    pass


# ---------------------------------------------------------------------------
# analytic surfaces


@dataclass(frozen=True)
class RevolutionSurface:
    """``f(x, y) = (rho(y) cos x, rho(y) sin x, zeta(y))`` with exact derivatives.

    ``profile(y)`` returns ``(rho, rho', rho'', zeta, zeta', zeta'')``.  The
    coordinates are conformal when ``rho'^2 + zeta'^2 = rho^2``.
    """

    profile: Callable[[np.ndarray], tuple]
    name: str = "revolution"
    scale: float = 1.0

    def jets(self, x, y):
        """Return ``f, f_x, f_y, f_xx, f_xy, f_yy`` as arrays of shape ``x.shape + (3,)``."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        r, r1, r2, z, z1, z2 = (np.broadcast_to(np.asarray(t, dtype=float), np.broadcast(x, y).shape) for t in self.profile(y))
        c, s = np.cos(x), np.sin(x)
        zero = np.zeros_like(r)
        f = np.stack([r * c, r * s, z], -1)
        fx = np.stack([-r * s, r * c, zero], -1)
        fy = np.stack([r1 * c, r1 * s, z1], -1)
        fxx = np.stack([-r * c, -r * s, zero], -1)
        fxy = np.stack([-r1 * s, r1 * c, zero], -1)
        fyy = np.stack([r2 * c, r2 * s, z2], -1)
        k = self.scale
        return f * k, fx * k, fy * k, fxx * k, fxy * k, fyy * k

    def scaled(self, c: float) -> RevolutionSurface:
        return RevolutionSurface(self.profile, self.name, self.scale * c)


def sphere_preset() -> RevolutionSurface:
    """Unit sphere in Mercator coordinates; use with :class:`LonLatDomain`."""

    def profile(y):
        s, t = 1.0 / np.cosh(y), np.tanh(y)
        return s, -s * t, s * t * t - s**3, t, s * s, -2.0 * s * s * t

    return RevolutionSurface(profile, "sphere")


def cylinder_preset(radius: float = 0.5) -> RevolutionSurface:
    """Cylinder ``(r cos x, r sin x, r y)``; one period cell is ``2 pi x L`` for any ``L``."""

    def profile(y):
        y = np.asarray(y, dtype=float)
        z = np.zeros_like(y)
        return radius + z, z, z, radius * y, radius + z, z

    return RevolutionSurface(profile, "cylinder")


def revolution_torus_preset(big_r: float = math.sqrt(2.0), small_r: float = 1.0) -> RevolutionSurface:
    """Torus of revolution in conformal coordinates.

    The meridian angle ``v`` is reparametrised by ``dw = r dv / (R + r cos v)``,
    which makes the chart conformal on ``[0, 2 pi) x [0, 2 pi r / sqrt(R^2 - r^2))``.
    """
    if not big_r > small_r > 0:
        raise ValueError("need R > r > 0")
    root = math.sqrt(big_r**2 - small_r**2)
    c = math.sqrt((big_r - small_r) / (big_r + small_r))

    def profile(y):
        w = np.asarray(y, dtype=float) * root / small_r
        # tan(v/2) = tan(w/2) / c, continued monotonically across branches
        turns = np.floor((w + np.pi) / (2.0 * np.pi))
        wr = w - 2.0 * np.pi * turns
        v = 2.0 * np.arctan2(np.sin(wr / 2.0), c * np.cos(wr / 2.0)) + 2.0 * np.pi * turns
        rho = big_r + small_r * np.cos(v)
        sv, cv = np.sin(v), np.cos(v)
        r1 = -sv * rho
        z1 = rho * cv
        r2 = -rho * (rho * cv / small_r - sv * sv)
        z2 = -rho * sv * (cv + rho / small_r)
        return rho, r1, r2, small_r * sv, z1, z2

    surf = RevolutionSurface(profile, "revolution-torus")
    return surf


def revolution_torus_period(big_r: float = math.sqrt(2.0), small_r: float = 1.0) -> float:
    return 2.0 * math.pi * small_r / math.sqrt(big_r**2 - small_r**2)


def immersion_preset(name: str, params: dict | None = None):
    """Return ``(surface, domain)`` for a named preset.

    ``params`` may carry ``nx``, ``ny`` and the preset's shape parameters.
    """
    params = dict(params or {})
    nx = int(params.pop("nx", 64))
    ny = int(params.pop("ny", 64))
    if name == "sphere":
        return sphere_preset(), LonLatDomain(nx, ny, float(params.pop("ymax", 7.0)))
    if name == "cylinder":
        r = float(params.pop("radius", 0.5))
        length = float(params.pop("length", 2.0 * math.pi))
        return cylinder_preset(r), TorusDomain(1j * length / (2.0 * math.pi), nx, ny, 2.0 * math.pi)
    if name == "revolution-torus":
        big_r = float(params.pop("R", math.sqrt(2.0)))
        small_r = float(params.pop("r", 1.0))
        period = revolution_torus_period(big_r, small_r)
        return revolution_torus_preset(big_r, small_r), TorusDomain(1j * period / (2.0 * math.pi), nx, ny, 2.0 * math.pi)
    raise ValueError(f"unknown immersion preset {name!r}")


# ---------------------------------------------------------------------------
# shape data


def _cross(a, b):
    return np.cross(a, b)


def _dot(a, b):
    return np.sum(a * b, axis=-1)


@dataclass
class ImmersionData:
    """Sampled immersion with derived Gauss map, curvatures and conformal structure.

    ``jstar`` holds the induced complex structure as ``(a, b, c, d)`` with
    ``J d/dx = a d/dx + b d/dy`` and ``J d/dy = c d/dx + d d/dy``.
    """

    domain: object
    f: np.ndarray
    fx: np.ndarray
    fy: np.ndarray
    N: np.ndarray
    Nx: np.ndarray
    Ny: np.ndarray
    H: np.ndarray
    K: np.ndarray
    area_density: np.ndarray
    jstar: tuple
    conformality_residual: float
    closed: bool = True

    @property
    def metric_density(self) -> np.ndarray:
        """``|df|^2`` as an area density."""
        return self.area_density

    def star(self, wx, wy):
        """Hodge star of a 1-form ``(w(d/dx), w(d/dy))`` for the induced conformal structure."""
        a, b, c, d = (t[..., None] for t in self.jstar)
        return a * wx + b * wy, c * wx + d * wy

    @property
    def area(self) -> float:
        return float(np.sum(self.area_density * self.domain.weights))


def _shape_from_jets(domain, f, fx, fy, fxx, fxy, fyy, closed=True):
    c = _cross(fx, fy)
    cn = np.linalg.norm(c, axis=-1)
    scale = np.maximum(np.linalg.norm(fx, axis=-1), np.linalg.norm(fy, axis=-1))
    bad = cn <= 1e-12 * np.maximum(scale**2, 1e-300)
    if np.any(bad):
        raise SingularCellError(np.argwhere(bad))
    n = c / cn[..., None]
    e, fF, g = _dot(fx, fx), _dot(fx, fy), _dot(fy, fy)
    det = e * g - fF**2
    # L = <f_x, N_x> = -<f_xx, N>, etc.
    l_, m_, n_ = -_dot(fxx, n), -_dot(fxy, n), -_dot(fyy, n)
    K = (l_ * n_ - m_**2) / det
    H = (e * n_ - 2.0 * fF * m_ + g * l_) / (2.0 * det)
    # Weingarten: N_x = c1 f_x + c2 f_y with I (c1, c2) = (L, M)
    inv = np.stack([np.stack([g, -fF], -1), np.stack([-fF, e], -1)], -2) / det[..., None, None]
    cx = np.einsum("...ij,...j->...i", inv, np.stack([l_, m_], -1))
    cy = np.einsum("...ij,...j->...i", inv, np.stack([m_, n_], -1))
    Nx = cx[..., :1] * fx + cx[..., 1:] * fy
    Ny = cy[..., :1] * fx + cy[..., 1:] * fy
    # induced complex structure: df(J X) = N x df(X)
    rx = np.einsum("...ij,...j->...i", inv, np.stack([_dot(fx, _cross(n, fx)), _dot(fy, _cross(n, fx))], -1))
    ry = np.einsum("...ij,...j->...i", inv, np.stack([_dot(fx, _cross(n, fy)), _dot(fy, _cross(n, fy))], -1))
    jstar = (rx[..., 0], rx[..., 1], ry[..., 0], ry[..., 1])
    # conformality of the coordinate chart: *df = N df with *(a, b) = (b, -a)
    num = np.linalg.norm(fy - _cross(n, fx), axis=-1) + np.linalg.norm(-fx - _cross(n, fy), axis=-1)
    den = np.linalg.norm(fx, axis=-1) + np.linalg.norm(fy, axis=-1)
    conf = float(np.max(num / den))
    return ImmersionData(domain, f, fx, fy, n, Nx, Ny, H, K, np.sqrt(det), jstar, conf, closed)


def _seam_ratio(values, axis):
    d2 = np.roll(values, -1, axis) - 2 * values + np.roll(values, 1, axis)
    seam = np.take(np.abs(d2), [0, -1], axis=axis).max()
    interior = np.take(np.abs(d2), np.arange(1, values.shape[axis] - 1), axis=axis).max()
    return seam / max(interior, 1e-300)


def derive_shape(domain, surface=None, samples=None, periods=None, method: str = "spectral",
                 conformality_tol: float = 1e-6) -> ImmersionData:
    """Gauss map, curvatures and conformal structure of an immersion on a grid domain.

    Pass either an analytic ``surface`` (anything with ``jets(x, y)``) or
    position ``samples`` of shape ``grid + (3,)``.  Sampled torus data may be
    periodic only up to translations ``periods = (T1, T2)`` along the two
    generators; the linear part is removed before differentiation.
    """
    if isinstance(domain, IcosphereDomain):
        if samples is None:
            samples = domain.vertices
        return derive_shape_mesh(domain, samples)
    if (surface is None) == (samples is None):
        raise ValueError("pass exactly one of surface or samples")
    closed = True
    if surface is not None:
        x, y = domain.coords
        f, fx, fy, fxx, fxy, fyy = surface.jets(x, y)
    else:
        f = np.asarray(samples, dtype=float)
        if f.shape != tuple(domain.grid_shape) + (3,):
            raise ValueError(f"samples must have shape {tuple(domain.grid_shape) + (3,)}, got {f.shape}")
        lin = np.zeros_like(f)
        if isinstance(domain, TorusDomain):
            s = np.arange(domain.nx)[:, None, None] / domain.nx
            t = np.arange(domain.ny)[None, :, None] / domain.ny
            if periods is not None:
                t1, t2 = (np.asarray(p, dtype=float) for p in periods)
                lin = s * t1 + t * t2
            per = f - lin
            if max(_seam_ratio(per, 0), _seam_ratio(per, 1)) > 50.0:
                closed = False
            fx, fy = domain.gradient(per, method)
            if periods is not None:
                # d/dx and d/dy of the linear part
                g1 = t1 / domain.scale
                g2 = (t2 - domain.tau.real * t1) / (domain.scale * domain.tau.imag)
                fx, fy = fx + g1, fy + g2
            fxx, fxy = domain.gradient(fx - (g1 if periods is not None else 0), method)
            _, fyy = domain.gradient(fy - (g2 if periods is not None else 0), method)
        else:
            fx, fy = domain.gradient(f, method)
            fxx, fxy = domain.gradient(fx, method)
            _, fyy = domain.gradient(fy, method)
    data = _shape_from_jets(domain, f, fx, fy, fxx, fxy, fyy, closed)
    if data.conformality_residual > conformality_tol:
        warnings.warn(
            f"coordinates are not conformal (residual {data.conformality_residual:.3g}); "
            "curvature-based quantities carry this error",
            NonConformalWarning,
            stacklevel=2,
        )
    return data


@dataclass
class MeshShape:
    """Vertex-based curvature of a triangulated surface."""

    domain: IcosphereDomain
    f: np.ndarray
    N: np.ndarray
    H: np.ndarray
    K: np.ndarray
    vertex_area: np.ndarray
    face_area: np.ndarray
    trace_free_sq: np.ndarray

    @property
    def area(self) -> float:
        return float(np.sum(self.vertex_area))

    closed = True


def derive_shape_mesh(domain: IcosphereDomain, positions, normals=None) -> MeshShape:
    """Cotangent mean curvature and angle-defect Gauss curvature at the vertices.

    Vertex normals default to area-weighted face normals; pass ``normals``
    when the Gauss map is known (``N = f`` on the round sphere).
    """
    p = np.asarray(positions, dtype=float)
    faces = domain.faces
    nv = len(p)
    tri = p[faces]
    lap = np.zeros((nv, 3))
    angle_sum = np.zeros(nv)
    area = np.zeros(nv)
    fnormal = np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0])
    farea = 0.5 * np.linalg.norm(fnormal, axis=1)
    if np.any(farea <= 1e-15):
        raise SingularCellError(np.argwhere(farea <= 1e-15))
    vnormal = np.zeros((nv, 3))
    angles = np.empty((len(faces), 3))
    cots = np.empty((len(faces), 3))
    for k in range(3):
        i, j, m = faces[:, k], faces[:, (k + 1) % 3], faces[:, (k + 2) % 3]
        u = p[j] - p[i]
        w = p[m] - p[i]
        cosang = _dot(u, w)
        sinang = np.linalg.norm(np.cross(u, w), axis=1)
        angles[:, k] = np.arctan2(sinang, cosang)
        cots[:, k] = cosang / sinang
        np.add.at(angle_sum, i, angles[:, k])
        np.add.at(vnormal, i, fnormal)
        # cotangent of the angle at i weights the opposite edge (j, m)
        e = p[m] - p[j]
        np.add.at(lap, j, 0.5 * cots[:, k, None] * e)
        np.add.at(lap, m, -0.5 * cots[:, k, None] * e)
    # mixed Voronoi areas (Meyer et al.), barycentric split on obtuse faces
    obtuse = angles > np.pi / 2
    for k in range(3):
        i, j, m = faces[:, k], faces[:, (k + 1) % 3], faces[:, (k + 2) % 3]
        lij = _dot(p[j] - p[i], p[j] - p[i])
        lim = _dot(p[m] - p[i], p[m] - p[i])
        vor = (lij * cots[:, (k + 2) % 3] + lim * cots[:, (k + 1) % 3]) / 8.0
        share = np.where(obtuse.any(axis=1), np.where(obtuse[:, k], farea / 2.0, farea / 4.0), vor)
        np.add.at(area, i, share)
    lap /= area[:, None]
    n = vnormal / np.linalg.norm(vnormal, axis=1, keepdims=True)
    if normals is not None:
        n = np.asarray(normals, dtype=float)
        n = n / np.linalg.norm(n, axis=1, keepdims=True)
    H = -0.5 * _dot(lap, n)
    K = (2.0 * np.pi - angle_sum) / area
    # per-face shape operator of the piecewise linear normal field
    e1 = tri[:, 1] - tri[:, 0]
    e1 /= np.linalg.norm(e1, axis=1, keepdims=True)
    fn = fnormal / (2.0 * farea[:, None])
    e2 = np.cross(fn, e1)
    grads = np.empty((len(faces), 3, 3))
    for k in range(3):
        opp = tri[:, (k + 2) % 3] - tri[:, (k + 1) % 3]
        grads[:, k] = np.cross(fn, opp) / (2.0 * farea[:, None])
    nf = n[faces]  # (nf, 3 corners, 3 comps)
    # dN(e_a) = sum_k <grad_k, e_a> N_k
    dn1 = np.einsum("fk,fkc->fc", np.einsum("fkd,fd->fk", grads, e1), nf)
    dn2 = np.einsum("fk,fkc->fc", np.einsum("fkd,fd->fk", grads, e2), nf)
    s11, s12, s21, s22 = _dot(dn1, e1), _dot(dn1, e2), _dot(dn2, e1), _dot(dn2, e2)
    trace_free_sq = 0.25 * (s11 - s22) ** 2 + 0.25 * (s12 + s21) ** 2
    return MeshShape(domain, p, n, H, K, area, farea, trace_free_sq)


# ---------------------------------------------------------------------------
# Hopf field and Willmore energy


def _q(v):
    return from_vector(v)


def hopf_field(data: ImmersionData):
    """Hopf field ``Q`` as quaternion components ``(Q(d/dx), Q(d/dy))``.

    Computed as the ``Kbar`` part (with respect to left multiplication by
    ``N``) of ``1/2 N (dN - H df)``; for conformal data this projection is
    the identity, otherwise it removes the conformality defect.
    """
    n = _q(data.N)
    hh = data.H[..., None]
    wx = 0.5 * qmul(n, _q(data.Nx - hh * data.fx))
    wy = 0.5 * qmul(n, _q(data.Ny - hh * data.fy))
    sx, sy = data.star(wx, wy)
    return 0.5 * (wx + qmul(n, sx)), 0.5 * (wy + qmul(n, sy))


def _pairing_density(data, ax, ay, bx, by):
    """Real part of ``(a ^ b)(d/dx, d/dy)`` for quaternion 1-forms."""
    return qmul(ax, by)[..., 0] - qmul(ay, bx)[..., 0]


def _require_closed(data):
    if not getattr(data, "closed", True):
        raise OpenDomainError("sampled immersion is not periodic on the torus; pass its periods")


def willmore_energy(data) -> float:
    """``W = int (H^2 - K) |df|^2``.

    On meshes the integrand ``H^2 - K = ((k1 - k2)/2)^2`` is taken per face
    from the trace-free part of the shape operator of the interpolated normal
    field, which keeps ``W = 0`` exact for sphere-inscribed meshes with
    ``N = f``.
    """
    _require_closed(data)
    if isinstance(data, MeshShape):
        return float(np.sum(data.trace_free_sq * data.face_area))
    return float(np.sum((data.H**2 - data.K) * data.area_density * data.domain.weights))


def willmore_energy_hopf(data: ImmersionData) -> float:
    """``W = 2 int <Q ^ *Q>`` from the Hopf field."""
    _require_closed(data)
    qx, qy = hopf_field(data)
    sx, sy = data.star(qx, qy)
    dens = _pairing_density(data, qx, qy, sx, sy)
    return float(2.0 * np.sum(dens * data.domain.weights))


def gauss_bonnet(data) -> float:
    """``int K |df|^2``."""
    if isinstance(data, MeshShape):
        return float(np.sum(data.K * data.vertex_area))
    return float(np.sum(data.K * data.area_density * data.domain.weights))


# ---------------------------------------------------------------------------
# normal maps, A/Q split, harmonic energy


@dataclass
class SphereMap:
    """A map into the unit 2-sphere with its partial derivatives, on a conformal grid."""

    domain: object
    N: np.ndarray
    Nx: np.ndarray
    Ny: np.ndarray

    @classmethod
    def from_samples(cls, domain, samples, method: str = "spectral") -> SphereMap:
        n = np.asarray(samples, dtype=float)
        nx, ny = domain.gradient(n, method)
        return cls(domain, n, nx, ny)

    def unit_residual(self) -> float:
        return float(np.max(np.abs(np.linalg.norm(self.N, axis=-1) - 1.0)))


def normal_map(name: str, domain) -> SphereMap:
    """Named sphere-valued maps with exact derivatives.

    ``identity`` and ``antipodal`` live on a :class:`LonLatDomain`;
    ``constant``, ``equator`` and ``torus-gauss`` on tori.
    """
    x, y = domain.coords
    if name in ("identity", "antipodal"):
        f, fx, fy, *_ = sphere_preset().jets(x, y)
        sign = 1.0 if name == "identity" else -1.0
        return SphereMap(domain, sign * f, sign * fx, sign * fy)
    if name == "constant":
        n = np.zeros(x.shape + (3,))
        n[..., 2] = 1.0
        return SphereMap(domain, n, np.zeros_like(n), np.zeros_like(n))
    if name == "equator":
        period = domain.generators[0].real
        w = 2.0 * np.pi / period
        z = np.zeros_like(x)
        n = np.stack([np.cos(w * x), np.sin(w * x), z], -1)
        nx = w * np.stack([-np.sin(w * x), np.cos(w * x), z], -1)
        return SphereMap(domain, n, nx, np.zeros_like(n))
    if name == "torus-gauss":
        data = derive_shape(domain, revolution_torus_preset())
        return SphereMap(domain, data.N, data.Nx, data.Ny)
    raise ValueError(f"unknown normal map {name!r}")


@dataclass
class ConnectionSplit:
    """``A`` and ``Q`` parts of the trivial connection for the complex structure ``S = N``.

    Components are quaternion arrays on the frame ``(d/dx, d/dy)``.
    """

    S: np.ndarray
    A: tuple
    Q: tuple

    def star(self, w):
        return (w[1], -w[0])


def connection_split(m: SphereMap) -> ConnectionSplit:
    """``A = 1/4 (N dN + *dN)`` and ``Q = 1/4 (N dN - *dN)`` on a conformal grid."""
    n = _q(m.N)
    nx, ny = _q(m.Nx), _q(m.Ny)
    ndx, ndy = qmul(n, nx), qmul(n, ny)
    # *dN = (N_y, -N_x)
    a = (0.25 * (ndx + ny), 0.25 * (ndy - nx))
    q = (0.25 * (ndx - ny), 0.25 * (ndy + nx))
    return ConnectionSplit(n, a, q)


def _signed_area(m: SphereMap) -> float:
    return float(np.sum(_dot(m.N, _cross(m.Nx, m.Ny)) * m.domain.weights))


def degree_of_normal(m: SphereMap, max_gap: float = 0.1) -> tuple[int, float]:
    """Mapping degree by signed-area quadrature; returns ``(degree, rounding gap)``."""
    raw = _signed_area(m) / (4.0 * np.pi)
    deg = int(round(raw))
    gap = abs(raw - deg)
    if gap > max_gap:
        raise ResolutionError(f"signed area / 4 pi = {raw:.4f} is not within {max_gap} of an integer")
    return deg, gap


@dataclass(frozen=True)
class EnergyRelation:
    E: float
    W: float
    degree: int
    residual: float
    degree_gap: float


def harmonic_energy_and_relation(m: SphereMap, unit_tol: float = 1e-8) -> EnergyRelation:
    """Dirichlet energy ``E = 1/2 int <dN ^ *dN>``, ``W`` from the Q part and ``deg N``.

    The residual is ``|E - 2W - 4 pi deg|``.
    """
    res = m.unit_residual()
    if res > unit_tol:
        raise ValueError(f"N is not unit length (max deviation {res:.3g})")
    w = m.domain.weights
    E = 0.5 * float(np.sum((_dot(m.Nx, m.Nx) + _dot(m.Ny, m.Ny)) * w))
    split = connection_split(m)
    qx, qy = split.Q
    # <Q ^ *Q> with *Q = (Q_y, -Q_x)
    dens = -qmul(qx, qx)[..., 0] - qmul(qy, qy)[..., 0]
    W = 2.0 * float(np.sum(dens * w))
    deg, gap = degree_of_normal(m)
    return EnergyRelation(E, W, deg, abs(E - 2.0 * W - 4.0 * np.pi * deg), gap)


def dstar_residual(m: SphereMap, part: str = "A", method: str = "spectral") -> float:
    """Max of ``|d *A|`` (or ``|d *Q|``) computed with the domain's derivatives."""
    split = connection_split(m)
    wx, wy = split.A if part == "A" else split.Q
    sx, sy = wy, -wx
    _, d_sx = m.domain.gradient(sx, method)
    d_sy, _ = m.domain.gradient(sy, method)
    return float(np.max(np.abs(d_sy - d_sx)))


def vector_part(q):
    return to_vector(q)
