"""Discrete Riemann surface domains and differential forms on them.

Three domains share one form contract:

* :class:`TorusDomain` -- flat torus ``C / (s Z + s tau Z)`` on a uniform grid,
* :class:`LonLatDomain` -- the round sphere in Mercator coordinates
  ``(longitude, y)`` which are conformal, with the pole caps ``|y| > ymax`` cut off,
* :class:`IcosphereDomain` -- a subdivided icosahedron projected to the unit sphere.

A 1-form is stored by its values on a conformal frame ``(X, J_M X)``: the
coordinate frame ``(d/dx, d/dy)`` on the grid domains and an orthonormal
per-face frame on meshes.  The Hodge star is ``(*w)(X) = w(J_M X)``, so
``*dx = -dy`` and ``*dz = i dz``.  A 2-form is stored as the density
``w(X, J_M X)`` and integrated against the cell weights.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .quatlinalg import qmul

__all__ = [
    "TorusDomain",
    "LonLatDomain",
    "IcosphereDomain",
    "DiscreteForm",
    "DegreeError",
    "domain_from_config",
    "spectral_derivative",
    "hodge_star",
    "wedge_as_quadratic",
    "integrate_2form",
    "exterior_derivative",
]


class DegreeError(ValueError):
    """Raised when a form of the wrong degree is passed to an operator."""


def _wavenumbers(n: int, period: float, keep_nyquist: bool) -> np.ndarray:
    k = np.fft.fftfreq(n, d=1.0 / n)
    if n % 2 == 0 and not keep_nyquist:
        k[n // 2] = 0.0
    return 2.0 * np.pi * k / period


def spectral_derivative(values, axis: int, period: float, keep_nyquist: bool = False):
    """Fourier derivative of periodic samples along ``axis``.

    The Nyquist mode of an even grid is dropped unless ``keep_nyquist`` is
    set; keeping it is right for complex data that is band limited to
    ``[-n/2, n/2)`` but makes real data complex.
    """
    values = np.asarray(values)
    n = values.shape[axis]
    k = _wavenumbers(n, period, keep_nyquist)
    shape = [1] * values.ndim
    shape[axis] = n
    out = np.fft.ifft(1j * k.reshape(shape) * np.fft.fft(values, axis=axis), axis=axis)
    if np.isrealobj(values) and not keep_nyquist:
        return out.real
    return out


def _fd_derivative(values, axis: int, h: float, periodic: bool = True):
    values = np.asarray(values)
    if periodic:
        return (np.roll(values, -1, axis=axis) - np.roll(values, 1, axis=axis)) / (2.0 * h)
    return np.gradient(values, h, axis=axis, edge_order=2)


# ---------------------------------------------------------------------------
# domains


@dataclass(frozen=True)
class TorusDomain:
    """Flat torus with lattice generators ``scale`` and ``scale * tau``.

    Grid point ``(a, b)`` sits at ``scale * (a/nx + tau * b/ny)``.
    """

    tau: complex
    nx: int
    ny: int
    scale: float = 1.0

    def __post_init__(self):
        if complex(self.tau).imag <= 0:
            raise ValueError("torus modulus needs Im tau > 0")
        if self.nx < 2 or self.ny < 2:
            raise ValueError("grid needs at least 2 points per direction")
        if self.scale <= 0:
            raise ValueError("scale must be positive")
        object.__setattr__(self, "tau", complex(self.tau))

    kind = "torus"
    genus = 1

    @property
    def grid_shape(self) -> tuple[int, int]:
        return (self.nx, self.ny)

    @property
    def generators(self) -> tuple[complex, complex]:
        return (complex(self.scale), self.scale * self.tau)

    @property
    def area(self) -> float:
        return self.scale**2 * self.tau.imag

    @cached_property
    def coords(self) -> tuple[np.ndarray, np.ndarray]:
        """Cartesian coordinates ``(x, y)`` of the grid, each of shape ``(nx, ny)``."""
        s = np.arange(self.nx) / self.nx
        t = np.arange(self.ny) / self.ny
        z = self.scale * (s[:, None] + self.tau * t[None, :])
        return z.real, z.imag

    @cached_property
    def weights(self) -> np.ndarray:
        return np.full(self.grid_shape, self.area / (self.nx * self.ny))

    def wrap(self, a: int, b: int) -> tuple[int, int]:
        return a % self.nx, b % self.ny

    def gradient(self, values, method: str = "spectral", keep_nyquist: bool = False):
        """Return ``(d/dx, d/dy)`` of grid samples of shape ``(nx, ny, ...)``."""
        values = np.asarray(values)
        if method == "spectral":
            ds = spectral_derivative(values, 0, 1.0, keep_nyquist)
            dt = spectral_derivative(values, 1, 1.0, keep_nyquist)
        elif method == "fd":
            ds = _fd_derivative(values, 0, 1.0 / self.nx)
            dt = _fd_derivative(values, 1, 1.0 / self.ny)
        else:
            raise ValueError(f"unknown derivative method {method!r}")
        # x = scale (s + Re tau t), y = scale Im tau t
        fx = ds / self.scale
        fy = (dt - self.tau.real * ds) / (self.scale * self.tau.imag)
        return fx, fy

    def config(self) -> dict:
        return {
            "type": "torus",
            "tau_re": self.tau.real,
            "tau_im": self.tau.imag,
            "nx": self.nx,
            "ny": self.ny,
            "scale": self.scale,
        }


@dataclass(frozen=True)
class LonLatDomain:
    """Unit sphere on a longitude / Mercator-latitude grid.

    ``x`` is the longitude on ``[0, 2 pi)`` and ``y`` the Mercator latitude;
    the chart ``(sech y cos x, sech y sin x, tanh y)`` is conformal with
    factor ``sech^2 y``.  Rows are cell centres in ``[-ymax, ymax]`` so the
    poles are never sampled; the caps beyond ``ymax`` are excluded from
    quadrature.
    """

    nx: int
    ny: int
    ymax: float = 7.0

    kind = "sphere"
    genus = 0

    @property
    def grid_shape(self) -> tuple[int, int]:
        return (self.nx, self.ny)

    @cached_property
    def coords(self) -> tuple[np.ndarray, np.ndarray]:
        x = 2.0 * np.pi * np.arange(self.nx) / self.nx
        h = 2.0 * self.ymax / self.ny
        y = -self.ymax + h * (np.arange(self.ny) + 0.5)
        return np.broadcast_to(x[:, None], self.grid_shape).copy(), np.broadcast_to(y[None, :], self.grid_shape).copy()

    @cached_property
    def weights(self) -> np.ndarray:
        """Coordinate cell areas ``dx dy``."""
        return np.full(self.grid_shape, (2.0 * np.pi / self.nx) * (2.0 * self.ymax / self.ny))

    @cached_property
    def positions(self) -> np.ndarray:
        x, y = self.coords
        s = 1.0 / np.cosh(y)
        return np.stack([s * np.cos(x), s * np.sin(x), np.tanh(y)], axis=-1)

    @property
    def area(self) -> float:
        x, y = self.coords
        return float(np.sum(self.weights / np.cosh(y) ** 2))

    def gradient(self, values, method: str = "spectral", keep_nyquist: bool = False):
        values = np.asarray(values)
        if method == "spectral":
            fx = spectral_derivative(values, 0, 2.0 * np.pi, keep_nyquist)
        elif method == "fd":
            fx = _fd_derivative(values, 0, 2.0 * np.pi / self.nx)
        else:
            raise ValueError(f"unknown derivative method {method!r}")
        fy = _fd_derivative(values, 1, 2.0 * self.ymax / self.ny, periodic=False)
        return fx, fy

    def config(self) -> dict:
        return {"type": "sphere", "grid": "lonlat", "nx": self.nx, "ny": self.ny, "ymax": self.ymax}


def _icosahedron():
    p = (1.0 + math.sqrt(5.0)) / 2.0
    v = np.array(
        [
            [-1, p, 0], [1, p, 0], [-1, -p, 0], [1, -p, 0],
            [0, -1, p], [0, 1, p], [0, -1, -p], [0, 1, -p],
            [p, 0, -1], [p, 0, 1], [-p, 0, -1], [-p, 0, 1],
        ],
        dtype=float,
    )
    f = np.array(
        [
            [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
            [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
            [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
            [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
        ]
    )
    return v / np.linalg.norm(v, axis=1, keepdims=True), f


def _subdivide(v: np.ndarray, f: np.ndarray):
    edges = np.concatenate([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]])
    key = np.sort(edges, axis=1)
    uniq, inv = np.unique(key, axis=0, return_inverse=True)
    inv = inv.reshape(-1)
    mid = v[uniq[:, 0]] + v[uniq[:, 1]]
    mid /= np.linalg.norm(mid, axis=1, keepdims=True)
    nv = len(v)
    m = inv + nv
    nf = len(f)
    a, b, c = f[:, 0], f[:, 1], f[:, 2]
    ab, bc, ca = m[:nf], m[nf : 2 * nf], m[2 * nf :]
    faces = np.concatenate(
        [np.stack([a, ab, ca], 1), np.stack([b, bc, ab], 1), np.stack([c, ca, bc], 1), np.stack([ab, bc, ca], 1)]
    )
    return np.concatenate([v, mid]), faces


@dataclass(frozen=True)
class IcosphereDomain:
    """Unit sphere triangulated by ``level`` midpoint subdivisions of the icosahedron."""

    level: int
    vertices: np.ndarray = field(init=False, repr=False, compare=False)
    faces: np.ndarray = field(init=False, repr=False, compare=False)

    kind = "sphere"
    genus = 0

    def __post_init__(self):
        if self.level < 0:
            raise ValueError("subdivision level must be >= 0")
        v, f = _icosahedron()
        for _ in range(self.level):
            v, f = _subdivide(v, f)
        v.setflags(write=False)
        f.setflags(write=False)
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "faces", f)

    @property
    def grid_shape(self) -> tuple[int]:
        return (len(self.faces),)

    @cached_property
    def face_geometry(self):
        """Face areas, unit normals and orthonormal frames ``(e1, e2 = n x e1)``."""
        p = self.vertices[self.faces]
        u = p[:, 1] - p[:, 0]
        w = p[:, 2] - p[:, 0]
        c = np.cross(u, w)
        norm = np.linalg.norm(c, axis=1)
        n = c / norm[:, None]
        e1 = u / np.linalg.norm(u, axis=1, keepdims=True)
        e2 = np.cross(n, e1)
        return 0.5 * norm, n, e1, e2

    @property
    def weights(self) -> np.ndarray:
        return self.face_geometry[0]

    @property
    def area(self) -> float:
        return float(np.sum(self.face_geometry[0]))

    @cached_property
    def vertex_areas(self) -> np.ndarray:
        a = np.zeros(len(self.vertices))
        for k in range(3):
            np.add.at(a, self.faces[:, k], self.face_geometry[0] / 3.0)
        return a

    @cached_property
    def barycentric_gradients(self) -> np.ndarray:
        """Gradients of the three hat functions on each face, shape ``(nf, 3, 3)``."""
        area, n, _, _ = self.face_geometry
        p = self.vertices[self.faces]
        g = np.empty_like(p)
        for k in range(3):
            opp = p[:, (k + 2) % 3] - p[:, (k + 1) % 3]
            g[:, k] = np.cross(n, opp) / (2.0 * area[:, None])
        return g

    def gradient(self, values):
        """Per-face P1 gradient of vertex samples, expressed in the face frames."""
        values = np.asarray(values)
        vf = values[self.faces]  # (nf, 3, ...)
        g = self.barycentric_gradients
        _, _, e1, e2 = self.face_geometry
        g1 = np.einsum("fk,fk...->f...", np.einsum("fkd,fd->fk", g, e1), vf)
        g2 = np.einsum("fk,fk...->f...", np.einsum("fkd,fd->fk", g, e2), vf)
        return g1, g2

    def config(self) -> dict:
        return {"type": "sphere", "subdiv": self.level}


def domain_from_config(cfg: dict):
    """Build a domain from its JSON description."""
    if not isinstance(cfg, dict) or "type" not in cfg:
        raise ValueError("domain config needs a 'type' field")
    kind = cfg["type"]
    if kind == "torus":
        try:
            tau = complex(float(cfg.get("tau_re", 0.0)), float(cfg["tau_im"]))
            return TorusDomain(tau, int(cfg["nx"]), int(cfg["ny"]), float(cfg.get("scale", 1.0)))
        except KeyError as exc:
            raise ValueError(f"torus domain is missing field {exc.args[0]!r}") from None
    if kind == "sphere":
        if cfg.get("grid", "icosphere") == "lonlat":
            return LonLatDomain(int(cfg["nx"]), int(cfg["ny"]), float(cfg.get("ymax", 7.0)))
        if "subdiv" not in cfg:
            raise ValueError("sphere domain is missing field 'subdiv'")
        return IcosphereDomain(int(cfg["subdiv"]))
    raise ValueError(f"unknown domain type {kind!r}")


# ---------------------------------------------------------------------------
# forms


@dataclass
class DiscreteForm:
    """Sampled differential form.

    ``values`` has shape ``grid + value_shape`` for degrees 0 and 2 and
    ``(2,) + grid + value_shape`` for degree 1, the leading axis holding
    ``(w(X), w(J_M X))``.  Quaternion-valued forms use a trailing axis of
    length 4 and set ``quaternionic=True``.
    """

    degree: int
    values: np.ndarray
    domain: object
    quaternionic: bool = False

    def __post_init__(self):
        if self.degree not in (0, 1, 2):
            raise DegreeError(f"degree must be 0, 1 or 2, got {self.degree}")
        self.values = np.asarray(self.values)
        grid = _grid(self.domain, self.degree)
        lead = (2,) if self.degree == 1 else ()
        if self.values.shape[: len(lead) + len(grid)] != lead + grid:
            raise ValueError(f"form values of shape {self.values.shape} do not fit grid {grid}")
        if self.quaternionic and self.values.shape[-1] != 4:
            raise ValueError("quaternionic forms need a trailing axis of length 4")

    def _new(self, values, degree=None):
        return DiscreteForm(self.degree if degree is None else degree, values, self.domain, self.quaternionic)

    def __add__(self, other: DiscreteForm) -> DiscreteForm:
        _check_same(self, other)
        return self._new(self.values + other.values)

    def __sub__(self, other: DiscreteForm) -> DiscreteForm:
        _check_same(self, other)
        return self._new(self.values - other.values)

    def __neg__(self) -> DiscreteForm:
        return self._new(-self.values)

    def scale(self, c) -> DiscreteForm:
        """Multiply by a scalar or by a real/complex function sampled on the grid."""
        c = np.asarray(c)
        if c.ndim:
            c = c.reshape(c.shape + (1,) * (self.values.ndim - c.ndim - (self.degree == 1)))
        return self._new(self.values * c)

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.values))) if self.values.size else 0.0


def _grid(domain, degree: int) -> tuple:
    if isinstance(domain, IcosphereDomain) and degree == 0:
        return (len(domain.vertices),)
    return tuple(domain.grid_shape)


def _check_same(a: DiscreteForm, b: DiscreteForm):
    if a.degree != b.degree or a.domain is not b.domain and a.domain != b.domain:
        raise DegreeError("forms live on different domains or have different degrees")


def hodge_star(omega: DiscreteForm) -> DiscreteForm:
    """``(*w)(X) = w(J_M X)``; on the frame this maps ``(a, b)`` to ``(b, -a)``."""
    if omega.degree != 1:
        raise DegreeError(f"Hodge star is implemented on 1-forms, got degree {omega.degree}")
    v = omega.values
    return omega._new(np.stack([v[1], -v[0]]))


def _product(a, b, quaternionic: bool):
    if quaternionic:
        return qmul(a, b)
    return a * b


def wedge_as_quadratic(omega: DiscreteForm, eta: DiscreteForm) -> DiscreteForm:
    """The 2-form ``w ^ eta = w(*eta) - (*w) eta`` as its quadratic-form density."""
    if omega.degree != 1 or eta.degree != 1:
        raise DegreeError("wedge needs two 1-forms")
    if omega.quaternionic != eta.quaternionic or omega.values.shape[-1:] != eta.values.shape[-1:] and omega.quaternionic:
        raise ValueError("incompatible value spaces for wedge")
    if not omega.quaternionic and omega.values.shape != eta.values.shape:
        raise ValueError("incompatible value spaces for wedge")
    a, b = omega.values
    c, d = eta.values
    q = omega.quaternionic
    return DiscreteForm(2, _product(a, d, q) - _product(b, c, q), omega.domain, q)


def integrate_2form(omega: DiscreteForm):
    """Quadrature of a 2-form density against the cell weights."""
    if omega.degree != 2:
        raise DegreeError(f"only 2-forms can be integrated, got degree {omega.degree}")
    w = omega.domain.weights
    w = w.reshape(w.shape + (1,) * (omega.values.ndim - w.ndim))
    return np.sum(omega.values * w, axis=tuple(range(len(omega.domain.grid_shape))))


def exterior_derivative(omega: DiscreteForm, method: str = "spectral") -> DiscreteForm:
    """``d`` of a 0- or 1-form.

    Grid domains use Fourier differentiation (``method="spectral"``) or
    centred second-order differences (``method="fd"``); meshes use the
    per-face gradient of the piecewise linear interpolant for 0-forms.
    """
    dom = omega.domain
    if omega.degree == 2:
        raise DegreeError("d of a 2-form vanishes on a surface; degree 2 input rejected")
    if isinstance(dom, IcosphereDomain):
        if omega.degree != 0:
            raise DegreeError("meshes support d on vertex 0-forms only")
        g1, g2 = dom.gradient(omega.values)
        return DiscreteForm(1, np.stack([g1, g2]), dom, omega.quaternionic)
    if omega.degree == 0:
        fx, fy = dom.gradient(omega.values, method)
        return DiscreteForm(1, np.stack([fx, fy]), dom, omega.quaternionic)
    wx, wy = omega.values
    _, dy_wx = dom.gradient(wx, method)
    dx_wy, _ = dom.gradient(wy, method)
    return DiscreteForm(2, dx_wy - dy_wx, dom, omega.quaternionic)
