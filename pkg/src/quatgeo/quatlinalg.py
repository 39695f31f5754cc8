"""Quaternion scalars and matrices, complex doubling, trace form, type splitting.

Quaternions are stored as four reals ``(w, x, y, z)`` for ``w + xi + yj + zk``.
The array helpers (``qmul``, ``qconj``, ...) act on trailing axes of length 4
and broadcast over everything in front, which is what the geometry modules
use for sampled fields.  :class:`Quaternion` and :class:`QuatMatrix` are small
value types on top of them.

Quaternionic vector spaces are right modules: scalars act from the right and
matrices act on column vectors from the left.  Writing ``q = a + j b`` with
``a, b`` in ``C = span(1, i)`` identifies ``H`` with ``C^2``; the complex
structure is right multiplication by ``i`` and left multiplication by ``q``
becomes the matrix ``[[a, -conj(b)], [b, conj(a)]]``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

__all__ = [
    "Quaternion",
    "QuatMatrix",
    "ComplexStructureJ",
    "FormValue",
    "qmul",
    "qconj",
    "qnorm",
    "qinv",
    "qmat_mul",
    "from_vector",
    "to_vector",
    "complex_rep",
    "from_complex_rep",
    "j_map",
    "quat_mul",
    "real_trace",
    "complex_represent",
    "type_decompose",
]


# ---------------------------------------------------------------------------
# array helpers


def qmul(a, b):
    """Hamilton product of quaternion arrays with broadcasting."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    aw, ax, ay, az = np.moveaxis(a, -1, 0)
    bw, bx, by, bz = np.moveaxis(b, -1, 0)
    return np.stack(
        [
            aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
        ],
        axis=-1,
    )


def qconj(a):
    a = np.asarray(a, dtype=float)
    return a * np.array([1.0, -1.0, -1.0, -1.0])


def qnorm(a):
    return np.linalg.norm(np.asarray(a, dtype=float), axis=-1)


def qinv(a):
    a = np.asarray(a, dtype=float)
    n2 = np.sum(a * a, axis=-1, keepdims=True)
    if np.any(n2 == 0):
        raise ZeroDivisionError("zero quaternion has no inverse")
    return qconj(a) / n2


def from_vector(v):
    """Embed R^3 vectors as imaginary quaternions."""
    v = np.asarray(v, dtype=float)
    return np.concatenate([np.zeros(v.shape[:-1] + (1,)), v], axis=-1)


def to_vector(q):
    """Imaginary part of a quaternion array as R^3 vectors."""
    return np.asarray(q, dtype=float)[..., 1:]


def complex_rep(q):
    """2x2 complex matrices representing left multiplication by ``q``."""
    q = np.asarray(q, dtype=float)
    a = q[..., 0] + 1j * q[..., 1]
    b = q[..., 2] - 1j * q[..., 3]
    out = np.empty(q.shape[:-1] + (2, 2), dtype=complex)
    out[..., 0, 0] = a
    out[..., 0, 1] = -np.conj(b)
    out[..., 1, 0] = b
    out[..., 1, 1] = np.conj(a)
    return out


def from_complex_rep(m):
    """Inverse of :func:`complex_rep` (projects onto the quaternionic part)."""
    m = np.asarray(m, dtype=complex)
    a = 0.5 * (m[..., 0, 0] + np.conj(m[..., 1, 1]))
    b = 0.5 * (m[..., 1, 0] - np.conj(m[..., 0, 1]))
    return np.stack([a.real, a.imag, b.real, -b.imag], axis=-1)


def qmat_mul(a, b):
    """Product of quaternion matrices stored as ``(n, m, 4)`` and ``(m, p, 4)``."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return qmul(a[:, :, None, :], b[None, :, :, :]).sum(axis=1)


def j_map(v):
    """Right multiplication by ``j`` in complex coordinates: ``(a, b) -> (-conj b, conj a)``.

    ``v`` has shape ``(..., 2n)`` with the first ``n`` entries the ``1``-parts
    and the last ``n`` the ``j``-parts.
    """
    v = np.asarray(v, dtype=complex)
    n = v.shape[-1] // 2
    return np.concatenate([-np.conj(v[..., n:]), np.conj(v[..., :n])], axis=-1)


# ---------------------------------------------------------------------------
# value types


@dataclass(frozen=True)
class Quaternion:
    w: float = 0.0
    x: float = 0.0
    y: float = 0.0
    z: float = 0.0

    @classmethod
    def from_array(cls, a) -> Quaternion:
        w, x, y, z = (float(t) for t in np.asarray(a, dtype=float).reshape(4))
        return cls(w, x, y, z)

    @classmethod
    def from_complex(cls, c: complex) -> Quaternion:
        return cls(float(np.real(c)), float(np.imag(c)), 0.0, 0.0)

    @property
    def array(self) -> np.ndarray:
        return np.array([self.w, self.x, self.y, self.z])

    def __mul__(self, other):
        if isinstance(other, Quaternion):
            return Quaternion.from_array(qmul(self.array, other.array))
        if isinstance(other, (int, float)):
            return Quaternion.from_array(self.array * other)
        return NotImplemented

    def __rmul__(self, other):
        if isinstance(other, (int, float)):
            return Quaternion.from_array(self.array * other)
        return NotImplemented

    def __add__(self, other: Quaternion) -> Quaternion:
        return Quaternion.from_array(self.array + other.array)

    def __sub__(self, other: Quaternion) -> Quaternion:
        return Quaternion.from_array(self.array - other.array)

    def __neg__(self) -> Quaternion:
        return Quaternion.from_array(-self.array)

    def conj(self) -> Quaternion:
        return Quaternion(self.w, -self.x, -self.y, -self.z)

    def norm(self) -> float:
        return float(np.linalg.norm(self.array))

    def inverse(self) -> Quaternion:
        return Quaternion.from_array(qinv(self.array))

    def isclose(self, other: Quaternion, tol: float = 1e-12) -> bool:
        return bool(np.max(np.abs(self.array - other.array)) <= tol)

    def complex_rep(self) -> np.ndarray:
        return complex_rep(self.array)


ONE = Quaternion(1.0)
I = Quaternion(0.0, 1.0)
J = Quaternion(0.0, 0.0, 1.0)
K = Quaternion(0.0, 0.0, 0.0, 1.0)


class QuatMatrix:
    """Square quaternion matrix acting on column vectors from the left."""

    def __init__(self, entries):
        e = np.array(entries, dtype=float)
        if e.ndim != 3 or e.shape[0] != e.shape[1] or e.shape[2] != 4:
            raise ValueError(f"expected an (n, n, 4) array, got shape {e.shape}")
        e.setflags(write=False)
        self.entries = e

    @classmethod
    def identity(cls, n: int) -> QuatMatrix:
        e = np.zeros((n, n, 4))
        e[np.arange(n), np.arange(n), 0] = 1.0
        return cls(e)

    @classmethod
    def diag(cls, values) -> QuatMatrix:
        vals = [v.array if isinstance(v, Quaternion) else Quaternion.from_complex(v).array for v in values]
        n = len(vals)
        e = np.zeros((n, n, 4))
        for k, v in enumerate(vals):
            e[k, k] = v
        return cls(e)

    @classmethod
    def scalar(cls, q: Quaternion) -> QuatMatrix:
        return cls(q.array.reshape(1, 1, 4))

    @classmethod
    def from_complex_rep(cls, m) -> QuatMatrix:
        m = np.asarray(m, dtype=complex)
        n = m.shape[0] // 2
        a = 0.5 * (m[:n, :n] + np.conj(m[n:, n:]))
        b = 0.5 * (m[n:, :n] - np.conj(m[:n, n:]))
        return cls(np.stack([a.real, a.imag, b.real, -b.imag], axis=-1))

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    @cached_property
    def complex_rep(self) -> np.ndarray:
        """The ``2n x 2n`` complex matrix ``[[A, -conj B], [B, conj A]]`` for ``M = A + jB``."""
        e = self.entries
        a = e[..., 0] + 1j * e[..., 1]
        b = e[..., 2] - 1j * e[..., 3]
        return np.block([[a, -np.conj(b)], [b, np.conj(a)]])

    def __matmul__(self, other: QuatMatrix) -> QuatMatrix:
        return QuatMatrix(qmat_mul(self.entries, other.entries))

    def __add__(self, other: QuatMatrix) -> QuatMatrix:
        return QuatMatrix(self.entries + other.entries)

    def __sub__(self, other: QuatMatrix) -> QuatMatrix:
        return QuatMatrix(self.entries - other.entries)

    def real_trace(self) -> float:
        return real_trace(self)

    def j_symmetry_residual(self) -> float:
        """Max deviation of ``J^-1 conj(R) J`` from ``R`` for the complex representative ``R``."""
        r = self.complex_rep
        n = self.n
        e = np.block([[np.zeros((n, n)), -np.eye(n)], [np.eye(n), np.zeros((n, n))]])
        return float(np.max(np.abs(np.linalg.inv(e) @ np.conj(r) @ e - r)))


class ComplexStructureJ:
    """A quaternionic matrix with ``J^2 = -Id``."""

    def __init__(self, matrix: QuatMatrix | Quaternion, tol: float = 1e-12):
        if isinstance(matrix, Quaternion):
            matrix = QuatMatrix.scalar(matrix)
        sq = matrix @ matrix
        res = np.max(np.abs(sq.entries + QuatMatrix.identity(matrix.n).entries))
        if res > tol:
            raise ValueError(f"J^2 + Id has residual {res:.3g}")
        self.matrix = matrix

    def apply(self, v):
        """Apply ``J`` to quaternion column vectors ``v`` of shape ``(..., n, 4)``."""
        v = np.asarray(v, dtype=float)
        return qmul(self.matrix.entries[..., :, :, :], v[..., None, :, :]).sum(axis=-2)


@dataclass(frozen=True)
class FormValue:
    """A 1-form value given on a frame ``(X, J_M X)``.

    ``on_x`` and ``on_jx`` are quaternion vectors of shape ``(n, 4)``.
    """

    on_x: np.ndarray
    on_jx: np.ndarray
    kind: str = "mixed"

    def star(self) -> FormValue:
        return FormValue(np.asarray(self.on_jx), -np.asarray(self.on_x), self.kind)

    def __add__(self, other: FormValue) -> FormValue:
        return FormValue(np.asarray(self.on_x) + other.on_x, np.asarray(self.on_jx) + other.on_jx)

    def residual(self, other: FormValue) -> float:
        return float(
            max(np.max(np.abs(np.asarray(self.on_x) - other.on_x)), np.max(np.abs(np.asarray(self.on_jx) - other.on_jx)))
        )


# ---------------------------------------------------------------------------
# operations


def quat_mul(a: Quaternion, b: Quaternion) -> Quaternion:
    return a * b


def real_trace(b: QuatMatrix) -> float:
    """One quarter of the trace of ``b`` as a real ``4n x 4n`` endomorphism."""
    return float(np.sum(np.diagonal(b.entries[..., 0])))


def complex_represent(m: QuatMatrix | Quaternion) -> np.ndarray:
    if isinstance(m, Quaternion):
        return m.complex_rep()
    return m.complex_rep


def type_decompose(omega: FormValue, j: ComplexStructureJ) -> tuple[FormValue, FormValue]:
    """Split ``omega`` into its ``K`` part ``(omega - J*omega)/2`` and ``Kbar`` part ``(omega + J*omega)/2``."""
    star = omega.star()
    jx = j.apply(star.on_x)
    jjx = j.apply(star.on_jx)
    ox = np.asarray(omega.on_x, dtype=float)
    ojx = np.asarray(omega.on_jx, dtype=float)
    k_part = FormValue(0.5 * (ox - jx), 0.5 * (ojx - jjx), "K")
    kbar_part = FormValue(0.5 * (ox + jx), 0.5 * (ojx + jjx), "Kbar")
    return k_part, kbar_part
