"""Vanishing orders, jets, Weierstrass gaps, Plücker checks and Willmore lower bounds.

Sections are described by Taylor data in a centred holomorphic coordinate.
A coefficient provider returns an array ``c[a, b, r]`` for the monomials
``z^a zbar^b`` (``a + b <= depth``) with ``r`` complex components; a
quaternionic value ``u + j v`` is stored as the pair ``(u, v)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "DepthExceededError",
    "IndeterminateError",
    "AnalyticSection",
    "PolynomialSection",
    "FunctionSection",
    "LinearSystemH",
    "GapData",
    "JetElement",
    "vanishing_order",
    "prolong",
    "weierstrass_gaps",
    "order_h",
    "auto_candidates",
    "wronskian_order",
    "plucker_verify",
    "willmore_lower_bound",
    "riemann_roch_index_check",
    "riemann_roch_fourier_oracle",
    "RiemannRochResult",
    "DEPTH",
    "MAX_DEPTH",
    "RANK_RTOL",
]

DEPTH = 24
MAX_DEPTH = 96
RANK_RTOL = 1e-9


class DepthExceededError(ValueError):
    """All Taylor coefficients up to the maximal depth vanish."""


class IndeterminateError(ValueError):
    """No clear gap separates small from large singular values."""

    def __init__(self, msg, singular_values=None):
        super().__init__(msg)
        self.singular_values = singular_values


class AnalyticSection:
    """Base class: subclasses implement :meth:`taylor_at`."""

    components: int = 1

    def taylor_at(self, p: complex, depth: int) -> np.ndarray:
        raise NotImplementedError


@dataclass
class PolynomialSection(AnalyticSection):
    """Polynomial in ``z`` and ``zbar``; ``terms`` maps ``(a, b)`` to a component vector."""

    terms: dict
    components: int = 1

    def __post_init__(self):
        self.terms = {tuple(map(int, k)): np.atleast_1d(np.asarray(v, dtype=complex)) for k, v in self.terms.items()}
        if self.terms:
            self.components = len(next(iter(self.terms.values())))

    @classmethod
    def holomorphic(cls, coeffs: Sequence) -> PolynomialSection:
        """``sum_k coeffs[k] z^k``; entries may be scalars or component vectors."""
        return cls({(k, 0): c for k, c in enumerate(coeffs) if np.any(np.asarray(c) != 0)} or {(0, 0): 0.0})

    @property
    def holomorphic_degree(self) -> int:
        if any(b for _, b in self.terms):
            raise ValueError("section is not holomorphic")
        nz = [a for (a, _), v in self.terms.items() if np.any(v != 0)]
        return max(nz) if nz else -1

    def holomorphic_coeffs(self) -> np.ndarray:
        deg = max(self.holomorphic_degree, 0)
        out = np.zeros((deg + 1, self.components), dtype=complex)
        for (a, _), v in self.terms.items():
            if a <= deg:
                out[a] += v
        return out

    def at_infinity(self, d: int) -> PolynomialSection:
        """Expression ``w^d p(1/w)`` in the chart at infinity of a degree-``d`` bundle on CP^1."""
        coeffs = self.holomorphic_coeffs()
        if len(coeffs) - 1 > d:
            raise ValueError(f"polynomial degree {len(coeffs) - 1} exceeds bundle degree {d}")
        return PolynomialSection({(d - a, 0): coeffs[a] for a in range(len(coeffs))})

    def taylor_at(self, p: complex, depth: int) -> np.ndarray:
        out = np.zeros((depth + 1, depth + 1, self.components), dtype=complex)
        pc = np.conj(p)
        for (a, b), v in self.terms.items():
            for i in range(min(a, depth) + 1):
                ca = math.comb(a, i) * p ** (a - i)
                for j in range(min(b, depth - i) + 1):
                    out[i, j] += ca * math.comb(b, j) * pc ** (b - j) * v
        return out

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        res = np.zeros(z.shape + (self.components,), dtype=complex)
        for (a, b), v in self.terms.items():
            res += (z**a * np.conj(z) ** b)[..., None] * v
        return res


@dataclass
class FunctionSection(AnalyticSection):
    """Holomorphic function given by a callable; Taylor data from Cauchy integrals on a circle."""

    func: Callable
    radius: float = 0.5
    components: int = 1
    samples: int = 256

    def taylor_at(self, p: complex, depth: int) -> np.ndarray:
        n = max(self.samples, 4 * (depth + 1))
        theta = 2 * np.pi * np.arange(n) / n
        vals = np.asarray(self.func(p + self.radius * np.exp(1j * theta)), dtype=complex).reshape(n, -1)
        coef = np.fft.fft(vals, axis=0) / n
        k = np.arange(depth + 1)
        hol = coef[: depth + 1] / self.radius ** k[:, None]
        out = np.zeros((depth + 1, depth + 1, vals.shape[1]), dtype=complex)
        out[:, 0] = hol
        # Cauchy data cannot resolve coefficients below roundoff relative to the samples
        noise = 1e-12 * np.max(np.abs(vals)) / self.radius ** k
        out[:, 0][np.abs(hol) < noise[:, None]] = 0.0
        return out


def _blocks(c: np.ndarray) -> list[np.ndarray]:
    """Flattened Taylor block of total degree ``k`` for each ``k``."""
    depth = c.shape[0] - 1
    return [np.concatenate([c[a, k - a] for a in range(k + 1)]) for k in range(depth + 1)]


def vanishing_order(psi: AnalyticSection, p: complex = 0.0, depth: int = DEPTH, max_depth: int = MAX_DEPTH,
                    atol: float = 1e-12) -> int:
    """Least ``n`` whose degree-``n`` Taylor block is nonzero."""
    while True:
        c = psi.taylor_at(p, depth)
        scale = max(1.0, float(np.max(np.abs(c))))
        for k, blk in enumerate(_blocks(c)):
            if np.max(np.abs(blk)) > atol * scale:
                return k
        if depth >= max_depth:
            raise DepthExceededError(f"all Taylor coefficients up to order {depth} vanish at {p}")
        depth = min(2 * depth, max_depth)


# ---------------------------------------------------------------------------
# jets


@dataclass
class JetElement:
    """Element of ``V_k = V_{k-1} + K N_{k-1}`` stored as Taylor series of its ``k + 1`` components."""

    level: int
    components: list

    def project(self) -> JetElement:
        if self.level == 0:
            raise ValueError("cannot project a level-0 element")
        return JetElement(self.level - 1, self.components[:-1])

    def order(self, atol: float = 1e-10) -> int:
        """Vanishing order at the centre: minimum over the components."""
        orders = []
        for c in self.components:
            scale = max(1.0, float(np.max(np.abs(c))))
            nz = np.nonzero(np.abs(c) > atol * scale)[0]
            orders.append(int(nz[0]) if len(nz) else math.inf)
        return min(orders)


def _deriv(c: np.ndarray) -> np.ndarray:
    return c[1:] * np.arange(1, len(c))


def _conv(a: np.ndarray, b: np.ndarray, n: int) -> np.ndarray:
    return np.convolve(a, b)[:n]


def prolong(psi: AnalyticSection | np.ndarray, k: int, gamma=0.0, p: complex = 0.0, depth: int = DEPTH) -> JetElement:
    """``P_k psi`` for the connection ``nabla = dz (d/dz + gamma)``.

    Components obey ``c_{j+1} = -(d/dz + gamma) c_j`` so that ``pi P_k = P_{k-1}``.
    ``gamma`` is a constant or a Taylor array.  Each derivative costs one
    order of depth, so ``depth`` should exceed ``k``.
    """
    if isinstance(psi, AnalyticSection):
        c0 = psi.taylor_at(p, depth)[:, 0, 0]
    else:
        c0 = np.asarray(psi, dtype=complex)
    g = np.atleast_1d(np.asarray(gamma, dtype=complex))
    comps = [c0]
    for _ in range(k):
        c = comps[-1]
        comps.append(-(_deriv(c) + _conv(g, c, len(c) - 1)))
    return JetElement(k, comps)


# ---------------------------------------------------------------------------
# linear systems


@dataclass
class LinearSystemH:
    basis: list
    degree: int
    genus: int
    quaternionic: bool = False
    meta: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return len(self.basis) - 1

    def at_infinity(self) -> LinearSystemH:
        return LinearSystemH([s.at_infinity(self.degree) for s in self.basis], self.degree, self.genus,
                             self.quaternionic)

    def independence_residual(self, samples: int = 16, seed: int = 0) -> float:
        """Smallest singular value of the sampled matrix relative to the largest."""
        rng = np.random.default_rng(seed)
        z = rng.normal(size=samples) * 0.5 + 1j * rng.normal(size=samples) * 0.5
        cols = [np.asarray([s.taylor_at(zz, 0)[0, 0] for zz in z]).ravel() for s in self.basis]
        sv = np.linalg.svd(np.stack(cols, axis=1), compute_uv=False)
        return float(sv[-1] / sv[0])


@dataclass(frozen=True)
class GapData:
    point: complex
    gaps: tuple
    order: int
    threshold: float = RANK_RTOL
    chart: str = "0"


def _jcolumn(c: np.ndarray) -> np.ndarray:
    """Taylor data of ``psi j`` from that of ``psi = u + j v`` (components ``(u, v)``)."""
    out = np.empty_like(c)
    out[..., 0::2] = -np.conj(c[..., 1::2])
    out[..., 1::2] = np.conj(c[..., 0::2])
    return out


def _gaps_from_columns(cols: list[np.ndarray], rtol: float) -> list[int] | None:
    blocks = [_blocks(c) for c in cols]
    depth = len(blocks[0])
    scale = max(float(np.max(np.abs(np.concatenate([np.concatenate(b) for b in blocks])))), 1e-300)
    mats = [np.stack([b[k] for b in blocks], axis=1) for k in range(depth)]
    remaining = list(range(len(cols)))
    gaps = []
    for k in range(depth):
        while remaining:
            m = mats[k][:, remaining]
            i, jj = np.unravel_index(np.argmax(np.abs(m)), m.shape)
            piv = m[i, jj]
            if abs(piv) <= rtol * scale:
                break
            j = remaining[jj]
            gaps.append(k)
            remaining.remove(j)
            for c in remaining:
                f = mats[k][i, c] / piv
                if f != 0:
                    for kk in range(k, depth):
                        mats[kk][:, c] -= f * mats[kk][:, j]
        if not remaining:
            return gaps
    return None


def weierstrass_gaps(system: LinearSystemH, p: complex = 0.0, depth: int = DEPTH, max_depth: int = MAX_DEPTH,
                     rtol: float = RANK_RTOL, chart: str = "0") -> GapData:
    """Gap sequence at ``p`` by full-pivoted column reduction of the Taylor coefficient matrix."""
    while True:
        cols = [s.taylor_at(p, depth) for s in system.basis]
        if system.quaternionic:
            cols = cols + [_jcolumn(c) for c in cols]
        gaps = _gaps_from_columns(cols, rtol)
        if gaps is not None:
            break
        if depth >= max_depth:
            raise DepthExceededError(f"coefficient matrix at {p} is rank deficient up to order {depth}")
        depth = min(2 * depth, max_depth)
    if system.quaternionic:
        gaps = gaps[::2]
    if any(b <= a for a, b in zip(gaps, gaps[1:])):
        raise ValueError(f"gap sequence {gaps} at {p} is not strictly increasing")
    order = sum(n - k for k, n in enumerate(gaps))
    return GapData(complex(p), tuple(gaps), int(order), rtol, chart)


def _wronskian_poly(coeffs: list[np.ndarray]) -> np.ndarray:
    """Coefficients (ascending) of the Wronskian of scalar polynomials."""
    from numpy.polynomial import polynomial as P

    n = len(coeffs)
    rows = []
    for c in coeffs:
        r, d = [], np.asarray(c, dtype=complex)
        for _ in range(n):
            r.append(d)
            d = P.polyder(d) if len(d) > 1 else np.zeros(1, dtype=complex)
        rows.append(r)

    def det(idx, depth):
        if depth == n:
            return np.ones(1, dtype=complex)
        total = np.zeros(1, dtype=complex)
        for pos, i in enumerate(idx):
            minor = det(idx[:pos] + idx[pos + 1:], depth + 1)
            term = P.polymul(rows[i][depth], minor)
            total = P.polyadd(total, term if pos % 2 == 0 else -term)
        return total

    return det(list(range(n)), 0)


def _trim(c: np.ndarray, rtol: float = 1e-12) -> np.ndarray:
    """Drop trailing coefficients below ``rtol`` times the largest one."""
    c = np.asarray(c)
    big = np.nonzero(np.abs(c) > rtol * np.max(np.abs(c), initial=0.0))[0]
    return c[: big[-1] + 1] if len(big) else c[:0]


def wronskian_order(system: LinearSystemH) -> int:
    """Total zero count of the Wronskian on CP^1 (both charts) for scalar polynomial systems."""
    w0 = _trim(_wronskian_poly([s.holomorphic_coeffs()[:, 0] for s in system.basis]))
    winf = _trim(_wronskian_poly([s.holomorphic_coeffs()[:, 0] for s in system.at_infinity().basis]))
    lead = np.nonzero(np.abs(winf) > 1e-12 * np.max(np.abs(winf)))[0]
    return int(len(w0) - 1 + (lead[0] if len(lead) else 0))


def auto_candidates(system: LinearSystemH, grid: int = 5) -> list[tuple[str, complex]]:
    """Candidate Weierstrass points of a polynomial system on CP^1.

    Chart ``"0"`` covers ``|z| <= 1`` and chart ``"inf"`` covers ``|w| < 1``.
    Candidates are the Wronskian roots, both chart origins, the zero sets of
    the basis sections and a coarse grid in each chart.
    """
    pts = [("0", 0j), ("inf", 0j)]
    roots = []
    try:
        w = _trim(_wronskian_poly([s.holomorphic_coeffs()[:, 0] for s in system.basis]))
        if len(w) > 1:
            roots.extend(np.roots(w[::-1]))
    except ValueError:
        pass
    for s in system.basis:
        try:
            c = _trim(s.holomorphic_coeffs()[:, 0])
        except ValueError:
            continue
        if len(c) > 1:
            roots.extend(np.roots(c[::-1]))
    g = np.linspace(-0.9, 0.9, grid)
    grid_pts = [complex(a, b) for a in g for b in g if abs(complex(a, b)) <= 0.9]
    # merge numerically multiple roots at their mean
    merged = []
    for r in sorted(roots, key=lambda z: (round(z.real, 3), round(z.imag, 3))):
        for m in merged:
            if abs(np.mean(m) - r) < 1e-3 * max(1.0, abs(r)):
                m.append(r)
                break
        else:
            merged.append([r])
    for m in merged:
        z = complex(np.mean(m))
        pts.append(("0", z) if abs(z) <= 1 else ("inf", 1 / z))
    pts += [("0", z) for z in grid_pts] + [("inf", z) for z in grid_pts if z != 0]
    out = []
    for ch, z in pts:
        if ch == "inf" and z == 0:
            pass
        elif ch == "inf" and abs(z) >= 1:
            ch, z = "0", 1 / z
        if not any(c == ch and abs(z - w) < 1e-9 for c, w in out):
            out.append((ch, z))
    return out


def order_h(system: LinearSystemH, candidates: Sequence[tuple[str, complex]] | Sequence[complex] | None = None,
            detail: bool = False):
    """Sum of ``ord_p H`` over the candidate points (chart ``"0"`` or ``"inf"``)."""
    if candidates is None:
        candidates = auto_candidates(system)
    cands = [c if isinstance(c, tuple) else ("0", complex(c)) for c in candidates]
    inf_sys = None
    total, rows = 0, []
    for chart, p in cands:
        if chart == "inf":
            inf_sys = inf_sys or system.at_infinity()
            gd = weierstrass_gaps(inf_sys, p, chart="inf")
        else:
            gd = weierstrass_gaps(system, p, chart="0")
        total += gd.order
        if gd.order:
            rows.append(gd)
    return (total, rows) if detail else total


def plucker_verify(d: int, g: int, n: int, ord_h: int, w: float, w_star: float):
    """``(W - W*)/4pi - (n+1)(n(1-g) - d) - ord H``; an exact ``int`` when both energies vanish."""
    classical = (n + 1) * (n * (1 - g) - d)
    if w == 0 and w_star == 0:
        return int(-classical - ord_h)
    return (w - w_star) / (4.0 * np.pi) - classical - ord_h


def willmore_lower_bound(n: int, d: int, g: int) -> float:
    """Lower bound for the Willmore energy of a degree-``d`` bundle with ``n + 1`` sections."""
    if n < 0 or g < 0:
        return 0.0
    cands = [0.0]
    if g == 0:
        cands.append(4.0 * np.pi * (n + 1) * (n - d))
    else:
        if n >= d and d <= g - 1:
            cands.append(np.pi / g * ((n + g - d) ** 2 - g * g))
        if n >= d - g + 1 and n >= g - 1 and d >= g - 1:
            cands.append(np.pi / g * ((n + 1) ** 2 - g * g))
        if g == 1 and d == 0:
            cands.append(np.pi * (n + 1) ** 2 if n % 2 else np.pi * ((n + 1) ** 2 - 1))
    return float(max(cands))


# ---------------------------------------------------------------------------
# Riemann-Roch index on flat tori


@dataclass(frozen=True)
class RiemannRochResult:
    h0: int
    h0_adj: int
    index: int
    expected: int
    oracle_h0: int
    singular_values: np.ndarray

    @property
    def passed(self) -> bool:
        return self.index == self.expected and self.h0 == self.oracle_h0


def _torus_wavevectors(domain):
    ms = np.fft.fftfreq(domain.nx, d=1.0 / domain.nx)
    ns = np.fft.fftfreq(domain.ny, d=1.0 / domain.ny)
    kx = 2 * np.pi * ms / domain.scale
    return ms, ns, kx


def riemann_roch_fourier_oracle(domain, q: complex) -> int:
    """Quaternionic kernel dimension from the per-mode ``2 x 2`` blocks of ``dbar + Q``."""
    ms, ns, kx = _torus_wavevectors(domain)
    count = 0
    for m, k1 in zip(ms, kx):
        for nn in ns:
            k2 = (2 * np.pi * nn / domain.scale - domain.tau.real * k1) / domain.tau.imag
            s = 0.5j * (k1 + 1j * k2)
            blk = np.array([[s, -np.conj(q)], [q, -np.conj(s)]])
            sv = np.linalg.svd(blk, compute_uv=False)
            count += int(np.sum(sv < 1e-9 * max(1.0, sv[0])))
    if count % 2:
        raise IndeterminateError("odd complex kernel dimension in the Fourier oracle")
    return count // 2


def _kernel_dim(op, rtol, gap):
    sv = np.linalg.svd(op, compute_uv=False)
    smax = sv[0]
    grey = (sv > rtol * smax) & (sv < gap * smax)
    if np.any(grey):
        raise IndeterminateError("singular values fall between the kernel and range thresholds", sv)
    return int(np.sum(sv <= rtol * smax)), sv


def riemann_roch_index_check(domain, q: complex, rtol: float = 1e-8, gap: float = 1e-4) -> RiemannRochResult:
    """Kernel dimensions of ``D(f, h) = (dbar f - conj(q) h, d h + q f)`` and of its adjoint.

    ``D`` is ``dbar + Q`` on the trivial quaternionic line bundle ``f + j h``
    with constant Hopf field ``q``.  Derivatives are spectral with the
    Nyquist wavenumber kept.  Singular values below ``rtol * s_max`` count as
    kernel; any value between ``rtol`` and ``gap`` (relative) makes the rank
    decision indeterminate.
    """
    nx, ny = domain.nx, domain.ny

    def dmat(n):
        f = np.fft.fft(np.eye(n), axis=0)
        return np.conj(f.T) / n @ (2j * np.pi * np.fft.fftfreq(n, d=1.0 / n)[:, None] * f)

    ds = np.kron(dmat(nx), np.eye(ny))
    dt = np.kron(np.eye(nx), dmat(ny))
    dx = ds / domain.scale
    dy = (dt - domain.tau.real * ds) / (domain.scale * domain.tau.imag)
    dbar = 0.5 * (dx + 1j * dy)
    dhol = 0.5 * (dx - 1j * dy)
    eye = np.eye(nx * ny)
    op = np.block([[dbar, -np.conj(q) * eye], [q * eye, dhol]])
    # formal adjoint on the dual bundle, assembled on its own
    adj = np.block([[-dhol, np.conj(q) * eye], [-q * eye, -dbar]])
    kern, sv = _kernel_dim(op, rtol, gap)
    kern_adj, _ = _kernel_dim(adj, rtol, gap)
    if kern % 2 or kern_adj % 2:
        raise IndeterminateError("odd complex kernel dimension", sv)
    h0, h0a = kern // 2, kern_adj // 2
    return RiemannRochResult(h0, h0a, h0 - h0a, 0, riemann_roch_fourier_oracle(domain, q), sv)
