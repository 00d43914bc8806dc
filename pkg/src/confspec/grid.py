"""Radial grids and piecewise-linear assembly of 1-D self-adjoint weak forms.

A grid is a strictly increasing set of interior nodes of either the polar
interval (0, pi) or an arclength interval (0, T).  Endpoints are never nodes:
the coordinate singularities at the poles are handled by a small offset plus
either an essential zero condition or a natural condition, chosen per angular
mode by the callers.

``assemble_weak_form`` discretizes

    a(u, v) = int p u' v' + q u v dx ,     m(u, v) = int w u v dx

with P1 elements and a two-point Gauss rule per cell, which is exact for the
polynomial part and keeps both matrices tridiagonal.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp

__all__ = [
    "GradingSpec",
    "RadialGrid",
    "WeakForm1D",
    "BandedSymmetric",
    "make_grid",
    "assemble_weak_form",
]

_GAUSS_OFFSETS = (0.5 - 0.5 / math.sqrt(3.0), 0.5 + 0.5 / math.sqrt(3.0))

MIN_NODES = 16


@dataclass(frozen=True)
class GradingSpec:
    """Node placement rule: ``uniform`` or ``geometric-near-left``.

    Geometric grading starts at ``r_min`` and grows spacings by ``ratio``
    per step until they reach the uniform spacing that fills the rest of
    the interval; consecutive spacing ratios stay within [1, ratio].
    """

    kind: str = "uniform"
    ratio: float | None = None
    r_min: float | None = None

    def __post_init__(self):
        if self.kind not in ("uniform", "geometric-near-left"):
            raise ValueError(f"unknown grading kind {self.kind!r}")
        if self.kind == "geometric-near-left":
            if self.r_min is None or self.r_min <= 0.0:
                raise ValueError("geometric grading requires r_min > 0")
            if self.ratio is None or self.ratio <= 1.0:
                raise ValueError("geometric grading requires ratio > 1")


@dataclass(frozen=True)
class RadialGrid:
    """Strictly increasing interior nodes of (0, span)."""

    nodes: np.ndarray
    coordinate_kind: str  # "polar" | "arclength"
    grading: GradingSpec
    span: float  # full domain is the open interval (0, span)

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        object.__setattr__(self, "nodes", nodes)
        if nodes.ndim != 1 or nodes.size < MIN_NODES:
            raise ValueError("node count too small")
        if not np.all(np.diff(nodes) > 0.0):
            raise ValueError("grid nodes must be strictly increasing")
        if nodes[0] <= 0.0 or nodes[-1] >= self.span:
            raise ValueError("grid nodes must lie strictly inside (0, span)")

    @property
    def n_nodes(self) -> int:
        return self.nodes.size


@dataclass(frozen=True)
class WeakForm1D:
    """Coefficients of int(p u'v' + q u v) against mass int(w u v)."""

    p: Callable[[np.ndarray], np.ndarray]
    q: Callable[[np.ndarray], np.ndarray]
    w: Callable[[np.ndarray], np.ndarray]
    essential_left: bool = False
    essential_right: bool = False


@dataclass(frozen=True)
class BandedSymmetric:
    """Symmetric banded matrix in LAPACK lower storage.

    ``bands[d, j] = A[j + d, j]`` for d = 0..bandwidth; entries past the
    matrix edge are zero padding.  Only the lower triangle is stored, the
    matrix is symmetric by construction.
    """

    bands: np.ndarray

    def __post_init__(self):
        bands = np.asarray(self.bands, dtype=float)
        if bands.ndim != 2:
            raise ValueError("bands must be a 2-d array")
        object.__setattr__(self, "bands", bands)

    @property
    def size(self) -> int:
        return self.bands.shape[1]

    @property
    def bandwidth(self) -> int:
        return self.bands.shape[0] - 1

    @classmethod
    def from_tridiagonal(cls, diag: np.ndarray, sub: np.ndarray) -> "BandedSymmetric":
        m = len(diag)
        bands = np.zeros((2, m))
        bands[0] = diag
        bands[1, : m - 1] = sub
        return cls(bands)

    @classmethod
    def from_diagonal(cls, diag: np.ndarray) -> "BandedSymmetric":
        return cls(np.asarray(diag, dtype=float)[None, :].copy())

    def to_sparse(self) -> sp.csc_matrix:
        m = self.size
        offsets = list(range(self.bandwidth + 1))
        diags = [self.bands[d, : m - d] for d in offsets]
        upper = [self.bands[d, : m - d] for d in offsets[1:]]
        mat = sp.diags(
            diags + upper,
            [-d for d in offsets] + offsets[1:],
            shape=(m, m),
            format="csc",
        )
        return mat

    def to_dense(self) -> np.ndarray:
        return self.to_sparse().toarray()

    def matvec(self, x: np.ndarray) -> np.ndarray:
        m = self.size
        y = self.bands[0] * x
        for d in range(1, self.bandwidth + 1):
            band = self.bands[d, : m - d]
            y[d:] += band * x[: m - d]
            y[: m - d] += band * x[d:]
        return y

    def scaled(self, c: float) -> "BandedSymmetric":
        return BandedSymmetric(c * self.bands)

    def add_scaled(self, other: "BandedSymmetric", c: float) -> "BandedSymmetric":
        """Return self + c * other, aligning bandwidths."""
        bw = max(self.bandwidth, other.bandwidth)
        m = self.size
        if other.size != m:
            raise ValueError("size mismatch")
        bands = np.zeros((bw + 1, m))
        bands[: self.bandwidth + 1] += self.bands
        bands[: other.bandwidth + 1] += c * other.bands
        return BandedSymmetric(bands)


def _uniform_nodes(N: int, span: float) -> np.ndarray:
    return span * np.arange(1, N + 1) / (N + 1)


def _geometric_nodes(N: int, span: float, ratio: float, r_min: float) -> np.ndarray:
    """Geometric prefix r_min * ratio^j, uniform suffix ending one spacing
    short of ``span``.  The split index is chosen so the junction spacing
    ratio stays within [1, ratio]."""
    if r_min >= span:
        raise ValueError("r_min must be smaller than the domain span")
    K = None
    for k in range(1, N - 1):
        n_k = r_min * ratio**k
        if n_k >= span:
            break
        s_k = r_min * ratio ** (k - 1) * (ratio - 1.0)
        h_k = (span - n_k) / (N - k)
        if h_k <= ratio * s_k:
            K = k
            break
    if K is None:
        raise ValueError(
            "geometric grading infeasible: ratio/r_min leave no room for a "
            "uniform tail; increase N or the ratio"
        )
    n_K = r_min * ratio**K
    h = (span - n_K) / (N - K)
    nodes = np.empty(N)
    nodes[: K + 1] = r_min * ratio ** np.arange(K + 1)
    nodes[K + 1 :] = n_K + h * np.arange(1, N - K)
    return nodes


def make_grid(
    kind: str,
    N: int,
    grading: GradingSpec | None = None,
    *,
    length: float | None = None,
) -> RadialGrid:
    """Build a radial grid with N interior nodes.

    ``kind`` is "polar" (domain (0, pi)) or "arclength" (domain (0, length),
    ``length`` required).  Uniform grading places nodes at span*i/(N+1);
    geometric grading resolves the left end down to ``r_min``.
    """
    if N < MIN_NODES:
        raise ValueError("node count too small")
    if kind == "polar":
        span = math.pi
        if length is not None:
            raise ValueError("length applies to arclength grids only")
    elif kind == "arclength":
        if length is None or length <= 0.0:
            raise ValueError("arclength grids require a positive length")
        span = float(length)
    else:
        raise ValueError(f"unknown coordinate kind {kind!r}")
    grading = grading or GradingSpec()
    if grading.kind == "uniform":
        nodes = _uniform_nodes(N, span)
    else:
        if kind == "polar" and grading.r_min >= math.pi / 2:
            raise ValueError("r_min must be below pi/2 for polar grids")
        nodes = _geometric_nodes(N, span, grading.ratio, grading.r_min)
    return RadialGrid(nodes=nodes, coordinate_kind=kind, grading=grading, span=span)


def _check_finite(name: str, values: np.ndarray, cells: np.ndarray) -> None:
    bad = ~np.isfinite(values)
    if np.any(bad):
        i = int(np.argmax(bad))
        raise ValueError(
            f"non-finite coefficient {name!r} at cell {i} (x = {cells[i]:.6g})"
        )


def assemble_weak_form(
    form: WeakForm1D, grid: RadialGrid
) -> tuple[BandedSymmetric, BandedSymmetric]:
    """Assemble the tridiagonal pair (A, M) of a 1-D weak form on a grid.

    An essential end pins the solution to zero at the domain wall: the
    boundary cell between the wall and the first (or last) node is included,
    with the wall value's row and column eliminated.  A natural end simply
    truncates the integrals at the offset node, which is the right treatment
    for the coordinate poles where the measure weight vanishes.

    Both returned matrices are exactly symmetric by construction.
    """
    nodes = grid.nodes
    m = nodes.size
    he = np.diff(nodes)
    left = nodes[:-1]

    a_diag = np.zeros(m)
    a_sub = np.zeros(m - 1)
    m_diag = np.zeros(m)
    m_sub = np.zeros(m - 1)
    for g in _GAUSS_OFFSETS:
        x = left + g * he
        wq = 0.5 * he
        pv = np.asarray(form.p(x), dtype=float)
        qv = np.asarray(form.q(x), dtype=float)
        wv = np.asarray(form.w(x), dtype=float)
        for name, vals in (("p", pv), ("q", qv), ("w", wv)):
            _check_finite(name, vals, x)
        phi0 = 1.0 - g
        phi1 = g
        stiff = wq * pv / he**2
        a_diag[:-1] += stiff + wq * qv * phi0 * phi0
        a_diag[1:] += stiff + wq * qv * phi1 * phi1
        a_sub += -stiff + wq * qv * phi0 * phi1
        m_diag[:-1] += wq * wv * phi0 * phi0
        m_diag[1:] += wq * wv * phi1 * phi1
        m_sub += wq * wv * phi0 * phi1

    # boundary cells of pinned ends (the hat rises from 0 at the wall)
    boundary = []
    if form.essential_left:
        boundary.append((0.0, nodes[0], 0))
    if form.essential_right:
        boundary.append((nodes[-1], grid.span, m - 1))
    for wall_lo, wall_hi, idx in boundary:
        hb = wall_hi - wall_lo
        for g in _GAUSS_OFFSETS:
            x = np.array([wall_lo + g * hb])
            wq = 0.5 * hb
            pv = np.asarray(form.p(x), dtype=float)
            qv = np.asarray(form.q(x), dtype=float)
            wv = np.asarray(form.w(x), dtype=float)
            for name, vals in (("p", pv), ("q", qv), ("w", wv)):
                _check_finite(name, vals, x)
            phi = g if idx == 0 else 1.0 - g  # rises toward the interior
            a_diag[idx] += wq * (pv[0] / hb**2 + qv[0] * phi * phi)
            m_diag[idx] += wq * wv[0] * phi * phi

    A = BandedSymmetric.from_tridiagonal(a_diag, a_sub)
    M = BandedSymmetric.from_tridiagonal(m_diag, m_sub)
    return A, M
