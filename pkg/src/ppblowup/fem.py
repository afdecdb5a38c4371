"""Radial P1 finite elements on the ball B_R(0) ⊂ R^n.

A radial function u(|x|) is represented by its nodal values on
``0 = r_0 < r_1 < ... < r_M = R``. The Dirichlet node r_M is eliminated, so
state vectors have length M and the symmetry condition at r = 0 is natural.
All integrals keep the unit-sphere area factor, so discrete norms are the
n-dimensional ones.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from math import gamma, pi

import numpy as np
import scipy.sparse as sp

from .model import ModelParams


def sphere_area(n: int) -> float:
    """Surface area of the unit sphere S^{n-1} ⊂ R^n."""
    return 2.0 * pi ** (n / 2.0) / gamma(n / 2.0)


@dataclass(frozen=True, eq=False)
class RadialMesh:
    params: ModelParams
    nodes: np.ndarray
    quad_order: int = 6

    def __post_init__(self):
        r = np.asarray(self.nodes, dtype=float)
        object.__setattr__(self, "nodes", r)
        if r.ndim != 1 or r.size < 5:
            raise ValueError("mesh needs at least 4 elements")
        if r[0] != 0.0 or r[-1] != self.params.R:
            raise ValueError("mesh must start at 0 and end at R")
        if np.any(np.diff(r) <= 0):
            raise ValueError("mesh nodes must be strictly increasing")
        if self.quad_order < 4:
            raise ValueError("quad_order must be >= 4")

    @property
    def n_elements(self) -> int:
        return self.nodes.size - 1

    @property
    def n_dofs(self) -> int:
        return self.nodes.size - 1

    @cached_property
    def quadrature(self):
        """Physical Gauss points ``(M, q)``, weights incl. Jacobian, and the two
        reference basis values at the points."""
        xi, w = np.polynomial.legendre.leggauss(self.quad_order)
        a, b = self.nodes[:-1, None], self.nodes[1:, None]
        h = b - a
        r = a + 0.5 * h * (xi + 1.0)
        wq = 0.5 * h * w
        N0 = 0.5 * (1.0 - xi)
        N1 = 0.5 * (1.0 + xi)
        return r, wq, N0, N1

    def radial_weight(self, exponent: float) -> np.ndarray:
        """``ω_{n-1} · r^exponent · w_q`` at every Gauss point."""
        r, wq, _, _ = self.quadrature
        return sphere_area(self.params.n) * r**exponent * wq

    @cached_property
    def load_weight(self) -> np.ndarray:
        return self.radial_weight(self.params.n - 1)

    def interpolate(self, f) -> np.ndarray:
        """Nodal interpolant of a radial function, restricted to the free nodes."""
        return np.asarray(f(self.nodes[:-1]), dtype=float)


def build_mesh(params: ModelParams, M: int, grading: float = 2.0, quad_order: int = 6) -> RadialMesh:
    """Nodes ``r_k = R (k/M)^grading``; grading > 1 clusters nodes at the origin."""
    if M < 4:
        raise ValueError("M must be >= 4")
    if not grading > 0:
        raise ValueError("grading must be positive")
    k = np.arange(M + 1)
    nodes = params.R * (k / M) ** grading
    nodes[-1] = params.R
    return RadialMesh(params, nodes, quad_order)


def _assemble(k00, k01, k11, size):
    i = np.arange(size - 1)
    data = np.concatenate([k00, k11, k01, k01])
    row = np.concatenate([i, i + 1, i, i + 1])
    col = np.concatenate([i, i + 1, i + 1, i])
    return sp.coo_matrix((data, (row, col)), shape=(size, size)).tocsr()


def assemble_stiffness(mesh: RadialMesh) -> sp.csr_matrix:
    """Full (M+1)×(M+1) stiffness matrix ``ω ∫ φ_i' φ_j' r^{n-1} dr``."""
    h = np.diff(mesh.nodes)
    elem = mesh.radial_weight(mesh.params.n - 1).sum(axis=1) / h**2
    return _assemble(elem, -elem, elem, mesh.nodes.size)


def assemble_weighted_mass(mesh: RadialMesh, s: float) -> sp.csr_matrix:
    """Full (M+1)×(M+1) mass matrix ``ω ∫ φ_i φ_j r^{n-1-s} dr``."""
    if not 0.0 <= s <= 2.0:
        raise ValueError("s must lie in [0, 2]")
    _, _, N0, N1 = mesh.quadrature
    w = mesh.radial_weight(mesh.params.n - 1 - s)
    return _assemble(w @ (N0 * N0), w @ (N0 * N1), w @ (N1 * N1), mesh.nodes.size)


def _pad(u):
    return np.append(u, 0.0)


def nonlinear_terms(mesh: RadialMesh, u: np.ndarray, p: float):
    """Load vector ``ω ∫ |u_h|^{p-2} u_h φ_i r^{n-1} dr`` and ``‖u_h‖_p^p`` in one pass."""
    _, _, N0, N1 = mesh.quadrature
    uf = _pad(u)
    uh = uf[:-1, None] * N0 + uf[1:, None] * N1
    if p == 4.0:
        g = uh * uh * uh
    elif p == 3.0:
        g = np.abs(uh) * uh
    else:
        g = np.abs(uh) ** (p - 2.0) * uh
    g *= mesh.load_weight
    F = np.zeros(uf.size)
    F[:-1] += g @ N0
    F[1:] += g @ N1
    return F[:-1], float(np.vdot(g, uh))


def assemble_nonlinear_load(mesh: RadialMesh, u: np.ndarray, p: float) -> np.ndarray:
    return nonlinear_terms(mesh, u, p)[0]


def lp_norm_power(mesh: RadialMesh, u: np.ndarray, p: float) -> float:
    return nonlinear_terms(mesh, u, p)[1]


@dataclass(frozen=True, eq=False)
class Banded:
    """Symmetric tridiagonal matrix stored as diagonal and superdiagonal."""

    diag: np.ndarray
    off: np.ndarray

    @classmethod
    def from_sparse(cls, A):
        return cls(np.asarray(A.diagonal()).copy(), np.asarray(A.diagonal(1)).copy())

    def matvec(self, u):
        y = self.diag * u
        y[:-1] += self.off * u[1:]
        y[1:] += self.off * u[:-1]
        return y

    def quad(self, u) -> float:
        return float(self.diag @ (u * u) + 2.0 * self.off @ (u[:-1] * u[1:]))

    def __add__(self, other):
        return Banded(self.diag + other.diag, self.off + other.off)

    def scaled(self, c):
        return Banded(c * self.diag, c * self.off)

    def to_sparse(self):
        return sp.diags([self.off, self.diag, self.off], [-1, 0, 1], format="csr")


@dataclass(frozen=True, eq=False)
class DiscreteOperators:
    """Operators restricted to the free nodes (Dirichlet node removed)."""

    mesh: RadialMesh
    K: sp.csr_matrix
    M_s: sp.csr_matrix
    M_0: sp.csr_matrix
    bands: dict = field(repr=False)

    @property
    def s(self) -> float:
        return self.mesh.params.s


def assemble_operators(mesh: RadialMesh) -> DiscreteOperators:
    free = slice(0, mesh.n_dofs)
    K = assemble_stiffness(mesh)[free, free].tocsr()
    M_s = assemble_weighted_mass(mesh, mesh.params.s)[free, free].tocsr()
    M_0 = assemble_weighted_mass(mesh, 0.0)[free, free].tocsr()
    bands = {name: Banded.from_sparse(A) for name, A in (("K", K), ("M_s", M_s), ("M_0", M_0))}
    return DiscreteOperators(mesh, K, M_s, M_0, bands)


def discrete_norms(mesh: RadialMesh, ops: DiscreteOperators, u: np.ndarray, p: float):
    """Return ``(‖∇u_h‖_2, ‖u_h‖_p, ∫ u_h²/|x|^s)``."""
    ng2 = max(ops.bands["K"].quad(u), 0.0)
    wl2 = max(ops.bands["M_s"].quad(u), 0.0)
    return float(np.sqrt(ng2)), lp_norm_power(mesh, u, p) ** (1.0 / p), wl2
