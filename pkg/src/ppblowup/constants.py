"""Embedding constants, potential-well thresholds and blowup-theory constants.

The embedding constants are computed on the discrete (radial P1) space, so
they are one-sided approximations: ``C*_h <= C*`` and ``C**_h <= C**``.
"""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import asdict, dataclass, field
from enum import Enum

import numpy as np

from . import model
from .errors import NoConvergence, OutOfRegime, OutOfRegimeWarning
from .fem import DiscreteOperators, RadialMesh, discrete_norms, nonlinear_terms
from .linsolve import factorize


class Regime(str, Enum):
    NEGATIVE_ENERGY = "NegativeEnergy"
    SUBCRITICAL = "Subcritical"
    NOT_CERTIFIED = "NotBlowupCertified"

    @property
    def certified(self) -> bool:
        return self is not Regime.NOT_CERTIFIED


def _inverse_iteration(solve_K, Kb, Bb, x, tol, max_iter):
    lam = Kb.quad(x) / Bb.quad(x)
    for it in range(1, max_iter + 1):
        x = solve_K(Bb.matvec(x))
        x /= np.linalg.norm(x)
        lam_new = Kb.quad(x) / Bb.quad(x)
        if abs(lam_new - lam) <= tol * abs(lam_new):
            return lam_new, x, it
        lam = lam_new
    raise NoConvergence(f"inverse iteration did not converge in {max_iter} iterations")


def first_dirichlet_mode(ops: DiscreteOperators, tol=1e-13, max_iter=20_000, weight="M_0"):
    """Smallest generalized eigenpair of ``(K, B)`` with B = M_0 or M_s, by inverse
    iteration from a positive start. Returns ``(λ_min, x, iterations)``."""
    solver = factorize(ops.bands["K"])
    x0 = np.ones(ops.mesh.n_dofs)
    lam, x, it = _inverse_iteration(solver.solve, ops.bands["K"], ops.bands[weight], x0, tol, max_iter)
    if x[np.argmax(np.abs(x))] < 0:
        x = -x
    return lam, x, it


def estimate_Cstar(mesh: RadialMesh, ops: DiscreteOperators, p: float, tol: float = 1e-11, max_iter: int = 2000):
    """Best constant of ``‖φ‖_p <= C ‖∇φ‖_2`` on the discrete space.

    Normalised fixed-point iteration ``u <- K^{-1} F(u)``, ``‖u‖_p = 1``, started
    from the first Dirichlet mode. Converges to the discrete positive ground
    state of ``-Δφ = λ|φ|^{p-2}φ``; returns ``(C*_h, extremal, iterations)``.
    """
    if p < 2:
        raise ValueError("p must be >= 2")
    solver = factorize(ops.bands["K"])
    _, u, _ = first_dirichlet_mode(ops)
    u /= nonlinear_terms(mesh, u, p)[1] ** (1.0 / p)
    ratio = 1.0 / math.sqrt(ops.bands["K"].quad(u))
    for it in range(1, max_iter + 1):
        F, _ = nonlinear_terms(mesh, u, p)
        u = solver.solve(F)
        u /= nonlinear_terms(mesh, u, p)[1] ** (1.0 / p)
        new = 1.0 / math.sqrt(ops.bands["K"].quad(u))
        if abs(new - ratio) <= tol * new:
            ng, npn, _ = discrete_norms(mesh, ops, u, p)
            return npn / ng, u, it
        ratio = new
    raise NoConvergence(f"ground-state iteration did not converge in {max_iter} iterations; mesh too coarse or tol too tight")


def estimate_Cstarstar(mesh: RadialMesh, ops: DiscreteOperators, tol: float = 1e-13, max_iter: int = 20_000):
    """Hardy-type constant ``sup ∫u²/|x|^s / ‖∇u‖²`` on the discrete space, as
    ``1/λ_min`` of ``K x = λ M_s x``. Returns ``(C**_h, iterations)``."""
    lam, _, it = first_dirichlet_mode(ops, tol=tol, max_iter=max_iter, weight="M_s")
    return 1.0 / lam, it


def mountain_pass_d(Cstar, p):
    return (p - 2.0) / (2.0 * p) * Cstar ** (-2.0 * p / (p - 2.0))


def solve_theta2(J0, Cstar, p, rtol=1e-13):
    """Root of ``h(θ) = J0`` on the decreasing branch ``θ > θ1``, by bisection."""
    d = mountain_pass_d(Cstar, p)
    theta1 = model.theta1_of(Cstar, p)
    if J0 == d:
        warnings.warn("J(u0) = d: θ2 degenerates to θ1", OutOfRegimeWarning, stacklevel=2)
        return theta1
    if not 0.0 <= J0 < d:
        raise OutOfRegime(f"θ2 needs 0 <= J(u0) < d, got J0={J0!r}, d={d!r}")
    lo, hi = theta1, 2.0 * theta1
    while model.eval_h(hi, Cstar, p) >= J0:
        lo, hi = hi, 2.0 * hi
    for _ in range(400):
        mid = 0.5 * (lo + hi)
        if model.eval_h(mid, Cstar, p) >= J0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= rtol * hi:
            break
    return 0.5 * (lo + hi)


def compute_theta0(J0, Cstar, p):
    """``(p/2 - p C*^{2p/(p-2)} J0)^{1/(p-2)}``; exceeds 1 inside the well."""
    d = mountain_pass_d(Cstar, p)
    if J0 == d:
        warnings.warn("J(u0) = d: θ0 degenerates to 1", OutOfRegimeWarning, stacklevel=2)
    elif not 0.0 <= J0 < d:
        raise OutOfRegime(f"θ0 needs 0 <= J(u0) < d, got J0={J0!r}, d={d!r}")
    base = p / 2.0 - p * Cstar ** (2.0 * p / (p - 2.0)) * J0
    return max(base, 0.0) ** (1.0 / (p - 2.0))


def compute_C1(J0, theta0, p):
    if J0 < 0:
        return float(p)
    if theta0 is None or not theta0 > 1.0:
        raise OutOfRegime("C1 needs θ0 > 1, i.e. 0 <= J(u0) < d")
    t = theta0**p
    return (t - 1.0) * (p - 2.0) / t + 2.0


def compute_C2(J0, theta0, Cstarstar, p):
    if J0 < 0:
        return (p - 2.0) / (Cstarstar + 1.0)
    if theta0 is None or not theta0 > 1.0:
        raise OutOfRegime("C2 needs θ0 > 1, i.e. 0 <= J(u0) < d")
    t = theta0**2
    return (p - 2.0) * (t - 1.0) / (t * (Cstarstar + 1.0))


@dataclass
class ConstantsReport:
    Cstar: float
    Cstarstar: float
    d: float
    theta1: float
    theta2: float | None
    theta0: float | None
    C1: float | None
    C2: float | None
    G0: float | None
    H0: float
    J0: float
    I0: float
    regime: Regime
    branch: str | None
    p: float
    provenance: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["regime"] = self.regime.value
        return out

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), indent=2, **kw)

    @classmethod
    def from_dict(cls, data: dict) -> "ConstantsReport":
        data = dict(data)
        data["regime"] = Regime(data["regime"])
        return cls(**data)

    @property
    def G_shift(self):
        """Additive constant in ``G = shift − J`` (None outside the blowup regimes)."""
        if self.regime is Regime.NEGATIVE_ENERGY:
            return 0.0
        if self.regime is Regime.SUBCRITICAL:
            return self.d
        return None


@dataclass(frozen=True)
class EmbeddingEstimates:
    Cstar: float
    extremal: np.ndarray
    Cstarstar: float
    provenance: dict


def estimate_embeddings(mesh, ops, p, tol_Cstar=1e-11, tol_Cstarstar=1e-13) -> EmbeddingEstimates:
    Cstar, extremal, it1 = estimate_Cstar(mesh, ops, p, tol_Cstar)
    Cstarstar, it2 = estimate_Cstarstar(mesh, ops, tol_Cstarstar)
    mesh_info = {"M": mesh.n_elements, "quad_order": mesh.quad_order, "r1": float(mesh.nodes[1])}
    provenance = {
        "Cstar": {"estimator": "normalised ground-state fixed point u <- K^-1 F(u)", "tol": tol_Cstar, "iterations": it1, **mesh_info},
        "Cstarstar": {"estimator": "inverse power iteration on (K, M_s)", "tol": tol_Cstarstar, "iterations": it2, **mesh_info},
        "note": "discrete estimates under-approximate the exact constants (Rayleigh quotients over a subspace)",
    }
    return EmbeddingEstimates(Cstar, extremal, Cstarstar, provenance)


def classify(J0, I0, d, eps_I=0.0) -> Regime:
    if I0 < -eps_I and J0 < 0:
        return Regime.NEGATIVE_ENERGY
    if I0 < -eps_I and 0 <= J0 < d:
        return Regime.SUBCRITICAL
    return Regime.NOT_CERTIFIED


def build_constants_report(mesh, ops, u0, estimates: EmbeddingEstimates | None = None, eps_I: float = 0.0,
                           tol_Cstar=1e-11, tol_Cstarstar=1e-13) -> ConstantsReport:
    p = mesh.params.p
    if estimates is None:
        estimates = estimate_embeddings(mesh, ops, p, tol_Cstar, tol_Cstarstar)
    Cstar, Cstarstar = estimates.Cstar, estimates.Cstarstar
    ng, npn, wl2 = discrete_norms(mesh, ops, u0, p)
    J0, I0, H0 = model.eval_J(ng, npn, p), model.eval_I(ng, npn, p), model.eval_H(wl2, ng)
    d = mountain_pass_d(Cstar, p)
    regime = classify(J0, I0, d, eps_I)
    theta2 = theta0 = C1 = C2 = G0 = branch = None
    if regime is Regime.NEGATIVE_ENERGY:
        branch = "J0<0"
        C1, C2, G0 = compute_C1(J0, None, p), compute_C2(J0, None, Cstarstar, p), -J0
    elif regime is Regime.SUBCRITICAL:
        branch = "0<=J0<d"
        theta2 = solve_theta2(J0, Cstar, p)
        theta0 = compute_theta0(J0, Cstar, p)
        C1, C2, G0 = compute_C1(J0, theta0, p), compute_C2(J0, theta0, Cstarstar, p), d - J0
    return ConstantsReport(
        Cstar=Cstar, Cstarstar=Cstarstar, d=d, theta1=model.theta1_of(Cstar, p),
        theta2=theta2, theta0=theta0, C1=C1, C2=C2, G0=G0, H0=H0, J0=J0, I0=I0,
        regime=regime, branch=branch, p=p,
        provenance={**estimates.provenance, "eps_I": eps_I, "n": mesh.params.n, "s": mesh.params.s, "R": mesh.params.R},
    )
