"""Problem parameters and the scalar functionals J, I, H, G and h.

Everything here works on precomputed norms, so the discretization error
lives entirely in :mod:`ppblowup.fem`.
"""
from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class ModelParams:
    """Parameters of ``u_t/|x|^s - Δu - Δu_t = |u|^{p-2}u`` on the ball B_R(0) ⊂ R^n."""

    n: int = 3
    s: float = 1.0
    p: float = 4.0
    R: float = 1.0

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 3:
            raise ValueError(f"dimension n must be an integer >= 3, got {self.n}")
        if not 0.0 <= self.s <= 2.0:
            raise ValueError(f"s must lie in [0, 2], got {self.s}")
        if not 2.0 < self.p < self.p_critical:
            raise ValueError(f"p must lie in (2, {self.p_critical:g}), got {self.p}")
        if not self.R > 0.0:
            raise ValueError(f"radius R must be positive, got {self.R}")

    @property
    def p_critical(self) -> float:
        return 2.0 * self.n / (self.n - 2)


@dataclass(frozen=True)
class FunctionalSnapshot:
    t: float
    J: float
    I: float
    H: float
    G: float
    norm_p: float
    norm_grad: float
    weighted_l2: float

    @classmethod
    def from_norms(cls, t, norm_grad, norm_p, weighted_l2, p, G_shift=None):
        """Build a snapshot; ``G_shift`` is d in the subcritical regime, 0 for
        negative energy, or None when no gap functional is defined (G = nan)."""
        J = eval_J(norm_grad, norm_p, p)
        G = float("nan") if G_shift is None else G_shift - J
        return cls(
            t=t,
            J=J,
            I=eval_I(norm_grad, norm_p, p),
            H=eval_H(weighted_l2, norm_grad),
            G=G,
            norm_p=norm_p,
            norm_grad=norm_grad,
            weighted_l2=weighted_l2,
        )


def eval_J(norm_grad, norm_p, p):
    """Energy ``½‖∇u‖² − ‖u‖_p^p / p``."""
    return 0.5 * norm_grad**2 - norm_p**p / p


def eval_I(norm_grad, norm_p, p):
    """Nehari functional ``‖∇u‖² − ‖u‖_p^p``."""
    return norm_grad**2 - norm_p**p


def eval_H(weighted_l2, norm_grad):
    """``½(∫u²/|x|^s + ‖∇u‖²)``."""
    return 0.5 * (weighted_l2 + norm_grad**2)


def eval_G(J, J0, d):
    """Gap functional: ``-J`` if the run started with negative energy, else ``d - J``."""
    return -J if J0 < 0 else d - J


def eval_h(theta, Cstar, p):
    """Lower envelope ``θ²/(2C*²) − θ^p/p`` of J in terms of ``θ = ‖u‖_p``."""
    return theta**2 / (2.0 * Cstar**2) - theta**p / p


def theta1_of(Cstar, p):
    """Maximiser of :func:`eval_h`."""
    return Cstar ** (-2.0 / (p - 2.0))


def ray_scaling(lam, norm_grad, norm_p, p):
    """``(J(λφ), I(λφ))`` from the norms of φ."""
    a2 = lam**2 * norm_grad**2
    bp = lam**p * norm_p**p
    return 0.5 * a2 - bp / p, a2 - bp


def nehari_ray_threshold(norm_grad, norm_p, p):
    """λ above which ``I(λφ) < 0``; also the maximiser of ``λ ↦ J(λφ)``."""
    return (norm_grad**2 / norm_p**p) ** (1.0 / (p - 2.0))


def negative_energy_ray_threshold(norm_grad, norm_p, p):
    """λ above which ``J(λφ) < 0``."""
    return (p * norm_grad**2 / (2.0 * norm_p**p)) ** (1.0 / (p - 2.0))


def ray_max_energy(norm_grad, norm_p, p):
    """``max_λ J(λφ) = ((p−2)/2p)·(‖∇φ‖^p/‖φ‖_p^p)^{2/(p−2)}``."""
    return (p - 2.0) / (2.0 * p) * (norm_grad**p / norm_p**p) ** (2.0 / (p - 2.0))
