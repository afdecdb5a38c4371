"""Semi-implicit time stepping of ``(M_s + K) u' + K u = F(u)`` up to blowup.

The linear part is treated with a θ-scheme, the nonlinearity explicitly, and
the step shrinks like the local doubling time ``1/‖u‖_∞^{p-2}``. Blowup is
declared when H crosses ``blowup_factor·H(0)`` and the blowup time is then
extrapolated from the power-law tail of H.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import NamedTuple

import numpy as np

from . import model
from .errors import InsufficientWindow
from .fem import DiscreteOperators, RadialMesh, nonlinear_terms
from .linsolve import factorize
from . import _kernels as _k

COLUMNS = ("t", "dt", "H", "J", "I", "G", "norm_p", "norm_grad", "weighted_l2")


@dataclass(frozen=True)
class TimeStepConfig:
    dt0: float = 1e-4
    dt_min: float = 1e-30
    blowup_factor: float = 1e8
    adapt_exponent: float | None = None  # None -> p - 2
    max_steps: int = 50_000_000
    theta_scheme: float = 1.0
    t_max: float | None = None  # None -> horizon_factor * T_upper, or uncertified_window
    horizon_factor: float = 3.0
    uncertified_window: float = 10.0
    terminal_factor: float = 1e3
    n_checkpoints: int = 100

    def __post_init__(self):
        if not self.dt_min > 0:
            raise ValueError("dt_min must be positive")
        if not self.dt0 >= self.dt_min:
            raise ValueError("dt0 must be >= dt_min")
        if not self.blowup_factor > 1:
            raise ValueError("blowup_factor must exceed 1")
        if not 0.5 <= self.theta_scheme <= 1.0:
            raise ValueError("theta_scheme must lie in [1/2, 1]")
        if self.max_steps < 1:
            raise ValueError("max_steps must be positive")


class Status(str, Enum):
    BLOWUP = "BlowupDetected"
    GLOBAL = "GlobalWindowReached"
    UNDERFLOW = "StepUnderflow"
    MAX_STEPS = "MaxStepsReached"


class BlowupFit(NamedTuple):
    T: float
    exponent_source: str  # "C1" or "p"
    exponent: float
    correlation: float
    n_points: int


@dataclass
class Trajectory:
    t: np.ndarray
    dt: np.ndarray  # step that produced the row; 0 for the initial row
    H: np.ndarray
    J: np.ndarray
    I: np.ndarray
    G: np.ndarray
    norm_p: np.ndarray
    norm_grad: np.ndarray
    weighted_l2: np.ndarray
    status: Status
    p: float
    dissipation: np.ndarray | None = None  # cumulative Σ δuᵀ(M_s+K)δu/dt
    umax: np.ndarray | None = None
    states: list = field(default_factory=list)
    T_num: float | None = None
    T_threshold: float | None = None
    fit: BlowupFit | None = None
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return self.t.size

    @property
    def H0(self) -> float:
        return float(self.H[0])

    @property
    def J0(self) -> float:
        return float(self.J[0])

    @property
    def snapshots(self):
        return [
            model.FunctionalSnapshot(*(float(getattr(self, c)[k]) for c in ("t", "J", "I", "H", "G", "norm_p", "norm_grad", "weighted_l2")))
            for k in range(len(self))
        ]

    def column(self, name) -> np.ndarray:
        return getattr(self, name)

    def with_columns(self, **cols) -> "Trajectory":
        return replace(self, **{k: np.asarray(v, dtype=float) for k, v in cols.items()})

    def terminal_mask(self, factor=1e3) -> np.ndarray:
        return self.H >= factor * self.H0


def _rhs_matrix(ops: DiscreteOperators):
    return ops.bands["M_s"] + ops.bands["K"]


def _advance(A, K, solver, u, F, dt, theta):
    rhs = A.matvec(u) + dt * F
    if theta != 1.0:
        rhs -= (1.0 - theta) * dt * K.matvec(u)
    return solver.solve(rhs)


def step(ops: DiscreteOperators, solver, u, dt, cfg: TimeStepConfig, nonlinear: bool = True):
    """One step: ``(M_s+K)(u⁺−u)/dt + K(θu⁺ + (1−θ)u) = F(u)``.

    ``solver`` factors ``M_s + K + θ dt K``; pass None to factor here.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    A, K = _rhs_matrix(ops), ops.bands["K"]
    if solver is None:
        solver = factorize(A + K.scaled(cfg.theta_scheme * dt))
    F = nonlinear_terms(ops.mesh, u, ops.mesh.params.p)[0] if nonlinear else np.zeros_like(u)
    return _advance(A, K, solver, u, F, dt, cfg.theta_scheme)


def adapt_dt(u, dt_prev, cfg: TimeStepConfig, p: float | None = None) -> float:
    """``dt0 / (1 + ‖u‖_∞^q)`` clamped to ``[dt_min, dt0]``; q defaults to p − 2."""
    q = cfg.adapt_exponent
    if q is None:
        if p is None:
            raise ValueError("adapt_exponent unset and p not given")
        q = p - 2.0
    umax = float(np.max(np.abs(u))) if u.size else 0.0
    dt = cfg.dt0 / (1.0 + umax**q)
    return min(max(dt, cfg.dt_min), cfg.dt0)


def horizon_for(cfg: TimeStepConfig, constants) -> float:
    if cfg.t_max is not None:
        return cfg.t_max
    if constants is not None and constants.regime.certified:
        from .bounds import upper_time_bound

        return cfg.horizon_factor * upper_time_bound(constants.H0, constants.G0, constants.C1)
    return cfg.uncertified_window


_STOP = {
    _k.BLOWUP: Status.BLOWUP,
    _k.WINDOW: Status.GLOBAL,
    _k.DT_FLOOR: Status.UNDERFLOW,
    _k.CLOCK_STALL: Status.UNDERFLOW,
    _k.NONFINITE: Status.UNDERFLOW,
}
_STOP_NOTE = {
    _k.DT_FLOOR: "adaptive step reached dt_min",
    _k.CLOCK_STALL: "time step below the resolution of the clock",
    _k.NONFINITE: "nonfinite state or nonpositive pivot",
}


def run(mesh: RadialMesh, ops: DiscreteOperators, u0, cfg: TimeStepConfig, constants=None,
        chunk: int = 200_000) -> Trajectory:
    """Integrate from ``u0`` until blowup is detected, the time window closes,
    or the step underflows. A functional snapshot is recorded every step;
    states are kept at about ``n_checkpoints`` times and H levels."""
    p = mesh.params.p
    Kb, Mb = ops.bands["K"], ops.bands["M_s"]
    _, _, N0, N1 = mesh.quadrature
    W = np.ascontiguousarray(mesh.load_weight)
    G_shift = None if constants is None else constants.G_shift
    horizon = horizon_for(cfg, constants)
    q = p - 2.0 if cfg.adapt_exponent is None else float(cfg.adapt_exponent)

    u = np.array(u0, dtype=float)
    F = np.zeros_like(u)
    npp0 = _k.nonlinear_into(u, N0, N1, W, p, F)
    ng20, wl20 = Kb.quad(u), Mb.quad(u)
    H0 = 0.5 * (wl20 + ng20)
    umax0 = float(np.abs(u).max()) if u.size else 0.0
    threshold = cfg.blowup_factor * H0
    h_ratio = cfg.blowup_factor ** (1.0 / cfg.n_checkpoints)
    t_ckpt, h_ckpt = horizon / cfg.n_checkpoints, H0 * h_ratio if H0 > 0 else math.inf
    clock = np.array([0.0, 0.0, 0.0, umax0])
    parts = [tuple(np.array([x]) for x in (0.0, 0.0, ng20, npp0, wl20, 0.0, umax0))]
    states = [(0.0, u.copy())]
    status, note, steps = Status.MAX_STEPS, "", 0
    while steps < cfg.max_steps:
        n = min(chunk, cfg.max_steps - steps)
        bufs = tuple(np.empty(n) for _ in range(7))
        rows, code = _k.march(u, F, clock, Kb.diag, Kb.off, Mb.diag, Mb.off, N0, N1, W, p,
                              cfg.theta_scheme, cfg.dt0, cfg.dt_min, q, threshold, horizon,
                              t_ckpt, h_ckpt, n, *bufs)
        steps += rows
        parts.append(tuple(b[:rows] for b in bufs))
        if code == _k.CHECKPOINT:
            t, H = clock[0], 0.5 * (bufs[4][rows - 1] + bufs[2][rows - 1])
            states.append((t, u.copy()))
            while t_ckpt <= t:
                t_ckpt += horizon / cfg.n_checkpoints
            while h_ckpt <= H:
                h_ckpt *= h_ratio
        elif code != _k.CONTINUE:
            status, note = _STOP[code], _STOP_NOTE.get(code, "")
            break
    t_arr, dt_arr, ng2, npp, wl2, diss, umax = (np.concatenate(c) for c in zip(*parts))
    if states[-1][0] != t_arr[-1]:
        states.append((float(t_arr[-1]), u.copy()))

    J = 0.5 * ng2 - npp / p
    traj = Trajectory(
        t=t_arr, dt=dt_arr, H=0.5 * (wl2 + ng2), J=J, I=ng2 - npp,
        G=np.full_like(J, np.nan) if G_shift is None else G_shift - J,
        norm_p=np.maximum(npp, 0.0) ** (1.0 / p), norm_grad=np.sqrt(np.maximum(ng2, 0.0)),
        weighted_l2=wl2, status=status, p=p, dissipation=diss, umax=umax, states=states,
        T_threshold=float(t_arr[-1]) if status is Status.BLOWUP else None,
        meta={"dt0": cfg.dt0, "blowup_factor": cfg.blowup_factor, "horizon": horizon,
              "theta_scheme": cfg.theta_scheme, "M": mesh.n_elements, "steps": steps, "stop_note": note},
    )
    if status is Status.BLOWUP:
        C1 = constants.C1 if constants is not None and constants.C1 is not None else p
        try:
            traj.fit = fit_blowup_time(traj.t, traj.H, C1, p, cfg.terminal_factor)
            traj.T_num = float(max(traj.fit.T, traj.T_threshold))
        except InsufficientWindow as exc:
            traj.meta["extrapolation"] = str(exc)
    return traj


def _linfit(x, y, w=None):
    """Weighted least-squares line ``y ≈ a + b x``; returns (b, a, weighted correlation)."""
    w = np.ones_like(y) if w is None else w
    W = w.sum()
    mx, my = (w * x).sum() / W, (w * y).sum() / W
    dx, dy = x - mx, y - my
    sxx, sxy, syy = (w * dx * dx).sum(), (w * dx * dy).sum(), (w * dy * dy).sum()
    if sxx <= 0:
        return 0.0, my, 0.0
    slope = sxy / sxx
    r = sxy / np.sqrt(sxx * syy) if syy > 0 else 0.0
    return slope, my - slope * mx, r


def fit_blowup_time(t, H, C1, p, terminal_factor=1e3, min_points=10, min_corr=0.99) -> BlowupFit:
    """Fit ``H^{-(C1-2)/2}`` linearly in t on the terminal window (H >= factor·H(0))
    by least squares on relative residuals and return its t-intercept. Falls back to the exponent p when the fit
    correlation is below ``min_corr``."""
    t, H = np.asarray(t, dtype=float), np.asarray(H, dtype=float)
    mask = H >= terminal_factor * H[0]
    if mask.sum() < min_points:
        raise InsufficientWindow(f"{mask.sum()} snapshots with H >= {terminal_factor:g}·H(0), need {min_points}")
    tw, Hw = t[mask], H[mask]
    # relative residuals: noise on H is multiplicative, so the error in y scales with y
    x = tw - tw[-1]
    fit = None
    for source, expo in (("C1", C1), ("p", p)):
        y = Hw ** (-(expo - 2.0) / 2.0)
        slope, intercept, r = _linfit(x, y, y**-2.0)
        T = tw[-1] - intercept / slope if slope != 0 else math.inf
        fit = BlowupFit(T, source, expo, abs(r), int(mask.sum()))
        if slope < 0 and abs(r) >= min_corr:
            return fit
    return fit


def extrapolate_T(traj: Trajectory, C1: float, terminal_factor: float = 1e3) -> float:
    """Extrapolated blowup time of a trajectory whose H crossed the threshold."""
    if traj.status is not Status.BLOWUP:
        raise InsufficientWindow("trajectory did not reach the blowup threshold")
    return fit_blowup_time(traj.t, traj.H, C1, traj.p, terminal_factor).T
