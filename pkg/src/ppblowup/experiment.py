"""Experiment pipeline: initial data, constants, time marching, verification, sweeps."""
from __future__ import annotations

import itertools
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import model
from .bounds import VerificationReport, compute_bounds, log_slope, verify_trajectory
from .config import ExperimentConfig, InitialConfig
from .constants import (ConstantsReport, EmbeddingEstimates, Regime, build_constants_report, classify,
                        estimate_embeddings, mountain_pass_d)
from .dynamics import Status, Trajectory, run
from .errors import RegimeUnreachable
from .fem import DiscreteOperators, RadialMesh, assemble_operators, build_mesh, discrete_norms


@dataclass(frozen=True)
class InitialState:
    u: np.ndarray
    scale: float  # λ or A
    J0: float
    I0: float
    profile: str


@dataclass
class Setup:
    config: ExperimentConfig
    mesh: RadialMesh
    ops: DiscreteOperators
    estimates: EmbeddingEstimates


@dataclass
class RunResult:
    config: ExperimentConfig
    initial: InitialState
    constants: ConstantsReport
    trajectory: Trajectory
    verification: VerificationReport


def profile_shape(mesh: RadialMesh, cfg: InitialConfig, estimates: EmbeddingEstimates | None) -> np.ndarray:
    if cfg.profile == "GroundStateRay":
        if estimates is None:
            raise ValueError("GroundStateRay needs the ground state from the embedding estimator")
        return np.array(estimates.extremal, dtype=float)
    R, q = mesh.params.R, cfg.q
    return mesh.interpolate(lambda r: (1.0 - (r / R) ** 2) ** q)


def _bisect_decreasing(f, lo, hi, rtol=1e-15, max_iter=200):
    """Bisection for ``f(x) = 0`` with f decreasing; returns the left end, where f >= 0."""
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi) or hi - lo <= rtol * hi:
            break
        if f(mid) >= 0:
            lo = mid
        else:
            hi = mid
    return lo


def synthesize_initial(mesh: RadialMesh, ops: DiscreteOperators, cfg: InitialConfig,
                       estimates: EmbeddingEstimates | None = None) -> InitialState:
    """Scaled profile; with ``J_ratio`` the scale is chosen on the ray past the
    Nehari point so that ``J(u0) = J_ratio·d`` and ``I(u0) < 0``."""
    p = mesh.params.p
    phi = profile_shape(mesh, cfg, estimates)
    a, b, _ = discrete_norms(mesh, ops, phi, p)
    if cfg.scale is not None:
        lam = float(cfg.scale)
    else:
        if estimates is None:
            raise ValueError("a target energy ratio needs the embedding estimates")
        d = mountain_pass_d(estimates.Cstar, p)
        target = cfg.J_ratio * d
        lam_I = model.nehari_ray_threshold(a, b, p)
        J_top = model.ray_max_energy(a, b, p)
        if not target < J_top:
            raise RegimeUnreachable(
                f"{cfg.profile}: the ray reaches at most J = {J_top:.6g} = {J_top / d:.6g}·d, "
                f"below the requested {cfg.J_ratio:g}·d")
        excess = lambda lam: model.ray_scaling(lam, a, b, p)[0] - target
        hi = 2.0 * lam_I
        while excess(hi) >= 0:
            hi *= 2.0
        lam = _bisect_decreasing(excess, lam_I, hi)
    u = lam * phi
    ng, npn, _ = discrete_norms(mesh, ops, u, p)
    J0, I0 = model.eval_J(ng, npn, p), model.eval_I(ng, npn, p)
    if cfg.J_ratio is not None:
        wanted = Regime.NEGATIVE_ENERGY if cfg.J_ratio < 0 else Regime.SUBCRITICAL
        got = classify(J0, I0, mountain_pass_d(estimates.Cstar, p))
        if got is not wanted:
            raise RegimeUnreachable(f"scaled {cfg.profile} lands in {got.value}, not {wanted.value}")
    return InitialState(u=u, scale=lam, J0=J0, I0=I0, profile=cfg.profile)


def prepare(config: ExperimentConfig) -> Setup:
    mesh = build_mesh(config.model, config.mesh.M, config.mesh.grading, config.mesh.quad_order)
    ops = assemble_operators(mesh)
    est = estimate_embeddings(mesh, ops, config.model.p, config.estimators.tol_Cstar, config.estimators.tol_Cstarstar)
    return Setup(config, mesh, ops, est)


def constants_for(setup: Setup) -> tuple[ConstantsReport, InitialState]:
    cfg = setup.config
    init = synthesize_initial(setup.mesh, setup.ops, cfg.initial, setup.estimates)
    report = build_constants_report(setup.mesh, setup.ops, init.u, setup.estimates, cfg.estimators.eps_I)
    report.provenance["initial"] = {"profile": init.profile, "scale": init.scale,
                                    "J_ratio": cfg.initial.J_ratio, "q": cfg.initial.q}
    return report, init


def simulate(config: ExperimentConfig, setup: Setup | None = None) -> RunResult:
    setup = setup or prepare(config)
    constants, init = constants_for(setup)
    traj = run(setup.mesh, setup.ops, init.u, config.stepping, constants)
    verification = verify_trajectory(traj, constants, config.verify)
    return RunResult(config, init, constants, traj, verification)


SWEEP_FIELDS = ("s", "p", "lambda", "J_ratio", "J0", "I0", "regime", "status", "T_lower", "T_num", "T_upper",
                "slope", "checks_passed", "checks_failed", "failed", "error")


def sweep_points(config: ExperimentConfig) -> list[dict]:
    axes = config.sweep.axes()
    if not axes:
        return []
    if "lambda" in axes and "J_ratio" in axes:
        raise ValueError("sweep over lambda and J_ratio together is ambiguous")
    keys = list(axes)
    return [dict(zip(keys, combo)) for combo in itertools.product(*(axes[k] for k in keys))]


def _point_config(config: ExperimentConfig, point: dict) -> ExperimentConfig:
    return config.with_overrides(s=point.get("s"), p=point.get("p"), lam=point.get("lambda"),
                                 J_ratio=point.get("J_ratio"))


def sweep_row(config: ExperimentConfig, point: dict) -> dict:
    """Run one sweep point; failures become a marked row instead of an exception."""
    row = dict.fromkeys(SWEEP_FIELDS)
    row.update(s=point.get("s", config.model.s), p=point.get("p", config.model.p), failed="",
               J_ratio=point.get("J_ratio", config.initial.J_ratio), **{"lambda": point.get("lambda")})
    try:
        cfg = _point_config(config, point)
        res = simulate(cfg)
    except Exception as exc:  # partial failure: record it and move on
        row["error"] = f"{type(exc).__name__}: {exc}"
        return row
    c, traj, ver = res.constants, res.trajectory, res.verification
    b = compute_bounds(c)
    row.update({
        "lambda": res.initial.scale, "J0": c.J0, "I0": c.I0, "regime": c.regime.value,
        "status": traj.status.value, "T_lower": b.T_lower, "T_num": traj.T_num, "T_upper": b.T_upper,
        "checks_passed": sum(ch.passed is True for ch in ver.checks),
        "checks_failed": sum(ch.passed is False for ch in ver.checks),
        "failed": ";".join(ver.failed()),
    })
    if traj.status is Status.BLOWUP and traj.T_num is not None:
        mask = traj.terminal_mask(cfg.verify.terminal_factor) & (traj.t < traj.T_num)
        if mask.sum() >= 3:
            row["slope"] = log_slope(traj.t[mask], traj.H[mask], traj.T_num)
    return {k: _plain(v) for k, v in row.items()}


def _plain(v):
    if isinstance(v, np.generic):
        return v.item()
    return v


def run_sweep(config: ExperimentConfig, workers: int | None = None) -> list[dict]:
    """Run every sweep point, concurrently when more than one worker is available."""
    points = sweep_points(config)
    if not points:
        return []
    workers = workers or config.sweep.workers or os.cpu_count() or 1
    workers = max(1, min(workers, len(points)))
    if workers == 1:
        return [sweep_row(config, pt) for pt in points]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(sweep_row, itertools.repeat(config), points))
