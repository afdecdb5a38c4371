"""Blowup-time bounds, rate envelopes and growth floor, and trajectory checks.

Envelopes are stated for ``2H = ∫u²/|x|^s + ‖∇u‖²``. Since the true blowup
time is unknown, envelopes are instantiated with the extrapolated ``T_num``.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .constants import ConstantsReport, Regime
from .errors import OutOfRegime


def upper_time_bound(H0, G0, C1):
    """``2H(0) / (C1 (C1 − 2) G(0))``."""
    if not (C1 > 2 and G0 > 0):
        raise OutOfRegime("upper time bound needs C1 > 2 and G(0) > 0")
    return 2.0 * H0 / (C1 * (C1 - 2.0) * G0)


def lower_time_bound(H0, Cstar, p):
    """``(2H(0))^{(2−p)/2} / (C*^p (p − 2))``."""
    return (2.0 * H0) ** ((2.0 - p) / 2.0) / (Cstar**p * (p - 2.0))


def upper_rate_coeff(H0, G0, C1):
    return 0.5 * (C1 * (C1 - 2.0) * G0 / (2.0 * H0) ** (C1 / 2.0)) ** (2.0 / (2.0 - C1))


def upper_rate_envelope(t, T, H0, G0, C1):
    """Upper envelope of 2H(t): ``coeff · (T − t)^{−2/(C1−2)}``."""
    if not C1 > 2:
        raise OutOfRegime("C1 must exceed 2")
    gap = np.asarray(T - np.asarray(t, dtype=float))
    if np.any(gap <= 0):
        raise OutOfRegime("envelope is defined only for t < T")
    return upper_rate_coeff(H0, G0, C1) * gap ** (-2.0 / (C1 - 2.0))


def lower_rate_coeff(Cstar, p):
    return Cstar ** (-2.0 * p / (p - 2.0)) * (p - 2.0) ** (-2.0 / (p - 2.0))


def lower_rate_envelope(t, T, Cstar, p):
    """Lower envelope of 2H(t): ``C*^{−2p/(p−2)} (p−2)^{−2/(p−2)} (T − t)^{−2/(p−2)}``."""
    gap = np.asarray(T - np.asarray(t, dtype=float))
    if np.any(gap <= 0):
        raise OutOfRegime("envelope is defined only for t < T")
    return lower_rate_coeff(Cstar, p) * gap ** (-2.0 / (p - 2.0))


def growth_floor(t, H0, C2):
    """``2H(0) e^{C2 t}``."""
    return 2.0 * H0 * np.exp(C2 * np.asarray(t, dtype=float))


def remark_sides(p, eps):
    left = (((1.0 - eps) * p + 2.0 * eps) / 2.0) ** (-p / (p - 2.0))
    right = (p - 1.0) / (p - 2.0) - math.sqrt(1.0 / (p - 2.0) ** 2 + p / (4.0 * (p - 1.0)))
    return left, right


def remark_comparison_holds(p, eps) -> bool:
    """Whether the upper time bound here beats the earlier concavity-method bound
    for an energy ratio ``eps ∈ [J(u0)/d, 1)``."""
    if not p > 2 or not 0 <= eps < 1:
        raise ValueError("need p > 2 and eps in [0, 1)")
    left, right = remark_sides(p, eps)
    return left < right


@dataclass
class BoundsReport:
    T_upper: float | None
    T_lower: float
    rate_upper_coeff: float | None
    rate_upper_exp: float | None
    rate_lower_coeff: float
    rate_lower_exp: float
    growth_coeff: float
    growth_rate: float | None
    remark_predicate: bool | None = None
    remark_eps: float | None = None
    consistent: bool | None = None


def compute_bounds(c: ConstantsReport) -> BoundsReport:
    p = c.p
    out = BoundsReport(
        T_upper=None, T_lower=lower_time_bound(c.H0, c.Cstar, p),
        rate_upper_coeff=None, rate_upper_exp=None,
        rate_lower_coeff=lower_rate_coeff(c.Cstar, p), rate_lower_exp=-2.0 / (p - 2.0),
        growth_coeff=2.0 * c.H0, growth_rate=c.C2,
    )
    if c.regime.certified:
        out.T_upper = upper_time_bound(c.H0, c.G0, c.C1)
        out.rate_upper_coeff = upper_rate_coeff(c.H0, c.G0, c.C1)
        out.rate_upper_exp = -2.0 / (c.C1 - 2.0)
        out.consistent = out.T_lower <= out.T_upper
        if c.regime is Regime.SUBCRITICAL and c.J0 > 0:
            out.remark_eps = c.J0 / c.d
            out.remark_predicate = remark_comparison_holds(p, out.remark_eps)
    return out


@dataclass(frozen=True)
class Tolerances:
    energy_per_dt0: float = 50.0  # max |ρ|/(|J(u0)| + dissipation) <= energy_per_dt0 · dt0
    power_per_dt0: float = 50.0  # per-step relative residual of dH/dt = −I
    T_rel: float = 0.10
    growth_rel: float = 1e-6
    rate_factor: float = 2.0
    slope_rel: float = 0.15
    norm_floor_rel: float = 1e-2
    monotone_rel: float = 1e-12
    terminal_factor: float = 1e3


@dataclass
class CheckRecord:
    check: str
    paper_location: str  # the inequality or identity being tested
    passed: bool | None  # None: not applicable to this run
    measured: float | None
    tolerance: float | None
    note: str = ""

    def to_dict(self):
        d = asdict(self)
        d["pass"] = d.pop("passed")
        return d


@dataclass
class VerificationReport:
    checks: list[CheckRecord] = field(default_factory=list)
    bounds: BoundsReport | None = None
    T_num: float | None = None
    notes: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed is not False for c in self.checks)

    def __getitem__(self, name) -> CheckRecord:
        for c in self.checks:
            if c.check == name:
                return c
        raise KeyError(name)

    def failed(self) -> list[str]:
        return [c.check for c in self.checks if c.passed is False]

    def to_json(self) -> str:
        return json.dumps([c.to_dict() for c in self.checks], indent=2, default=_jsonable)

    def summary(self) -> str:
        lines = []
        for c in self.checks:
            flag = {True: "PASS", False: "FAIL", None: "skip"}[c.passed]
            m = "" if c.measured is None else f" measured={c.measured:.6g}"
            tol = "" if c.tolerance is None else f" tol={c.tolerance:.3g}"
            note = f"  ({c.note})" if c.note else ""
            lines.append(f"[{flag}] {c.check}:{m}{tol}{note}")
        lines.extend(f"note: {n}" for n in self.notes)
        return "\n".join(lines)


def _jsonable(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, np.bool_):
        return bool(x)
    raise TypeError(type(x))


LOCATIONS = {
    "energy_identity": "J(u) + ∫_0^t ‖∇u_τ‖² + ∫_0^t ∫ u_τ²/|x|^s = J(u0)",
    "power_identity": "(1/2) d/dt (∫u²/|x|^s + ‖∇u‖²) = −I(u)",
    "energy_monotone": "G(t) nondecreasing (J nonincreasing along the flow)",
    "H_monotone": "H'(t) >= C1 G(t) > 0",
    "norm_floor": "‖u(t)‖_p >= θ2 while 0 <= J(u0) < d, I(u0) < 0",
    "theta_chain": "θ2/θ1 >= θ0 > 1",
    "bounds_consistent": "lower blowup-time bound <= upper blowup-time bound",
    "blowup_time_sandwich": "T_lower <= T <= 2H(0)/(C1 (C1−2) G(0))",
    "growth_floor": "2H(t) >= 2H(0) e^{C2 t}",
    "upper_rate_envelope": "2H(t) <= (1/2)[C1(C1−2)G(0)/(2H(0))^{C1/2}]^{2/(2−C1)} (T−t)^{−2/(C1−2)}",
    "lower_rate_envelope": "2H(t) >= C*^{−2p/(p−2)} (p−2)^{−2/(p−2)} (T−t)^{−2/(p−2)}",
    "rate_slope": "d log(2H) / d log(T−t) = −2/(p−2) when C1 = p",
}


def _record(name, passed, measured=None, tolerance=None, note=""):
    return CheckRecord(name, LOCATIONS[name], None if passed is None else bool(passed),
                       None if measured is None else float(measured),
                       None if tolerance is None else float(tolerance), note)


def energy_residual(traj) -> np.ndarray:
    """Discrete energy-identity residual ρ at every row."""
    return traj.J + traj.dissipation - traj.J[0]


def power_residual(traj) -> np.ndarray:
    """Per-step relative residual of ``ΔH/Δt + I(u_k)``, using H rebuilt from the norms."""
    Hn = 0.5 * (traj.weighted_l2 + traj.norm_grad**2)
    In = traj.norm_grad**2 - traj.norm_p**traj.p
    res = np.diff(Hn) / traj.dt[1:] + In[:-1]
    scale = np.abs(In[:-1])
    return np.abs(res) / np.where(scale > 0, scale, 1.0)


def log_slope(t, H, T):
    mask = t < T
    slope, _ = np.polyfit(np.log(T - t[mask]), np.log(2.0 * H[mask]), 1)
    return slope


def verify_trajectory(traj, constants: ConstantsReport, tol: Tolerances = Tolerances()) -> VerificationReport:
    """Check a trajectory against every identity and bound that applies to it."""
    from .dynamics import Status

    rep = VerificationReport(bounds=compute_bounds(constants), T_num=traj.T_num)
    b = rep.bounds
    p = constants.p
    certified = constants.regime.certified
    blowup = traj.status is Status.BLOWUP and traj.T_num is not None
    dt0 = traj.meta.get("dt0")
    add = rep.checks.append
    skip_cert = "regime not certified for blowup"

    # identities
    if traj.dissipation is None or dt0 is None:
        add(_record("energy_identity", None, note="dissipation history not available"))
    else:
        pre = np.ones(len(traj), bool)
        if traj.T_threshold is not None:
            pre = traj.t < traj.T_threshold
        # the residual of a first-order scheme grows with the energy it has dissipated,
        # so it is measured against |J(u0)| plus the dissipation up to that row
        scale = abs(traj.J0) + traj.dissipation[pre]
        scale = np.where(scale > 0, scale, 1.0)
        rho = float(np.max(np.abs(energy_residual(traj)[pre]) / scale))
        lim = tol.energy_per_dt0 * dt0
        add(_record("energy_identity", rho <= lim, rho, lim,
                    "max |ρ(t)| / (|J(u0)| + dissipated energy) before the blowup threshold"))
    if traj.meta.get("thinned"):
        add(_record("power_identity", None, note="rows were thinned on export; consecutive steps not available"))
    elif len(traj) > 1 and dt0 is not None:
        pr = power_residual(traj)
        if traj.T_threshold is not None:
            pr = pr[traj.t[:-1] < traj.T_threshold]
        lim = tol.power_per_dt0 * dt0
        add(_record("power_identity", pr.max() <= lim, pr.max(), lim, "max per-step relative residual"))
    else:
        add(_record("power_identity", None, note="fewer than two snapshots"))

    dJ = np.diff(traj.J)
    slack = tol.monotone_rel * np.maximum(np.abs(traj.J[1:]), np.abs(traj.J[:-1]))
    worst = float(np.max(dJ - slack)) if dJ.size else -1.0
    add(_record("energy_monotone", worst <= 0, worst, 0.0, "max step increase of J"))

    if certified:
        dH = np.diff(traj.H)
        add(_record("H_monotone", bool(np.all(dH > 0)), dH.min() if dH.size else None, 0.0, "min step change of H"))
    else:
        add(_record("H_monotone", None, note=skip_cert))

    if constants.regime is Regime.SUBCRITICAL:
        floor = constants.theta2 * (1.0 - tol.norm_floor_rel)
        m = traj.norm_p.min()
        add(_record("norm_floor", m >= floor, m / constants.theta2, 1.0 - tol.norm_floor_rel, "min ‖u‖_p / θ2"))
        chain = constants.theta2 / constants.theta1 >= constants.theta0 > 1.0
        add(_record("theta_chain", chain, constants.theta2 / constants.theta1 - constants.theta0, 0.0, "θ2/θ1 − θ0"))
    else:
        add(_record("norm_floor", None, note="applies to 0 <= J(u0) < d only"))
        add(_record("theta_chain", None, note="applies to 0 <= J(u0) < d only"))

    if certified:
        add(_record("bounds_consistent", b.consistent, b.T_upper - b.T_lower, 0.0, "T_upper − T_lower"))
        ratio = 2.0 * traj.H / growth_floor(traj.t, constants.H0, constants.C2)
        add(_record("growth_floor", ratio.min() >= 1.0 - tol.growth_rel, ratio.min(), 1.0 - tol.growth_rel,
                    "min 2H(t) / floor(t)"))
    else:
        for name in ("bounds_consistent", "growth_floor"):
            add(_record(name, None, note=skip_cert))

    if certified and blowup:
        T = traj.T_num
        ok = b.T_lower <= T * (1 + tol.T_rel) and T <= b.T_upper * (1 + tol.T_rel)
        add(_record("blowup_time_sandwich", ok, T / b.T_upper, 1 + tol.T_rel,
                    f"T_lower={b.T_lower:.6g} T_num={T:.6g} T_upper={b.T_upper:.6g}"))
        mask = traj.terminal_mask(tol.terminal_factor) & (traj.t < T)
        tw, Hw = traj.t[mask], traj.H[mask]
        if tw.size:
            up = upper_rate_envelope(tw, T, constants.H0, constants.G0, constants.C1)
            lo = lower_rate_envelope(tw, T, constants.Cstar, p)
            r_up = float(np.max(2.0 * Hw / up))
            r_lo = float(np.min(2.0 * Hw / lo))
            eps = 1e-6 * T
            sens_up = float(np.max(np.abs(upper_rate_envelope(tw, T + eps, constants.H0, constants.G0, constants.C1) - up) / (eps * up)))
            sens_lo = float(np.max(np.abs(lower_rate_envelope(tw, T + eps, constants.Cstar, p) - lo) / (eps * lo)))
            add(_record("upper_rate_envelope", r_up <= tol.rate_factor, r_up, tol.rate_factor,
                        f"max 2H/envelope; max |d log env/dT| = {sens_up:.3g}"))
            add(_record("lower_rate_envelope", r_lo >= 1.0 / tol.rate_factor, r_lo, 1.0 / tol.rate_factor,
                        f"min 2H/envelope; max |d log env/dT| = {sens_lo:.3g}"))
        else:
            for name in ("upper_rate_envelope", "lower_rate_envelope"):
                add(_record(name, None, note="empty terminal window"))
        if constants.regime is Regime.NEGATIVE_ENERGY and tw.size >= 3:
            target = -2.0 / (p - 2.0)
            slope = log_slope(tw, Hw, T)
            dev = abs(slope / target - 1.0)
            add(_record("rate_slope", dev <= tol.slope_rel, slope, tol.slope_rel, f"target {target:.4g}"))
        else:
            add(_record("rate_slope", None, note="applies to J(u0) < 0 blowup runs only"))
    else:
        why = skip_cert if not certified else f"status {traj.status.value}"
        for name in ("blowup_time_sandwich", "upper_rate_envelope", "lower_rate_envelope", "rate_slope"):
            add(_record(name, None, note=why))

    rep.notes.append(
        "C*_h <= C* and C**_h <= C**: the computed lower time bound is at least the exact-constant one, "
        "d_h >= d, and C2 is at least its exact-constant value; all bounds are evaluated with the discrete constants, "
        "which are the exact embedding constants of the discrete system being integrated."
    )
    return rep
