"""Compiled inner loop of the time stepper.

Mirrors :func:`ppblowup.dynamics.step` and the bookkeeping of
:func:`ppblowup.dynamics.run`; the tests cross-check the two paths.
"""
import math

import numpy as np
from numba import njit

CONTINUE, CHECKPOINT, BLOWUP, WINDOW, DT_FLOOR, CLOCK_STALL, NONFINITE = range(7)


@njit(cache=True, fastmath=True)
def nonlinear_into(u, N0, N1, W, p, F):
    """Fill F with the nonlinear load at u and return ``‖u_h‖_p^p``."""
    m = u.size
    nq = N0.size
    mode = 0 if p == 4.0 else (1 if p == 3.0 else 2)
    pm2 = p - 2.0
    for i in range(m):
        F[i] = 0.0
    total = 0.0
    for e in range(m):
        a = u[e]
        b = u[e + 1] if e + 1 < m else 0.0
        f0 = 0.0
        f1 = 0.0
        for k in range(nq):
            uh = a * N0[k] + b * N1[k]
            if mode == 0:
                g = uh * uh * uh
            elif mode == 1:
                g = abs(uh) * uh
            else:
                g = abs(uh) ** pm2 * uh
            g *= W[e, k]
            total += g * uh
            f0 += g * N0[k]
            f1 += g * N1[k]
        F[e] += f0
        if e + 1 < m:
            F[e + 1] += f1
    return total


@njit(cache=True)
def tri_matvec(d, e, u, out):
    m = u.size
    for i in range(m):
        out[i] = d[i] * u[i]
    for i in range(m - 1):
        out[i] += e[i] * u[i + 1]
        out[i + 1] += e[i] * u[i]


@njit(cache=True)
def tri_solve_inplace(d, e, b, work_d, work_l):
    """Solve the SPD tridiagonal system (d, e) x = b by L D Lᵀ; b is overwritten.
    Returns False on a nonpositive pivot."""
    m = b.size
    work_d[0] = d[0]
    if work_d[0] <= 0.0:
        return False
    for i in range(1, m):
        work_l[i - 1] = e[i - 1] / work_d[i - 1]
        work_d[i] = d[i] - work_l[i - 1] * e[i - 1]
        if work_d[i] <= 0.0:
            return False
    for i in range(1, m):
        b[i] -= work_l[i - 1] * b[i - 1]
    for i in range(m):
        b[i] /= work_d[i]
    for i in range(m - 2, -1, -1):
        b[i] -= work_l[i] * b[i + 1]
    return True


@njit(cache=True)
def march(u, F, clock, Kd, Ke, Md, Me, N0, N1, W, p, theta, dt0, dt_min, q,
          threshold, horizon, t_ckpt, h_ckpt, max_rows,
          out_t, out_dt, out_ng2, out_npp, out_wl2, out_diss, out_umax):
    """Advance up to ``max_rows`` steps. ``u``, ``F`` and ``clock = [t, comp, diss, umax]``
    are updated in place. Returns ``(rows_written, stop_code)``."""
    m = u.size
    Ad = Kd + Md
    Ae = Ke + Me
    Sd = np.empty(m)
    Se = np.empty(max(m - 1, 0))
    rhs = np.empty(m)
    Ku = np.empty(m)
    Mu = np.empty(m)
    wd = np.empty(m)
    wl = np.empty(max(m - 1, 0))
    t, comp, diss, umax = clock[0], clock[1], clock[2], clock[3]
    tri_matvec(Kd, Ke, u, Ku)
    tri_matvec(Md, Me, u, Mu)
    for row in range(max_rows):
        dt = dt0 / (1.0 + umax**q)
        dt = min(max(dt, dt_min), dt0)
        if dt <= dt_min:
            clock[0], clock[1], clock[2], clock[3] = t, comp, diss, umax
            return row, DT_FLOOR
        y = dt - comp
        t_new = t + y
        if t_new <= t:
            clock[0], clock[1], clock[2], clock[3] = t, comp, diss, umax
            return row, CLOCK_STALL
        for i in range(m):
            rhs[i] = Ku[i] + Mu[i] + dt * F[i] - (1.0 - theta) * dt * Ku[i]
            Sd[i] = Ad[i] + theta * dt * Kd[i]
        for i in range(m - 1):
            Se[i] = Ae[i] + theta * dt * Ke[i]
        if not tri_solve_inplace(Sd, Se, rhs, wd, wl):
            clock[0], clock[1], clock[2], clock[3] = t, comp, diss, umax
            return row, NONFINITE
        if not math.isfinite(rhs.sum()):
            clock[0], clock[1], clock[2], clock[3] = t, comp, diss, umax
            return row, NONFINITE
        # dissipation δuᵀ(M_s+K)δu / dt
        qd = 0.0
        for i in range(m):
            du = rhs[i] - u[i]
            qd += Ad[i] * du * du
            if i + 1 < m:
                qd += 2.0 * Ae[i] * du * (rhs[i + 1] - u[i + 1])
        diss += qd / dt
        comp = (t_new - t) - y
        t = t_new
        umax = 0.0
        for i in range(m):
            u[i] = rhs[i]
            if abs(u[i]) > umax:
                umax = abs(u[i])
        npp = nonlinear_into(u, N0, N1, W, p, F)
        tri_matvec(Kd, Ke, u, Ku)
        tri_matvec(Md, Me, u, Mu)
        ng2 = 0.0
        wl2 = 0.0
        for i in range(m):
            ng2 += u[i] * Ku[i]
            wl2 += u[i] * Mu[i]
        out_t[row] = t
        out_dt[row] = dt
        out_ng2[row] = ng2
        out_npp[row] = npp
        out_wl2[row] = wl2
        out_diss[row] = diss
        out_umax[row] = umax
        H = 0.5 * (wl2 + ng2)
        code = CONTINUE
        if H >= threshold:
            code = BLOWUP
        elif t > horizon:
            code = WINDOW
        elif t >= t_ckpt or H >= h_ckpt:
            code = CHECKPOINT
        if code != CONTINUE:
            clock[0], clock[1], clock[2], clock[3] = t, comp, diss, umax
            return row + 1, code
    clock[0], clock[1], clock[2], clock[3] = t, comp, diss, umax
    return max_rows, CONTINUE
