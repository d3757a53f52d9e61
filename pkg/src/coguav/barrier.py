"""Barrier-Newton solver for the smooth convex trajectory subproblem.

Each SCA iteration maximizes the concave surrogate average rate

    (1/N) * sum_n [ log2(zeta2[n] + eta_u * zeta1[n])
                    - log2(zeta2_loc[n]) - (zeta2[n] - zeta2_loc[n]) * log2(e) / zeta2_loc[n] ]

over per-slot variables x[n] = (qx, qy, z, zeta1, zeta2), subject to squared
horizontal speed balls, vertical speed and altitude boxes, the power box,
the IT constraints linearized at the local point, and the power-composite
coupling (||q||^2 + z^2)**(alpha/2) <= zeta2.  Boundary conditions are
handled by marking variables fixed (rows/columns of the Newton system are
eliminated); constraints touching only fixed variables drop out of the
barrier.  Adjacent-slot coupling makes the Hessian block-tridiagonal, which
the banded kernel in :mod:`coguav.kernels` factors in O(N).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .kernels import blocktri_solve, dense_solve

LOG2E = float(np.log2(np.e))
LN2 = float(np.log(2.0))

DEFAULT_TOL = 1e-7
MU_MIN = 1e-11
MAX_NEWTON_PER_STAGE = 200
MAX_STAGES = 12
ARMIJO_SLOPE = 0.01
BACKTRACK = 0.5


class StrictStartError(ValueError):
    """The supplied start violates strict feasibility; shrink the point
    into the interior (or rebuild the initial trajectory) and retry."""


@dataclass
class SmoothConvexProgram:
    """Data of one convex subproblem at a fixed linearization point.

    Variable layout per slot: columns (qx, qy, z, zeta1, zeta2), in meters /
    watts / meters**alpha.  ``fixed`` marks variables pinned to their value
    in the start vector (mission boundary slots; the whole z column for the
    altitude-frozen variant).
    """

    q_loc: np.ndarray        # (N, 2) linearization point, horizontal
    z_loc: np.ndarray        # (N,)
    zeta2_loc: np.ndarray    # (N,)
    w: np.ndarray            # (K, 2) PR locations
    eta_u: float
    alpha: float
    p_max: float
    it_coeff: float          # Gamma / beta_0
    v_h: float               # per-slot horizontal budget (m)
    v_a: float               # per-slot ascent budget (m)
    v_d: float               # per-slot descent budget (m)
    h_min: float
    h_max: float
    fixed: np.ndarray        # (N, 5) bool
    it_const: np.ndarray = field(init=False)   # (N, K)
    it_gq: np.ndarray = field(init=False)      # (N, K, 2)
    it_gz: np.ndarray = field(init=False)      # (N, K)
    d_lin: np.ndarray = field(init=False)      # (N,)
    scales: np.ndarray = field(init=False)     # (5,)

    def __post_init__(self):
        n = self.q_loc.shape[0]
        if n < 2:
            raise ValueError("need at least two slots")
        a2 = self.alpha / 2.0
        diff = self.q_loc[:, None, :] - self.w[None, :, :]
        u = np.sum(diff * diff, axis=2) + (self.z_loc ** 2)[:, None]
        upow = u ** a2
        # First-order expansion of (||q - w_k||^2 + z^2)**(alpha/2); the IT
        # bound on zeta1 uses it_coeff times this tangent plane.
        gcom = self.alpha * u ** (a2 - 1.0)
        self.it_const = self.it_coeff * upow
        self.it_gq = self.it_coeff * gcom[:, :, None] * diff
        self.it_gz = self.it_coeff * gcom * self.z_loc[:, None]
        self.d_lin = LOG2E / self.zeta2_loc
        geo = max(self.h_max, float(np.max(np.abs(self.q_loc), initial=1.0)),
                  float(np.max(np.abs(self.w), initial=1.0)))
        self.scales = np.array([geo, geo, geo, self.p_max,
                                float(np.max(self.zeta2_loc))])

    @property
    def n_slots(self) -> int:
        return self.q_loc.shape[0]

    def masks(self):
        q_free = ~(self.fixed[:, 0] & self.fixed[:, 1])
        z_free = ~self.fixed[:, 2]
        speed_act = q_free[:-1] | q_free[1:]
        vert_act = z_free[:-1] | z_free[1:]
        return q_free, z_free, speed_act, vert_act

    def objective(self, x: np.ndarray) -> float:
        """Surrogate average rate (bps/Hz) at the point x."""
        y = x[:, 4] + self.eta_u * x[:, 3]
        terms = (np.log2(y) - np.log2(self.zeta2_loc)
                 - (x[:, 4] - self.zeta2_loc) * self.d_lin)
        return float(np.mean(terms))

    def slack_report(self, x: np.ndarray) -> dict:
        """All active barrier slacks (positive means strictly feasible)."""
        _, z_free, speed_act, vert_act = self.masks()
        dq = x[1:, :2] - x[:-1, :2]
        dz = x[1:, 2] - x[:-1, 2]
        a2 = self.alpha / 2.0
        comp = (np.sum(x[:, :2] ** 2, axis=1) + x[:, 2] ** 2) ** a2
        s_it = (self.it_const
                + np.sum(self.it_gq * (x[:, None, :2] - self.q_loc[:, None, :]),
                         axis=2)
                + self.it_gz * (x[:, 2] - self.z_loc)[:, None]
                - x[:, 3][:, None])
        report = {
            "speed": (self.v_h ** 2 - np.sum(dq * dq, axis=1))[speed_act],
            "ascent": (self.v_a - dz)[vert_act],
            "descent": (dz + self.v_d)[vert_act],
            "z_low": (x[:, 2] - self.h_min)[z_free],
            "z_high": (self.h_max - x[:, 2])[z_free],
            "p_low": x[:, 3],
            "p_high": self.p_max - x[:, 3],
            "it": s_it.ravel(),
            "composite": x[:, 4] - comp,
        }
        return report

    def min_slack(self, x: np.ndarray) -> float:
        rep = self.slack_report(x)
        vals = [np.min(v) for v in rep.values() if v.size]
        return float(min(vals)) if vals else np.inf


@dataclass
class SmoothSolution:
    x: np.ndarray
    objective: float
    kkt_residual: float
    newton_iterations: int
    stages: int
    degraded: bool
    message: str = ""


def _barrier_value(prog: SmoothConvexProgram, x: np.ndarray,
                   mu: float) -> float:
    y = x[:, 4] + prog.eta_u * x[:, 3]
    if np.any(y <= 0.0):
        return np.inf
    rep = prog.slack_report(x)
    total = 0.0
    for v in rep.values():
        if v.size == 0:
            continue
        if np.any(v <= 0.0):
            return np.inf
        total -= np.sum(np.log(v))
    return -prog.objective(x) + mu * total


def _assemble(prog: SmoothConvexProgram, x: np.ndarray, mu: float):
    """Gradient and block-tridiagonal Hessian of the barrier objective."""
    n = prog.n_slots
    _, z_free, speed_act, vert_act = prog.masks()
    g = np.zeros((n, 5))
    diag = np.zeros((n, 5, 5))
    low = np.zeros((n - 1, 5, 5))

    # Objective: minimize -surrogate.
    y = x[:, 4] + prog.eta_u * x[:, 3]
    inv_n = 1.0 / n
    g[:, 3] += -inv_n * prog.eta_u / (y * LN2)
    g[:, 4] += -inv_n * (1.0 / (y * LN2) - prog.d_lin)
    coef = inv_n / (LN2 * y * y)
    diag[:, 3, 3] += coef * prog.eta_u ** 2
    diag[:, 3, 4] += coef * prog.eta_u
    diag[:, 4, 3] += coef * prog.eta_u
    diag[:, 4, 4] += coef

    # Horizontal speed balls (coupling adjacent slots).
    dq = x[1:, :2] - x[:-1, :2]
    s = prog.v_h ** 2 - np.sum(dq * dq, axis=1)
    s = np.where(speed_act, s, 1.0)
    act = speed_act.astype(float)
    gs = (2.0 * mu * act / s)[:, None] * dq
    g[:-1, :2] += -gs
    g[1:, :2] += gs
    outer = np.einsum("ni,nj->nij", dq, dq)
    hblk = ((4.0 * mu * act / s ** 2)[:, None, None] * outer
            + (2.0 * mu * act / s)[:, None, None] * np.eye(2))
    diag[:-1, :2, :2] += hblk
    diag[1:, :2, :2] += hblk
    low[:, :2, :2] += -hblk

    # Vertical speed boxes.
    dz = x[1:, 2] - x[:-1, 2]
    va = np.where(vert_act, prog.v_a - dz, 1.0)
    vd = np.where(vert_act, dz + prog.v_d, 1.0)
    actv = vert_act.astype(float)
    g[:-1, 2] += mu * actv * (-1.0 / va + 1.0 / vd)
    g[1:, 2] += mu * actv * (1.0 / va - 1.0 / vd)
    hv = mu * actv * (1.0 / va ** 2 + 1.0 / vd ** 2)
    diag[:-1, 2, 2] += hv
    diag[1:, 2, 2] += hv
    low[:, 2, 2] += -hv

    # Altitude box.
    zl = np.where(z_free, x[:, 2] - prog.h_min, 1.0)
    zh = np.where(z_free, prog.h_max - x[:, 2], 1.0)
    actz = z_free.astype(float)
    g[:, 2] += mu * actz * (-1.0 / zl + 1.0 / zh)
    diag[:, 2, 2] += mu * actz * (1.0 / zl ** 2 + 1.0 / zh ** 2)

    # Power box on zeta1.
    pl = x[:, 3]
    ph = prog.p_max - x[:, 3]
    g[:, 3] += mu * (-1.0 / pl + 1.0 / ph)
    diag[:, 3, 3] += mu * (1.0 / pl ** 2 + 1.0 / ph ** 2)

    # Linearized IT rows: slack = const + gq.(q - q_loc) + gz (z - z_loc) - zeta1.
    s_it = (prog.it_const
            + np.sum(prog.it_gq * (x[:, None, :2] - prog.q_loc[:, None, :]),
                     axis=2)
            + prog.it_gz * (x[:, 2] - prog.z_loc)[:, None]
            - x[:, 3][:, None])
    a_it = np.zeros((n, prog.w.shape[0], 4))
    a_it[:, :, :2] = prog.it_gq
    a_it[:, :, 2] = prog.it_gz
    a_it[:, :, 3] = -1.0
    aw = a_it / s_it[:, :, None]
    g[:, :4] += -mu * aw.sum(axis=1)
    diag[:, :4, :4] += mu * np.einsum("nki,nkj->nij", aw, aw)

    # Power-composite: zeta2 >= (||q||^2 + z^2)**(alpha/2).
    a2 = prog.alpha / 2.0
    u3 = x[:, :3]
    r2 = np.sum(u3 * u3, axis=1)
    comp = r2 ** a2
    v = prog.alpha * r2 ** (a2 - 1.0)
    sc = x[:, 4] - comp
    grow = np.zeros((n, 5))
    grow[:, :3] = -v[:, None] * u3
    grow[:, 4] = 1.0
    g += -mu * grow / sc[:, None]
    diag += mu * np.einsum("ni,nj->nij", grow / sc[:, None],
                           grow / sc[:, None])
    hcomp = (v / sc)[:, None, None] * np.eye(3)
    if prog.alpha != 2.0:
        hcomp = hcomp + (prog.alpha * (prog.alpha - 2.0)
                         * r2 ** (a2 - 2.0) / sc)[:, None, None] \
            * np.einsum("ni,nj->nij", u3, u3)
    diag[:, :3, :3] += mu * hcomp

    return g, diag, low


def _mask_scale(prog: SmoothConvexProgram, g, diag, low):
    """Diagonal variable scaling plus elimination of the fixed variables."""
    sc = prog.scales
    gs = g * sc
    ds = diag * sc[None, :, None] * sc[None, None, :]
    ls = low * sc[None, :, None] * sc[None, None, :]
    fixed = prog.fixed
    gs[fixed] = 0.0
    ds[fixed[:, :, None] | fixed[:, None, :]] = 0.0
    ls[fixed[1:, :, None] | fixed[:-1, None, :]] = 0.0
    idx = np.arange(5)
    unit = np.zeros_like(ds)
    unit[:, idx, idx] = fixed.astype(float)
    ds += unit
    return gs, ds, ls


def solve_smooth_convex(prog: SmoothConvexProgram, start: np.ndarray,
                        tol: float = DEFAULT_TOL, mu_min: float = MU_MIN,
                        linsolve: str = "banded",
                        backend: str | None = None) -> SmoothSolution:
    """Maximize the surrogate objective from a strictly feasible start.

    Returns the better of the start and the converged iterate, so the
    reported objective never drops below the start's.  ``linsolve`` picks
    the block-tridiagonal path ("banded") or the dense reference ("dense");
    ``backend`` forwards to the kernel ("numba"/"numpy"/None for auto).
    """
    x = np.array(start, dtype=float)
    if x.shape != (prog.n_slots, 5):
        raise ValueError(f"start must have shape ({prog.n_slots}, 5)")
    worst = prog.min_slack(x)
    if not np.isfinite(worst) or worst <= 0.0:
        raise StrictStartError(
            f"start is not strictly feasible (min slack {worst:.3e}); "
            "shrink the point into the interior and retry")

    m_act = sum(v.size for v in prog.slack_report(x).values())
    mu = 1.0
    newton_total = 0
    stages = 0
    degraded = False
    message = ""
    obj_start = prog.objective(x)
    dec2 = np.inf

    while True:
        stages += 1
        for _ in range(MAX_NEWTON_PER_STAGE):
            g, diag, low = _assemble(prog, x, mu)
            gs, ds, ls = _mask_scale(prog, g, diag, low)
            step = None
            reg = 0.0
            for _ in range(4):
                if reg:
                    idx = np.arange(5)
                    ds[:, idx, idx] += reg
                if linsolve == "dense":
                    step = dense_solve(ds, ls, -gs)
                else:
                    step = blocktri_solve(ds, ls, -gs, backend=backend)
                if step is not None:
                    break
                reg = max(reg * 100.0, 1e-10)
            if step is None:
                degraded = True
                message = "Newton system lost positive definiteness"
                break
            d_phys = step * prog.scales
            dec2 = float(-np.sum(gs * step))
            newton_total += 1
            if dec2 < 2.0 * 1e-10:
                break
            f0 = _barrier_value(prog, x, mu)
            slope = float(np.sum(g * d_phys))
            t = 1.0
            accepted = False
            for _ in range(70):
                cand = x + t * d_phys
                if (_barrier_value(prog, cand, mu)
                        <= f0 + ARMIJO_SLOPE * t * slope):
                    x = cand
                    accepted = True
                    break
                t *= BACKTRACK
            if not accepted:
                degraded = True
                message = "line search stalled"
                break
        if degraded:
            break
        gap = mu * m_act
        if gap <= tol * (1.0 + abs(prog.objective(x))) or mu <= mu_min:
            break
        if stages >= MAX_STAGES:
            break
        mu *= 0.1

    obj_x = prog.objective(x)
    if obj_x < obj_start:
        x, obj_x = np.array(start, dtype=float), obj_start
        message = (message + "; " if message else "") + "kept start point"
    # Suboptimality certificate: barrier duality gap plus the squared Newton
    # decrement of the last centering step.
    kkt = (mu * m_act + min(dec2, 1.0)) / (1.0 + abs(obj_x))
    return SmoothSolution(x=x, objective=obj_x, kkt_residual=kkt,
                          newton_iterations=newton_total, stages=stages,
                          degraded=degraded, message=message)
