"""Feasibility solver for the lifted 3x3 semidefinite program.

The placement pipeline reduces the horizontal-location search to feasibility
questions of the form

    find  p_hat, S  such that
        Tr(A S)   <= p_hat / tau - h_min**2
        Tr(B_k S) >= (beta0_hat / gamma_hat) * p_hat - h_min**2   for all k
        Tr(C S)    = 1,   0 <= p_hat <= p_hat_max,   S >= 0 (PSD)

with A = diag(1, 1, 0), C = diag(0, 0, 1) and B_k the Gram-structured PR
matrices.  Feasibility is decided by maximizing a phase-I slack t that
relaxes every scalar inequality; the system is feasible iff the optimal
slack is (numerically) non-negative.  The maximization runs a damped-Newton
barrier method on 7 variables: the five free entries of S (S33 = 1 is
eliminated through the trace-C equality), the scalar p_hat and t.

Coordinates are normalized by a geometry scale L so every constraint is
O(1); the feasibility tolerance eps_feas is absolute in those units.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

EPS_FEAS = 1e-8
MAX_NEWTON_PER_STAGE = 200
MAX_STAGES = 12
MU_SHRINK = 0.1
ARMIJO_SLOPE = 0.01
BACKTRACK = 0.5

# Symmetric basis for the 5 free entries of S (S33 is pinned to 1):
# index -> (row, col) of the lower triangle.
_FREE_IDX = ((0, 0), (1, 0), (1, 1), (2, 0), (2, 1))


def _basis_mats():
    mats = []
    for i, j in _FREE_IDX:
        e = np.zeros((3, 3))
        e[i, j] = 1.0
        e[j, i] = 1.0
        mats.append(e)
    return mats


_E = _basis_mats()


def _s_from_x(x):
    s = np.empty((3, 3))
    s[0, 0] = x[0]
    s[1, 0] = s[0, 1] = x[1]
    s[1, 1] = x[2]
    s[2, 0] = s[0, 2] = x[3]
    s[2, 1] = s[1, 2] = x[4]
    s[2, 2] = 1.0
    return s


def _logdet_pd(s):
    """log det of a PD matrix, or None when s is not PD.

    A Cholesky factorization is the domain test: a positive determinant
    alone would wrongly admit matrices with two negative eigenvalues.
    """
    try:
        chol = np.linalg.cholesky(s)
    except np.linalg.LinAlgError:
        return None
    return 2.0 * float(np.sum(np.log(np.diag(chol))))


@dataclass
class SdpInstance:
    """The lifted feasibility problem at a candidate SNR level tau.

    Matrices are stored in raw (meter) units; ``solve_sdp_feasibility``
    normalizes internally.  ``b_mats[k]`` equals
    [[I, -w_k], [-w_k^T, ||w_k||^2]] and is verified PSD on construction.
    """

    pr_locations: np.ndarray
    tau: float
    p_hat_max: float
    h_min2: float
    it_ratio: float  # beta0_hat / gamma_hat
    a_mat: np.ndarray = field(init=False)
    c_mat: np.ndarray = field(init=False)
    b_mats: np.ndarray = field(init=False)

    def __post_init__(self):
        w = np.asarray(self.pr_locations, dtype=float).reshape(-1, 2)
        self.pr_locations = w
        if self.tau < 0.0:
            raise ValueError("tau must be non-negative")
        if self.p_hat_max <= 0.0 or self.h_min2 <= 0.0 or self.it_ratio <= 0.0:
            raise ValueError("p_hat_max, h_min2 and it_ratio must be positive")
        self.a_mat = np.diag([1.0, 1.0, 0.0])
        self.c_mat = np.diag([0.0, 0.0, 1.0])
        b = np.empty((w.shape[0], 3, 3))
        for k, wk in enumerate(w):
            b[k, :2, :2] = np.eye(2)
            b[k, :2, 2] = -wk
            b[k, 2, :2] = -wk
            b[k, 2, 2] = wk @ wk
        self.b_mats = b
        scale = 1.0 + np.max(np.abs(b), axis=(1, 2))
        for k in range(b.shape[0]):
            if np.linalg.eigvalsh(b[k])[0] < -1e-9 * scale[k]:
                raise ValueError(f"B_{k} is not PSD")


@dataclass
class SdpOutcome:
    """Certificate returned by the feasibility solve."""

    status: str  # "feasible" | "infeasible" | "numerically-indeterminate"
    s_mat: np.ndarray | None
    p_hat: float | None
    max_slack: float
    iterations: int
    residuals: dict

    @property
    def feasible(self) -> bool:
        return self.status == "feasible"


@dataclass
class _AffineFeasibility:
    """Scaled phase-I problem shared by the tau-level and fixed-power SDPs.

    Scalar constraints, in the 7-vector x = (S11, S21, S22, S31, S32, y, t):
        g_A(x) = r_a + c_a * y - (S11 + S22)                    (optional)
        g_k(x) = S11 + S22 - 2 w_k . (S31, S32) + ||w_k||^2 + c_b * y + r_b
        y - y_lo,   y_hi - y
    all relaxed by t; S(x) must stay positive definite.
    """

    w: np.ndarray
    r_a: float
    c_a: float
    r_b: float
    c_b: float
    y_lo: float
    y_hi: float
    has_a: bool = True

    def rows(self):
        """Affine rows (a_i, b_i) with slack h_i = a_i . x + b_i."""
        rows = []
        if self.has_a:
            a = np.array([-1.0, 0.0, -1.0, 0.0, 0.0, self.c_a, -1.0])
            rows.append((a, self.r_a))
        for wk in self.w:
            a = np.array([1.0, 0.0, 1.0, -2.0 * wk[0], -2.0 * wk[1],
                          self.c_b, -1.0])
            rows.append((a, self.r_b + float(wk @ wk)))
        rows.append((np.array([0, 0, 0, 0, 0, 1.0, -1.0]), -self.y_lo))
        rows.append((np.array([0, 0, 0, 0, 0, -1.0, -1.0]), self.y_hi))
        return rows


def _phase1_maximize_slack(prob: _AffineFeasibility, eps_feas: float,
                           start: np.ndarray | None = None) -> tuple:
    """Maximize the phase-I slack t; returns (x, t_value, t_upper, iters, mu).

    ``t_value`` is achieved by the returned point (a valid feasibility
    certificate whenever it is non-negative).  ``t_upper`` bounds the true
    optimal slack from above; it is only tightened at well-centered iterates
    (small Newton decrement), since the barrier duality gap says nothing at
    an uncentered point.
    """
    rows = prob.rows()
    a_rows = np.array([r[0] for r in rows])
    b_rows = np.array([r[1] for r in rows])
    # Total barrier degree: one per scalar slack, three for the 3x3 logdet.
    m = len(rows) + 3

    x = np.zeros(7)
    x[0] = x[2] = 1.0
    x[5] = 0.5 * (prob.y_lo + prob.y_hi)
    if start is not None and _logdet_pd(_s_from_x(start)) is not None:
        # Blend toward the default interior point so a near-singular warm
        # start does not stall the first centering.
        x[:6] = 0.8 * start[:6] + 0.2 * x[:6]
    x[6] = np.min(a_rows[:, :6] @ x[:6] + b_rows) - 1.0

    def slacks(v):
        return a_rows @ v + b_rows

    def barrier_value(v, mu):
        h = slacks(v)
        if np.any(h <= 0.0):
            return np.inf
        logdet = _logdet_pd(_s_from_x(v))
        if logdet is None:
            return np.inf
        return -v[6] + mu * (-logdet - np.sum(np.log(h)))

    total_newton = 0
    mu = 1.0
    t_upper = np.inf
    for _ in range(MAX_STAGES):
        if x[6] >= 10.0 * eps_feas:
            # The current iterate is itself a strictly feasible certificate.
            return x, x[6], min(t_upper, x[6] + mu * m), total_newton, mu
        decrement2 = np.inf
        for _ in range(MAX_NEWTON_PER_STAGE):
            h = slacks(x)
            s = _s_from_x(x)
            sinv = np.linalg.inv(s)
            grad = np.zeros(7)
            grad[6] = -1.0
            hess = np.zeros((7, 7))
            for idx, e in enumerate(_E):
                grad[idx] += -mu * np.trace(sinv @ e)
            for i in range(5):
                mi = sinv @ _E[i]
                for j in range(i, 5):
                    v = mu * np.trace(mi @ sinv @ _E[j])
                    hess[i, j] += v
                    if i != j:
                        hess[j, i] += v
            grad += -mu * (a_rows / h[:, None]).sum(axis=0)
            aw = a_rows / h[:, None]
            hess += mu * aw.T @ aw
            try:
                step = np.linalg.solve(hess + 1e-13 * np.eye(7), -grad)
            except np.linalg.LinAlgError:
                step = np.linalg.lstsq(hess, -grad, rcond=None)[0]
            decrement2 = float(-grad @ step)
            total_newton += 1
            if decrement2 < 2e-11:
                break
            f0 = barrier_value(x, mu)
            tstep = 1.0
            slope = float(grad @ step)
            accepted = False
            for _ in range(80):
                cand = x + tstep * step
                if barrier_value(cand, mu) <= f0 + ARMIJO_SLOPE * tstep * slope:
                    x = cand
                    accepted = True
                    break
                tstep *= BACKTRACK
            if not accepted:
                break
        if decrement2 <= 1e-4:
            # Near-centered: the barrier gap plus a decrement margin bounds
            # the optimal slack from above.
            t_upper = min(t_upper, x[6] + mu * m + 2.0 * decrement2)
        if x[6] >= 10.0 * eps_feas:
            return x, x[6], t_upper, total_newton, mu
        if t_upper < -eps_feas:  # certifiably infeasible
            return x, x[6], t_upper, total_newton, mu
        mu *= MU_SHRINK
    return x, x[6], t_upper, total_newton, mu / MU_SHRINK


def _decide(t_value: float, t_upper: float, eps_feas: float) -> str:
    if t_value >= -eps_feas:
        return "feasible"
    if t_upper < -eps_feas:
        return "infeasible"
    return "numerically-indeterminate"


def solve_affine_feasibility(prob: _AffineFeasibility, eps_feas: float = EPS_FEAS,
                             start: np.ndarray | None = None) -> SdpOutcome:
    """Run phase-I on an already-scaled affine instance."""
    x, t_val, t_up, iters, mu = _phase1_maximize_slack(prob, eps_feas, start)
    status = _decide(t_val, t_up, eps_feas)
    s = _s_from_x(x) if status == "feasible" else None
    y = float(x[5]) if status == "feasible" else None
    return SdpOutcome(
        status=status,
        s_mat=s,
        p_hat=y,
        max_slack=float(t_val),
        iterations=iters,
        residuals={"slack_upper_bound": float(t_up), "final_mu": mu,
                   "min_eig_s": float(np.linalg.eigvalsh(_s_from_x(x))[0]),
                   "_x_scaled": x[:6].copy()},
    )


def solve_sdp_feasibility(inst: SdpInstance, tol: float = EPS_FEAS,
                          start: np.ndarray | None = None) -> SdpOutcome:
    """Decide feasibility of the lifted problem at the instance's tau.

    Returns outcome with the solution expressed back in meter units:
    ``s_mat`` is the 3x3 PSD matrix with unit (3,3) entry and ``p_hat`` the
    transformed power.  ``max_slack`` is the achieved phase-I slack in the
    scaled units (negative means the best point still violates by that much).
    A warm ``start`` may carry the previous (scaled) solution vector.
    """
    w = inst.pr_locations
    if inst.tau == 0.0:
        # Every constraint is vacuous or satisfied by p_hat = 0, S = diag(0,0,1).
        return SdpOutcome("feasible", np.diag([0.0, 0.0, 1.0]), 0.0, 1.0, 0,
                          {"shortcut": "tau=0"})
    scale = max(np.sqrt(inst.h_min2),
                float(np.max(np.linalg.norm(w, axis=1), initial=0.0)),
                np.sqrt(inst.it_ratio * inst.p_hat_max), 1.0)
    l2 = scale * scale
    prob = _AffineFeasibility(
        w=w / scale,
        r_a=-inst.h_min2 / l2,
        c_a=inst.p_hat_max / (inst.tau * l2),
        r_b=inst.h_min2 / l2,
        c_b=-inst.it_ratio * inst.p_hat_max / l2,
        y_lo=0.0,
        y_hi=1.0,
    )
    out = solve_affine_feasibility(prob, tol, start)
    if out.feasible:
        d = np.diag([scale, scale, 1.0])
        out.s_mat = d @ out.s_mat @ d
        out.p_hat = out.p_hat * inst.p_hat_max
    return out
