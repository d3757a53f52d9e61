"""Quasi-stationary joint 3D placement and transmit-power optimization.

Pipeline: transform power to p_hat = p**(2/alpha), pin the altitude at h_min
(optimal for the jointly optimized problem), lift the horizontal location to
a 3x3 PSD matrix, and bisect the achievable transformed SNR level tau using
the feasibility kernel in :mod:`coguav.sdp`.  The dominant eigenvector of
the final PSD matrix recovers the location; Gaussian randomization covers
the (rare) higher-rank outcomes.  Closed-form sub-solvers for a fixed
horizontal location and for the single-PR case double as test oracles.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .scenario import Position3D, Scenario, achievable_rate, watts_to_dbm
from .sdp import (EPS_FEAS, SdpInstance, SdpOutcome, _AffineFeasibility,
                  solve_affine_feasibility, solve_sdp_feasibility)

EPS_BIS = 1e-6
RANK_TOL = 1e-4
RANDOMIZATION_SAMPLES = 200


@dataclass
class PlacementSolution:
    """Optimal static placement: position, power and achieved rate."""

    pos: Position3D
    p: float
    rate: float
    tau_star: float
    method: str  # sdr-rank1 | sdr-randomized | closed-form-k1 | fixed-q
    diagnostics: dict = field(default_factory=dict)

    def record(self, s: Scenario) -> dict:
        """JSON-friendly result record."""
        return {
            "position_m": {"x": self.pos.q[0], "y": self.pos.q[1],
                           "z": self.pos.z},
            "power_w": self.p,
            "power_dbm": watts_to_dbm(self.p),
            "rate_bpshz": self.rate,
            "tau_star": self.tau_star,
            "method": self.method,
            "it_margins_db": it_margins_db(s, self.pos, self.p).tolist(),
            "diagnostics": self.diagnostics,
        }


def it_margins_db(s: Scenario, pos: Position3D, p: float) -> np.ndarray:
    """Per-PR margin Gamma/Q_k in dB (positive = constraint satisfied)."""
    d2 = pos.z ** 2 + np.sum((pos.q - s.pr_locations) ** 2, axis=1)
    q_k = s.beta_0 * p * d2 ** (-s.alpha / 2.0)
    with np.errstate(divide="ignore"):
        return 10.0 * np.log10(s.gamma_it / q_k)


def _nearest_pr(s: Scenario, q: np.ndarray) -> tuple[int, float]:
    """Index (ties -> lowest) and squared distance of the nearest PR."""
    d2 = np.sum((np.asarray(q, float) - s.pr_locations) ** 2, axis=1)
    k = int(np.argmin(d2))
    return k, float(d2[k])


def solve_given_horizontal(s: Scenario, q) -> tuple[float, float, str]:
    """Optimal altitude and transformed power for a frozen horizontal point.

    Returns (z, p_hat, case) where the case records which side of the
    nearest PR the point falls on: the altitude rises toward h_max when the
    UAV sits closer to that PR than to the SR, stays at h_min when the SR is
    closer, and is arbitrary (h_min chosen) at equal distance.
    """
    q = np.asarray(q, dtype=float).reshape(2)
    if not np.all(np.isfinite(q)):
        raise ValueError("horizontal point must be finite")
    if s.gamma_it == 0.0:
        return s.h_min, 0.0, "zero-power"
    _, d2 = _nearest_pr(s, q)
    ratio = s.gamma_hat / s.beta0_hat
    qn2 = float(q @ q)
    if d2 < qn2:
        z_free2 = max(s.beta0_hat * s.p_hat_max / s.gamma_hat - d2, 0.0)
        z = min(s.h_max, max(np.sqrt(z_free2), s.h_min))
        case = "nearer-pr"
    elif d2 > qn2:
        z = s.h_min
        case = "nearer-sr"
    else:
        z = s.h_min  # any altitude is optimal here
        case = "equidistant"
    p_hat = min(ratio * (z * z + d2), s.p_hat_max)
    return float(z), float(p_hat), case


def _power_hat_at(s: Scenario, q: np.ndarray, z: float) -> np.ndarray:
    """Largest feasible p_hat at altitude z for (n, 2) candidate points."""
    q = np.atleast_2d(q)
    d2 = np.min(np.sum((q[:, None, :] - s.pr_locations[None]) ** 2, axis=2),
                axis=1)
    cap = (s.gamma_hat / s.beta0_hat) * (z * z + d2)
    return np.minimum(cap, s.p_hat_max)


def _zero_power_solution(s: Scenario, note: str) -> PlacementSolution:
    pos = Position3D(np.zeros(2), s.h_min)
    return PlacementSolution(pos, 0.0, 0.0, 0.0, "sdr-rank1",
                             {"warning": note})


def _unconstrained_solution(s: Scenario) -> PlacementSolution | None:
    """Full power straight above the SR, when the IT cap never binds there."""
    min_w2 = float(np.min(np.sum(s.pr_locations ** 2, axis=1)))
    if s.beta0_hat * s.p_hat_max / s.gamma_hat <= s.h_min ** 2 + min_w2:
        pos = Position3D(np.zeros(2), s.h_min)
        tau = s.p_hat_max / s.h_min ** 2
        return PlacementSolution(pos, s.p_max, achievable_rate(s, pos, s.p_max),
                                 tau, "sdr-rank1",
                                 {"bisection_iterations": 0, "rank_ratio": 0.0,
                                  "note": "IT constraints slack at the origin"})
    return None


def _gaussian_candidates(s_mat: np.ndarray, rng: np.random.Generator,
                         m: int) -> np.ndarray:
    """Randomized rank-one candidates: draw from N(0, S), rescale theta to 1.

    The solver returns S PSD only up to a small eigenvalue floor, so factor
    through a clipped eigendecomposition rather than a Cholesky.
    """
    lam, vec = np.linalg.eigh(s_mat)
    factor = vec * np.sqrt(np.clip(lam, 0.0, None))
    draws = rng.standard_normal((m, 3)) @ factor.T
    keep = np.abs(draws[:, 2]) > 1e-9
    draws = draws[keep]
    return draws[:, :2] / draws[:, 2:3]


def _extract_horizontal(s_mat: np.ndarray) -> tuple[np.ndarray, float]:
    """Dominant-eigenvector location and the rank ratio lambda2/lambda1."""
    lam, vec = np.linalg.eigh(s_mat)
    lam1, lam2 = lam[2], abs(lam[1])
    ratio = lam2 / max(lam1, 1e-300)
    v = vec[:, 2]
    if abs(v[2]) < 1e-12:
        return np.zeros(2), np.inf
    return v[:2] / v[2], ratio


def solve_placement(s: Scenario, eps_bis: float = EPS_BIS,
                    rank_tol: float = RANK_TOL, seed: int = 0,
                    m_samples: int = RANDOMIZATION_SAMPLES,
                    eps_feas: float = EPS_FEAS) -> PlacementSolution:
    """Solve the joint 3D placement and power problem for any PR layout.

    Altitude is h_min at the optimum; the horizontal location and power come
    from a bisection over the transformed SNR level tau in [0, p_hat_max /
    h_min**2], each step deciding feasibility of the lifted SDP.  The final
    power is recovered from the closed-form cap at the extracted location,
    which keeps every IT constraint satisfied exactly.
    """
    if s.gamma_it == 0.0:
        return _zero_power_solution(s, "Gamma = 0 forces zero transmit power")
    shortcut = _unconstrained_solution(s)
    if shortcut is not None:
        return shortcut

    tau_max = s.p_hat_max / s.h_min ** 2
    it_ratio = s.beta0_hat / s.gamma_hat
    lo, hi = 0.0, 1.0
    out_lo: SdpOutcome | None = None
    warm = None
    iters = 0
    indeterminate = 0
    # Normalized bisection: tau = level * tau_max.  The tolerance is applied
    # relative to the current level so the feasible endpoint carries enough
    # digits for a clean rank-one extraction.
    while hi - lo > eps_bis * max(lo, eps_bis):
        mid = 0.5 * (lo + hi)
        inst = SdpInstance(pr_locations=s.pr_locations, tau=mid * tau_max,
                           p_hat_max=s.p_hat_max, h_min2=s.h_min ** 2,
                           it_ratio=it_ratio)
        out = solve_sdp_feasibility(inst, eps_feas, start=warm)
        iters += 1
        if out.status == "numerically-indeterminate":
            indeterminate += 1
        if out.feasible:
            lo, out_lo = mid, out
            warm = out.residuals.get("_x_scaled")
        else:
            hi = mid

    if out_lo is None:
        return _zero_power_solution(
            s, "bisection found no feasible positive level")

    q_evd, rank_ratio = _extract_horizontal(out_lo.s_mat)
    candidates = [q_evd]
    method = "sdr-rank1"
    if rank_ratio > rank_tol:
        rng = np.random.default_rng(seed)
        extra = _gaussian_candidates(out_lo.s_mat, rng, m_samples)
        if extra.size:
            candidates.append(extra)
        method = "sdr-randomized"
    cand = np.vstack([np.atleast_2d(c) for c in candidates])
    p_hats = _power_hat_at(s, cand, s.h_min)
    objs = p_hats / (s.h_min ** 2 + np.sum(cand * cand, axis=1))
    best = int(np.argmax(objs))
    q_star, p_hat = cand[best], float(p_hats[best])

    pos = Position3D(q_star, s.h_min)
    p = p_hat ** (s.alpha / 2.0)
    diagnostics = {
        "bisection_iterations": iters,
        "indeterminate_probes": indeterminate,
        "rank_ratio": float(rank_ratio),
        "tau_level": lo,
        "phase1_slack": out_lo.max_slack,
        "sdp_newton_iterations": out_lo.iterations,
    }
    return PlacementSolution(pos, p, achievable_rate(s, pos, p),
                             float(objs[best]), method, diagnostics)


def solve_single_pr(s: Scenario) -> PlacementSolution:
    """Closed-form optimum for a single PR.

    The UAV sits on the ray from the PR through the SR at distance a* beyond
    the SR, at altitude h_min.  Three regimes: power-rich (interior optimum
    a_tilde independent of P), power-balanced (full power, IT tight) and
    power-poor (hover exactly above the SR at full power).
    """
    if s.n_prs != 1:
        raise ValueError(f"solve_single_pr needs exactly one PR, got {s.n_prs}")
    if s.gamma_it == 0.0:
        return _zero_power_solution(s, "Gamma = 0 forces zero transmit power")
    w1 = s.pr_locations[0]
    wn = float(np.linalg.norm(w1))
    direction = -w1 / wn if wn > 0.0 else np.array([1.0, 0.0])
    h2 = s.h_min ** 2
    ratio = s.gamma_hat / s.beta0_hat
    p1 = ratio * (wn ** 2 + h2)
    root = np.sqrt(wn ** 2 + 4.0 * h2)
    a_tilde = 0.5 * (root - wn)
    p_tilde = ratio * (0.25 * (wn + root) ** 2 + h2)

    if s.p_hat_max > p_tilde:
        a_star, p_hat, branch = a_tilde, p_tilde, "power-rich"
    elif s.p_hat_max >= p1:
        a_star = np.sqrt(s.beta0_hat * s.p_hat_max / s.gamma_hat - h2) - wn
        p_hat, branch = s.p_hat_max, "it-tight-full-power"
    else:
        a_star, p_hat, branch = 0.0, s.p_hat_max, "above-sr-full-power"

    pos = Position3D(a_star * direction, s.h_min)
    p = p_hat ** (s.alpha / 2.0)
    tau = p_hat / (h2 + a_star ** 2)
    return PlacementSolution(pos, p, achievable_rate(s, pos, p), tau,
                             "closed-form-k1",
                             {"branch": branch, "a_star": float(a_star),
                              "p1": p1, "p_tilde": p_tilde})


def grid_oracle(s: Scenario, bounds, resolution: float,
                z_values=None) -> tuple[Position3D, float, float]:
    """Brute-force verifier: exhaustive grid search of the placement problem.

    ``bounds`` is (x_min, x_max, y_min, y_max); the grid is anchored at the
    lower corner with the given step so refinements nest.  At each point the
    transmit power takes its closed-form optimal value.  Returns the best
    (position, power, rate).
    """
    x_min, x_max, y_min, y_max = (float(v) for v in bounds)
    if resolution <= 0.0 or x_max < x_min or y_max < y_min:
        raise ValueError("grid bounds/step define an empty grid")
    if z_values is None:
        z_values = (s.h_min,)
    xs = x_min + resolution * np.arange(int(np.floor((x_max - x_min)
                                                     / resolution)) + 1)
    ys = y_min + resolution * np.arange(int(np.floor((y_max - y_min)
                                                     / resolution)) + 1)
    if xs.size == 0 or ys.size == 0 or len(z_values) == 0:
        raise ValueError("grid bounds/step define an empty grid")
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    pts = np.column_stack([gx.ravel(), gy.ravel()])
    d2_pr = np.min(np.sum((pts[:, None, :] - s.pr_locations[None]) ** 2,
                          axis=2), axis=1)
    d2_sr = np.sum(pts * pts, axis=1)

    best = (None, 0.0, -1.0)
    for z in z_values:
        z = float(z)
        cap = (s.gamma_it / s.beta_0) * (z * z + d2_pr) ** (s.alpha / 2.0)
        p = np.minimum(cap, s.p_max)
        rate = np.log2(1.0 + s.eta_u * p * (z * z + d2_sr) ** (-s.alpha / 2.0))
        i = int(np.argmax(rate))
        if rate[i] > best[2]:
            best = (Position3D(pts[i], z), float(p[i]), float(rate[i]))
    return best


def solve_placement_fixed_power(s: Scenario, eps_bis: float = EPS_BIS,
                                rank_tol: float = RANK_TOL, seed: int = 0,
                                m_samples: int = RANDOMIZATION_SAMPLES,
                                eps_feas: float = EPS_FEAS) -> PlacementSolution:
    """Location-only optimization with the transmit power pinned at P.

    Used by the placement-only benchmark: maximize p_hat_max / (z**2 +
    ||q||**2) over (q, z) subject to z**2 + ||q - w_k||**2 >= beta0_hat *
    p_hat_max / gamma_hat.  The same lifted feasibility kernel applies with
    the squared altitude u = z**2 as the scalar variable.
    """
    if s.gamma_it == 0.0:
        raise ValueError("fixed-power placement is infeasible with Gamma = 0")
    shortcut = _unconstrained_solution(s)
    if shortcut is not None:
        shortcut.method = "fixed-q"
        return shortcut

    r2_req = s.beta0_hat * s.p_hat_max / s.gamma_hat
    scale = max(s.h_max, float(np.max(np.linalg.norm(s.pr_locations, axis=1))),
                np.sqrt(r2_req), 1.0)
    l2 = scale * scale
    w_scaled = s.pr_locations / scale
    y_lo, y_hi = s.h_min ** 2 / l2, s.h_max ** 2 / l2
    tau_max = s.p_hat_max / s.h_min ** 2

    def probe(level, warm):
        prob = _AffineFeasibility(
            w=w_scaled,
            r_a=s.p_hat_max / (level * tau_max * l2),
            c_a=-1.0,
            r_b=-r2_req / l2,
            c_b=1.0,
            y_lo=y_lo,
            y_hi=y_hi,
        )
        return solve_affine_feasibility(prob, eps_feas, warm)

    lo, hi = 0.0, 1.0
    out_lo, warm, iters = None, None, 0
    while hi - lo > eps_bis * max(lo, eps_bis):
        mid = 0.5 * (lo + hi)
        out = probe(mid, warm)
        iters += 1
        if out.feasible:
            lo, out_lo = mid, out
            warm = out.residuals.get("_x_scaled")
        else:
            hi = mid
    if out_lo is None:
        raise ValueError("fixed-power placement: no feasible level found; "
                         "the IT constraints cannot be met at full power")

    d = np.diag([scale, scale, 1.0])
    s_mat = d @ out_lo.s_mat @ d
    u_star = out_lo.p_hat * l2
    q_evd, rank_ratio = _extract_horizontal(s_mat)
    candidates = [np.atleast_2d(q_evd)]
    method = "sdr-rank1"
    if rank_ratio > rank_tol:
        rng = np.random.default_rng(seed)
        extra = _gaussian_candidates(s_mat, rng, m_samples)
        if extra.size:
            candidates.append(extra)
        method = "sdr-randomized"
    cand = np.vstack(candidates)
    # Feasibility at full power dictates the altitude per candidate.
    d2 = np.min(np.sum((cand[:, None, :] - s.pr_locations[None]) ** 2, axis=2),
                axis=1)
    u_need = np.maximum(s.h_min ** 2, r2_req - d2)
    ok = u_need <= s.h_max ** 2 * (1.0 + 1e-12)
    if not np.any(ok):
        cand = np.atleast_2d(q_evd)
        u_need = np.array([np.clip(u_star, s.h_min ** 2, s.h_max ** 2)])
        ok = np.array([True])
    cand, u_need = cand[ok], np.minimum(u_need[ok], s.h_max ** 2)
    objs = s.p_hat_max / (u_need + np.sum(cand * cand, axis=1))
    best = int(np.argmax(objs))
    q_star, z_star = cand[best], float(np.sqrt(u_need[best]))

    # Rounding slack: nudge the location outward until the tight IT margin
    # is non-negative (at most a few micro-steps).
    pos = Position3D(q_star, z_star)
    for _ in range(64):
        if np.min(it_margins_db(s, pos, s.p_max)) >= -1e-9:
            break
        q_star = q_star * (1.0 + 1e-9) if np.any(q_star) else q_star
        z_star = min(z_star * (1.0 + 1e-9), s.h_max)
        pos = Position3D(q_star, z_star)

    return PlacementSolution(
        pos, s.p_max, achievable_rate(s, pos, s.p_max), float(objs[best]),
        method if method == "sdr-randomized" else "fixed-q",
        {"bisection_iterations": iters, "rank_ratio": float(rank_ratio),
         "tau_level": lo, "scheme": "placement-only"})
