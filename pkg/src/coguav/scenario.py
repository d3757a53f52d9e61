"""Physical model of the spectrum-sharing scene.

A secondary UAV transmitter serves a ground secondary receiver (SR) fixed at
the origin while a set of protected primary receivers (PRs) imposes a cap on
the interference power each of them may receive.  All air-to-ground links use
a line-of-sight power law ``beta * d**(-alpha)``.

Everything in this module computes in linear SI units (watts, meters);
dB / dBm appear only at the config-file boundary.
"""

from __future__ import annotations

import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib as _toml
else:
    import tomli as _toml


class ConfigError(ValueError):
    """Raised for malformed config files or violated model invariants."""


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


def linear_to_db(value: float) -> float:
    return 10.0 * np.log10(value)


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


def watts_to_dbm(watts: float) -> float:
    if watts <= 0.0:
        return -np.inf
    return 10.0 * np.log10(watts) + 30.0


@dataclass(frozen=True)
class Position3D:
    """A UAV position: horizontal coordinate ``q`` (m) and altitude ``z`` (m)."""

    q: np.ndarray
    z: float

    def __post_init__(self):
        q = np.asarray(self.q, dtype=float).reshape(2)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "z", float(self.z))
        if not (np.all(np.isfinite(q)) and np.isfinite(self.z)):
            raise ConfigError("position must be finite")


@dataclass(frozen=True)
class Scenario:
    """Immutable problem instance for one spectrum-sharing scene.

    Attributes
    ----------
    pr_locations : (K, 2) array of PR horizontal coordinates in meters,
        relative to the SR at the origin.
    beta_u : linear reference channel gain from the UAV to the SR.
    beta_0 : linear worst-case reference gain from the UAV to any PR.
    sigma2 : noise-plus-terrestrial-interference power at the SR, watts.
    alpha : path-loss exponent, >= 2.
    gamma_it : interference-temperature cap at each PR, watts.
    p_max : maximum UAV transmit power, watts.
    h_min, h_max : altitude bounds, meters.
    eta_u : derived reference SNR beta_u / sigma2 (set automatically).
    """

    pr_locations: np.ndarray
    beta_u: float
    beta_0: float
    sigma2: float
    alpha: float
    gamma_it: float
    p_max: float
    h_min: float
    h_max: float
    eta_u: float = field(init=False)

    def __post_init__(self):
        prs = np.asarray(self.pr_locations, dtype=float)
        if prs.ndim != 2 or prs.shape[1] != 2 or prs.shape[0] == 0:
            raise ConfigError("pr_locations must be a non-empty (K, 2) array")
        if not np.all(np.isfinite(prs)):
            raise ConfigError("pr_locations must be finite")
        object.__setattr__(self, "pr_locations", prs)
        for name in ("beta_u", "beta_0", "sigma2", "alpha", "gamma_it",
                     "p_max", "h_min", "h_max"):
            object.__setattr__(self, name, float(getattr(self, name)))
        if self.alpha < 2.0:
            raise ConfigError(f"alpha must be >= 2, got {self.alpha}")
        if not (0.0 < self.h_min <= self.h_max):
            raise ConfigError("need 0 < h_min <= h_max")
        if self.p_max <= 0.0:
            raise ConfigError("p_max must be positive")
        if self.gamma_it < 0.0:
            raise ConfigError("gamma_it must be non-negative")
        if self.beta_u <= 0.0 or self.beta_0 <= 0.0 or self.sigma2 <= 0.0:
            raise ConfigError("beta_u, beta_0 and sigma2 must be positive")
        object.__setattr__(self, "eta_u", self.beta_u / self.sigma2)

    @property
    def n_prs(self) -> int:
        return self.pr_locations.shape[0]

    # Power-domain transform p = p_hat**(alpha/2) used by the placement
    # pipeline; with alpha = 2 all of these are identities.
    @property
    def beta0_hat(self) -> float:
        return self.beta_0 ** (2.0 / self.alpha)

    @property
    def gamma_hat(self) -> float:
        return self.gamma_it ** (2.0 / self.alpha)

    @property
    def p_hat_max(self) -> float:
        return self.p_max ** (2.0 / self.alpha)


@dataclass(frozen=True)
class MissionProfile:
    """Mission endpoints, speed limits and discretization for a mobile UAV.

    ``duration_t`` is the mission time T in seconds and ``n_slots`` the number
    of discrete slots N, so each slot lasts ``dt = T / N``.  Speeds are in m/s
    (``v_h`` horizontal, ``v_a`` ascend, ``v_d`` descend).
    """

    q_initial: np.ndarray
    q_final: np.ndarray
    z_initial: float
    z_final: float
    v_h: float
    v_a: float
    v_d: float
    duration_t: float
    n_slots: int

    def __post_init__(self):
        for name in ("q_initial", "q_final"):
            q = np.asarray(getattr(self, name), dtype=float).reshape(2)
            if not np.all(np.isfinite(q)):
                raise ConfigError(f"{name} must be finite")
            object.__setattr__(self, name, q)
        for name in ("z_initial", "z_final", "v_h", "v_a", "v_d", "duration_t"):
            object.__setattr__(self, name, float(getattr(self, name)))
        object.__setattr__(self, "n_slots", int(self.n_slots))
        if min(self.v_h, self.v_a, self.v_d) <= 0.0:
            raise ConfigError("speed limits must be positive")
        if self.duration_t <= 0.0:
            raise ConfigError("duration_t must be positive")
        if self.n_slots < 2:
            raise ConfigError("n_slots must be at least 2")

    @property
    def dt(self) -> float:
        return self.duration_t / self.n_slots


def channel_gain_sr(s: Scenario, pos: Position3D) -> float:
    """Channel power gain from the UAV at ``pos`` to the SR.

    h = beta_u / (z**2 + ||q||**2)**(alpha/2); strictly positive and strictly
    decreasing in both the horizontal distance and the altitude.
    """
    if pos.z <= 0.0:
        raise ConfigError("UAV altitude must be positive")
    d2 = pos.z ** 2 + float(pos.q @ pos.q)
    return s.beta_u * d2 ** (-s.alpha / 2.0)


def interference_at_pr(s: Scenario, pos: Position3D, p: float, k: int) -> float:
    """Worst-case interference power (watts) received at PR ``k``.

    Q_k = beta_0 * p / (z**2 + ||q - w_k||**2)**(alpha/2).  The worst-case
    gain bound beta_0 stands in for the unknown per-PR antenna gain.
    """
    if p < 0.0:
        raise ConfigError("transmit power must be non-negative")
    if not 0 <= k < s.n_prs:
        raise IndexError(f"PR index {k} out of range for K={s.n_prs}")
    d2 = pos.z ** 2 + float(np.sum((pos.q - s.pr_locations[k]) ** 2))
    return s.beta_0 * p * d2 ** (-s.alpha / 2.0)


def achievable_rate(s: Scenario, pos: Position3D, p: float) -> float:
    """SR's achievable rate in bps/Hz: log2(1 + eta_u * p / d_sr**alpha)."""
    if p < 0.0:
        raise ConfigError("transmit power must be non-negative")
    d2 = pos.z ** 2 + float(pos.q @ pos.q)
    return float(np.log2(1.0 + s.eta_u * p * d2 ** (-s.alpha / 2.0)))


# Vectorized forms used by the trajectory pipeline; q is (N, 2), z and p (N,).

def sr_distance2(q: np.ndarray, z: np.ndarray) -> np.ndarray:
    q = np.atleast_2d(np.asarray(q, dtype=float))
    return np.asarray(z, dtype=float) ** 2 + np.sum(q * q, axis=1)


def pr_distance2(s: Scenario, q: np.ndarray, z: np.ndarray) -> np.ndarray:
    """Squared 3D distances to every PR, shape (N, K)."""
    q = np.atleast_2d(np.asarray(q, dtype=float))
    z = np.asarray(z, dtype=float)
    diff = q[:, None, :] - s.pr_locations[None, :, :]
    return z[:, None] ** 2 + np.sum(diff * diff, axis=2)


def power_cap(s: Scenario, q: np.ndarray, z: np.ndarray) -> np.ndarray:
    """Largest per-slot power the IT constraints allow, before the P cap."""
    d2 = pr_distance2(s, q, z)
    return (s.gamma_it / s.beta_0) * np.min(d2, axis=1) ** (s.alpha / 2.0)


def rate_profile(s: Scenario, q: np.ndarray, z: np.ndarray,
                 p: np.ndarray) -> np.ndarray:
    d2 = sr_distance2(q, z)
    return np.log2(1.0 + s.eta_u * np.asarray(p, dtype=float)
                   * d2 ** (-s.alpha / 2.0))


# ---------------------------------------------------------------------------
# Config I/O.  The scenario file is TOML; dB/dBm fields are converted to
# linear units on load.  Field names are part of the repo contract.
# ---------------------------------------------------------------------------

_SCENARIO_DEFAULTS = {
    "beta_u_db": -30.0,
    "beta_0_db": -30.0,
    "sigma2_dbm": -80.0,
    "alpha": 2.0,
    "gamma_dbm": -80.0,
    "p_max_dbm": 23.0,
    "h_min_m": 170.0,
    "h_max_m": 220.0,
}

_MISSION_DEFAULTS = {
    "v_h": 26.0,
    "v_a": 6.0,
    "v_d": 4.0,
}

_MISSION_REQUIRED = ("q_initial", "q_final", "z_initial", "z_final",
                     "t_seconds")


def _check_keys(table: dict, allowed: set, where: str):
    unknown = set(table) - allowed
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {sorted(unknown)}")


def load_scenario(path) -> tuple[Scenario, MissionProfile | None]:
    """Load a scenario (and optional mission table) from a TOML file.

    Omitted fields fall back to the default numeric setup (sigma2 = -80 dBm,
    beta_u = beta_0 = -30 dB, alpha = 2, H in [170, 220] m, Gamma = -80 dBm,
    P = 23 dBm; Inspire-2 speed limits for missions).
    """
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            raw = _toml.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"scenario file not found: {path}")
    except _toml.TOMLDecodeError as exc:
        raise ConfigError(f"malformed TOML in {path}: {exc}")

    allowed = set(_SCENARIO_DEFAULTS) | {"prs", "mission"}
    _check_keys(raw, allowed, str(path))
    if "prs" not in raw:
        raise ConfigError(f"{path}: missing required key 'prs'")

    vals = dict(_SCENARIO_DEFAULTS)
    for key in _SCENARIO_DEFAULTS:
        if key in raw:
            vals[key] = float(raw[key])

    scenario = Scenario(
        pr_locations=np.asarray(raw["prs"], dtype=float),
        beta_u=db_to_linear(vals["beta_u_db"]),
        beta_0=db_to_linear(vals["beta_0_db"]),
        sigma2=dbm_to_watts(vals["sigma2_dbm"]),
        alpha=vals["alpha"],
        gamma_it=dbm_to_watts(vals["gamma_dbm"]),
        p_max=dbm_to_watts(vals["p_max_dbm"]),
        h_min=vals["h_min_m"],
        h_max=vals["h_max_m"],
    )

    mission = None
    if "mission" in raw:
        mt = raw["mission"]
        _check_keys(mt, set(_MISSION_REQUIRED) | set(_MISSION_DEFAULTS)
                    | {"n_slots"}, f"{path} [mission]")
        missing = [k for k in _MISSION_REQUIRED if k not in mt]
        if missing:
            raise ConfigError(f"{path} [mission]: missing {missing}")
        t_seconds = float(mt["t_seconds"])
        n_slots = int(mt.get("n_slots", max(2, int(np.ceil(t_seconds)))))
        mission = MissionProfile(
            q_initial=mt["q_initial"],
            q_final=mt["q_final"],
            z_initial=float(mt["z_initial"]),
            z_final=float(mt["z_final"]),
            v_h=float(mt.get("v_h", _MISSION_DEFAULTS["v_h"])),
            v_a=float(mt.get("v_a", _MISSION_DEFAULTS["v_a"])),
            v_d=float(mt.get("v_d", _MISSION_DEFAULTS["v_d"])),
            duration_t=t_seconds,
            n_slots=n_slots,
        )
    return scenario, mission


def _fmt(value: float) -> str:
    return repr(float(value))


def save_scenario(path, s: Scenario, m: MissionProfile | None = None):
    """Write a scenario (and optional mission) back out as TOML.

    Linear quantities are converted back to the dB/dBm fields of the config
    contract; a save -> load round trip reproduces all linear values.
    """
    lines = []
    prs = ", ".join(f"[{_fmt(x)}, {_fmt(y)}]" for x, y in s.pr_locations)
    lines.append(f"prs = [{prs}]")
    lines.append(f"beta_u_db = {_fmt(linear_to_db(s.beta_u))}")
    lines.append(f"beta_0_db = {_fmt(linear_to_db(s.beta_0))}")
    lines.append(f"sigma2_dbm = {_fmt(watts_to_dbm(s.sigma2))}")
    lines.append(f"alpha = {_fmt(s.alpha)}")
    lines.append(f"gamma_dbm = {_fmt(watts_to_dbm(s.gamma_it))}")
    lines.append(f"p_max_dbm = {_fmt(watts_to_dbm(s.p_max))}")
    lines.append(f"h_min_m = {_fmt(s.h_min)}")
    lines.append(f"h_max_m = {_fmt(s.h_max)}")
    if m is not None:
        lines.append("")
        lines.append("[mission]")
        lines.append(f"q_initial = [{_fmt(m.q_initial[0])}, {_fmt(m.q_initial[1])}]")
        lines.append(f"q_final = [{_fmt(m.q_final[0])}, {_fmt(m.q_final[1])}]")
        lines.append(f"z_initial = {_fmt(m.z_initial)}")
        lines.append(f"z_final = {_fmt(m.z_final)}")
        lines.append(f"v_h = {_fmt(m.v_h)}")
        lines.append(f"v_a = {_fmt(m.v_a)}")
        lines.append(f"v_d = {_fmt(m.v_d)}")
        lines.append(f"t_seconds = {_fmt(m.duration_t)}")
        lines.append(f"n_slots = {m.n_slots}")
    Path(path).write_text("\n".join(lines) + "\n")


def save_results(path, payload: dict):
    """Dump a result record as JSON (stdout when path is '-')."""
    text = json.dumps(payload, indent=2, default=_json_default)
    if str(path) == "-":
        sys.stdout.write(text + "\n")
    else:
        Path(path).write_text(text + "\n")


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    raise TypeError(f"not JSON serializable: {type(obj)}")
