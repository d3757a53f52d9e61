import numpy as np
import pytest

from coguav import MissionProfile, Scenario, dbm_to_watts


@pytest.fixture
def make_scenario():
    """Scenario factory with the default numeric setup baked in."""

    def factory(prs=((100.0, 0.0),), gamma_dbm=-80.0, p_max_dbm=23.0,
                alpha=2.0, h_min=170.0, h_max=220.0, beta_u=1e-3,
                beta_0=1e-3, sigma2=1e-11):
        return Scenario(pr_locations=np.asarray(prs, dtype=float),
                        beta_u=beta_u, beta_0=beta_0, sigma2=sigma2,
                        alpha=alpha, gamma_it=dbm_to_watts(gamma_dbm),
                        p_max=dbm_to_watts(p_max_dbm),
                        h_min=h_min, h_max=h_max)

    return factory


@pytest.fixture
def crossing_mission_factory():
    def factory(duration_t=200.0, n_slots=None):
        if n_slots is None:
            n_slots = max(2, int(np.ceil(duration_t)))
        return MissionProfile(q_initial=[-950.0, 1000.0],
                              q_final=[1000.0, -1000.0],
                              z_initial=170.0, z_final=170.0,
                              v_h=26.0, v_a=6.0, v_d=4.0,
                              duration_t=duration_t, n_slots=n_slots)

    return factory
