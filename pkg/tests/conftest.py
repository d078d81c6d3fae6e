"""Shared fixtures: desk-scale scenario configs and cached pipeline runs."""

import json
import math
import warnings

import numpy as np
import pytest

from nfisac.config import parse_scenario_config
from nfisac.experiments import build_scenario
from nfisac.geometry import ArrayGeometry, region_bounds

DESK_SEEDS = list(range(1, 11))


def desk_geometry(n=8, frequency_hz=2.8e10):
    return ArrayGeometry.from_frequency(n, frequency_hz)


def desk_scenario_dict(
    n=8,
    k=2,
    l=1,
    m=1,
    eta=0.1,
    p0_dbm=30.0,
    sinr_db=5.0,
    leak_db=-3.0,
    noise_dbm=-80.0,
    target_range_fraction=0.18,
    target_range_m=None,
    eve_position=None,
    eta_c=None,
    eta_e=None,
    eta_t=None,
):
    """Desk-scale scenario config (paper constants, N=8 by default).

    Targets sit at 0.18 of the Rayleigh distance (angles -pi/4 then +pi/5);
    CUs, and by default eavesdroppers, are placed randomly per seed within
    the documented near-field window.
    """
    _, d_r = region_bounds(desk_geometry(n))
    t_range = target_range_m if target_range_m is not None else target_range_fraction * d_r
    angles = [-math.pi / 4, math.pi / 5, -math.pi / 8, math.pi / 3]
    cfg = {
        "frequency_hz": 2.8e10,
        "antenna_count": n,
        "power_budget_dbm": p0_dbm,
        "cus": [
            {
                "noise_dbm": noise_dbm,
                "sinr_threshold_db": sinr_db,
                "eta": eta_c if eta_c is not None else eta,
            }
            for _ in range(k)
        ],
        "eves": [
            {
                "noise_dbm": noise_dbm,
                "leak_threshold_db": leak_db,
                "eta": eta_e if eta_e is not None else eta,
            }
            for _ in range(l)
        ],
        "targets": [
            {
                "range_m": t_range,
                "angle_rad": angles[i % len(angles)],
                "eta": eta_t if eta_t is not None else eta,
            }
            for i in range(m)
        ],
    }
    if eve_position is not None:
        for e in cfg["eves"]:
            e["range_m"], e["angle_rad"] = eve_position
    return cfg


def desk_scenario(seed, **kwargs):
    cfg = parse_scenario_config(json.dumps(desk_scenario_dict(**kwargs)))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return build_scenario(cfg, seed)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240811)


@pytest.fixture(autouse=True)
def _quiet_warnings():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        yield
