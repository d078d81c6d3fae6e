"""dB/dBm conversions, centralized so every module agrees on them.

Conventions: x_linear = 10**(x_dB/10), watts = 10**((x_dBm - 30)/10).
"""

import math


def db_to_linear(x_db: float) -> float:
    return 10.0 ** (x_db / 10.0)


def linear_to_db(x: float) -> float:
    if x <= 0.0:
        return -math.inf
    return 10.0 * math.log10(x)


def dbm_to_watts(x_dbm: float) -> float:
    return 10.0 ** ((x_dbm - 30.0) / 10.0)


def watts_to_dbm(p: float) -> float:
    if p <= 0.0:
        return -math.inf
    return 10.0 * math.log10(p) + 30.0
