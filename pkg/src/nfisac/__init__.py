"""nfisac: robust max-min beampattern beamforming for near-field secure ISAC.

Library plus CLI implementing the full design pipeline: near-field channel and
threat model, S-procedure reformulation of the norm-bounded CSI uncertainty
constraints into LMIs, an interior-point SDP solver, sequential rank-one
constraint relaxation, comparison baselines, and an independent worst-case
verifier built on an exact trust-region oracle.
"""

__version__ = "0.1.0"

from .geometry import (
    ArrayGeometry,
    CommUser,
    CsiEstimate,
    Eavesdropper,
    PolarPoint,
    Scenario,
    SensingTarget,
)
from .metrics import BeamformingSolution

__all__ = [
    "__version__",
    "ArrayGeometry",
    "PolarPoint",
    "CsiEstimate",
    "CommUser",
    "Eavesdropper",
    "SensingTarget",
    "Scenario",
    "BeamformingSolution",
]
