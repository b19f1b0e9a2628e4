"""crsim: joint spectrum sensing, subcarrier pairing and power allocation
for an OFDM cognitive-radio link with a decode-and-forward relay.
"""

__version__ = "0.1.0"

from .allocator import (  # noqa: F401
    Allocation,
    InfeasibleInstanceError,
    ProblemInstance,
    SolverConfig,
    solve_joint,
)
from .channel import GainRatios, LinkMode, compute_ratios  # noqa: F401
from .schemes import SchemeId, SchemeResult, solve_scheme  # noqa: F401
from .sensing import DetectorThresholds, SensingParams  # noqa: F401
from .simharness import Scenario, build_instance, random_instance, sweep  # noqa: F401
