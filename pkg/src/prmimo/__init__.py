"""Polarization-reconfigurable MIMO simulation.

Joint polarization pre/post-coding, hybrid Tx antenna selection with MRT,
link metrics and a seeded Monte Carlo experiment harness.
"""

__version__ = "0.1.0"

from .channel import (  # noqa: E402
    ChannelGenConfig,
    ChannelTensor,
    PolarizationConfig,
    effective_channel,
    generate_channel,
    polarization_vector,
)
from .coding import joint_coding, waterfill, channel_capacity  # noqa: E402
from .selection import Scheme, select_ew, select_global, select_random_pol  # noqa: E402

__all__ = [
    "__version__",
    "ChannelGenConfig",
    "ChannelTensor",
    "PolarizationConfig",
    "effective_channel",
    "generate_channel",
    "polarization_vector",
    "joint_coding",
    "waterfill",
    "channel_capacity",
    "Scheme",
    "select_ew",
    "select_global",
    "select_random_pol",
]
