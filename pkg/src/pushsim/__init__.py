"""Energy-minimal content pushing in a small-cell network.

Library plus CLI: a context-statistics solver estimates a water-filling
level and channel-gain threshold per user, a per-slot allocator applies
them online, and a Monte Carlo engine compares unicast pushing, broadcast
pre-caching, and a no-cache baseline on throughput and total energy.
"""

__version__ = "0.1.0"

from .channel import GammaChannelDist, PathLossParams, Trajectory
from .context import NetworkContext, ScaledContext, UserContext
from .traffic import ContentCatalog, DeliveryProcess, RTTrafficModel, UserInterestProfile
from .waterfill import PowerModel, PushTarget, SlotState, WaterfillPlan
