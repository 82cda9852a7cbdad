"""Single-flow TCP simulator with six congestion-control algorithms."""

from .cc import (
    AckInfo,
    Phase,
    SenderState,
    aimd_step,
    cc_on_ack,
    cc_on_loss,
    cc_on_timeout,
    cubic_window,
    make_state,
)
from .engine import RadioResult, SimulationStall, simulate_flow, wireless_stage
from .trace import (
    ALL_ALGORITHMS,
    CcAlgorithm,
    FlowTrace,
    LinkConfig,
    PacketRecord,
    SimStats,
    WirelessConfig,
    file_sha256,
)

__all__ = [
    "ALL_ALGORITHMS",
    "AckInfo",
    "CcAlgorithm",
    "FlowTrace",
    "LinkConfig",
    "PacketRecord",
    "Phase",
    "RadioResult",
    "SenderState",
    "SimStats",
    "SimulationStall",
    "WirelessConfig",
    "aimd_step",
    "cc_on_ack",
    "cc_on_loss",
    "cc_on_timeout",
    "cubic_window",
    "file_sha256",
    "make_state",
    "simulate_flow",
    "wireless_stage",
]
