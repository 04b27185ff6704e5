from . import commands
from .commands import (
    AsyncCommand,
    ControllerReply,
    SyncInstruction,
    VideoChunk,
    decode_program,
    encode_program,
    validate_program,
)
from .host import ControllerLink
from .sim import ControllerSim
from .telemetry import ControllerConfig, Telemetry, TelemetryRegisters

__all__ = [
    "AsyncCommand",
    "ControllerConfig",
    "ControllerLink",
    "ControllerReply",
    "ControllerSim",
    "SyncInstruction",
    "Telemetry",
    "TelemetryRegisters",
    "VideoChunk",
    "commands",
    "decode_program",
    "encode_program",
    "validate_program",
]
