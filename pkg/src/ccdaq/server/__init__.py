from .assemble import FrameAssembler
from .channels import ChannelSet
from .core import CcdServer, ServerConfig, parse_command_line
from .devices import DeviceClient, DeviceError, load_devices
from .fits import encode_fits, read_fits, validate_fits, write_fits
from .fsm import CONTROL_VERBS, ControlState, Transition, transition

__all__ = [
    "CONTROL_VERBS",
    "CcdServer",
    "ChannelSet",
    "ControlState",
    "DeviceClient",
    "DeviceError",
    "FrameAssembler",
    "ServerConfig",
    "Transition",
    "encode_fits",
    "load_devices",
    "parse_command_line",
    "read_fits",
    "transition",
    "validate_fits",
    "write_fits",
]
