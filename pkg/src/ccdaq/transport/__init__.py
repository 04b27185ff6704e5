from .channel import LossyChannel, UdpEndpoint
from .frame import (
    FLAG_ACK,
    FLAG_CONTROL,
    FLAG_RESET,
    FLAG_VIDEO,
    MAX_PAYLOAD,
    CrcError,
    Frame,
    FrameError,
    decode_frame,
    encode_frame,
)
from .session import (
    Message,
    SendReceipt,
    Transport,
    TransportConfig,
    TransportStatus,
)

__all__ = [
    "CrcError",
    "Frame",
    "FrameError",
    "LossyChannel",
    "MAX_PAYLOAD",
    "Message",
    "SendReceipt",
    "Transport",
    "TransportConfig",
    "TransportStatus",
    "UdpEndpoint",
    "decode_frame",
    "encode_frame",
    "FLAG_ACK",
    "FLAG_CONTROL",
    "FLAG_RESET",
    "FLAG_VIDEO",
]
