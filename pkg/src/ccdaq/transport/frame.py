"""Link-layer frame codec.

Wire layout (big-endian), 19-byte header + payload + CRC-32:

    offset  size  field
    0       2     magic 0xD1 0x4C
    2       2     session id
    4       4     message sequence number
    8       2     fragment index
    10      2     fragment total
    12      1     flags (1=control, 2=video, 4=ack, 8=reset)
    13      2     payload length
    15      n     payload (n <= 1472)
    15+n    4     CRC-32 (ISO-HDLC) over header+payload

Total frame size never exceeds 1500 bytes, the Ethernet MTU the link
discipline is modeled on.
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass

MAGIC = b"\xd1\x4c"
MAX_PAYLOAD = 1472
HEADER = struct.Struct(">2sHIHHBH")
TRAILER = struct.Struct(">I")
HEADER_SIZE = HEADER.size          # 15
OVERHEAD = HEADER_SIZE + TRAILER.size

FLAG_CONTROL = 0x01
FLAG_VIDEO = 0x02
FLAG_ACK = 0x04
FLAG_RESET = 0x08


class FrameError(ValueError):
    """Structurally invalid frame (bad magic, lengths, flags)."""


class CrcError(FrameError):
    """Frame failed its CRC-32 check."""


@dataclass
class Frame:
    session: int
    msg_seq: int
    frag_index: int
    frag_total: int
    flags: int
    payload: bytes

    def __post_init__(self):
        if not (0 <= self.frag_index < self.frag_total):
            raise FrameError(f"frag_index {self.frag_index} not below total {self.frag_total}")
        if len(self.payload) > MAX_PAYLOAD:
            raise FrameError(f"payload {len(self.payload)} exceeds {MAX_PAYLOAD}")


def encode_frame(f: Frame) -> bytes:
    head = HEADER.pack(MAGIC, f.session, f.msg_seq, f.frag_index, f.frag_total,
                       f.flags, len(f.payload))
    crc = zlib.crc32(f.payload, zlib.crc32(head))
    return head + f.payload + TRAILER.pack(crc)


def decode_frame(data: bytes) -> Frame:
    if len(data) < OVERHEAD:
        raise FrameError(f"short frame: {len(data)} bytes")
    magic, session, msg_seq, frag_index, frag_total, flags, plen = HEADER.unpack_from(data)
    if magic != MAGIC:
        raise FrameError("bad magic")
    if len(data) != OVERHEAD + plen:
        raise FrameError(f"length mismatch: header says {plen}, frame is {len(data)}")
    (crc,) = TRAILER.unpack_from(data, HEADER_SIZE + plen)
    if zlib.crc32(data[:HEADER_SIZE + plen]) != crc:
        raise CrcError("crc mismatch")
    return Frame(session=session, msg_seq=msg_seq, frag_index=frag_index,
                 frag_total=frag_total, flags=flags,
                 payload=data[HEADER_SIZE:HEADER_SIZE + plen])
