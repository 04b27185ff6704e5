"""Minimal single-HDU FITS writer, reader and structural validator.

Files carry one IMAGE HDU: 16-bit integers with the BZERO=32768 offset
convention, so unsigned detector samples s are stored as s - 32768 in
big-endian signed 16-bit.  The validator is deliberately independent of
the reader (raw byte checks only) so the two can cross-check each other.
"""

from __future__ import annotations

import datetime

import numpy as np

from ..errors import CcdaqError

BLOCK = 2880
CARD = 80
BZERO = 32768


class FitsError(CcdaqError):
    code = "fits"


def _card(keyword, value, comment=""):
    """One fixed-format 80-byte header card."""
    kw = keyword.ljust(8)
    if len(kw) > 8:
        raise FitsError(f"keyword too long: {keyword}")
    if isinstance(value, bool):
        body = ("T" if value else "F").rjust(20)
    elif isinstance(value, (int, np.integer)):
        body = str(int(value)).rjust(20)
    elif isinstance(value, float):
        body = repr(value).rjust(20)
    elif isinstance(value, str):
        s = value.replace("'", "''")
        body = f"'{s:<8s}'"
    else:
        raise FitsError(f"unsupported header value type: {type(value)}")
    card = f"{kw}= {body}"
    if comment:
        card += f" / {comment}"
    if len(card) > CARD:
        raise FitsError(f"card overflows 80 characters: {keyword}")
    return card.ljust(CARD)


def _pad(data: bytes, fill: bytes) -> bytes:
    rem = len(data) % BLOCK
    return data if rem == 0 else data + fill * (BLOCK - rem)


def encode_fits(samples: np.ndarray, header: dict) -> bytes:
    """Serialize a (height, width) uint16 array plus extra header cards."""
    if samples.dtype != np.uint16 or samples.ndim != 2:
        raise FitsError("samples must be a 2-d uint16 array")
    h, w = samples.shape
    cards = [
        _card("SIMPLE", True, "conforms to FITS standard"),
        _card("BITPIX", 16, "16-bit signed integers"),
        _card("NAXIS", 2),
        _card("NAXIS1", w),
        _card("NAXIS2", h),
        _card("BZERO", BZERO, "unsigned-integer offset"),
        _card("BSCALE", 1),
    ]
    for key, value in header.items():
        cards.append(_card(key, value))
    cards.append("END".ljust(CARD))
    head = _pad("".join(cards).encode("ascii"), b" ")
    data = _pad((samples.astype(np.int32) - BZERO).astype(">i2").tobytes(), b"\0")
    return head + data


def frame_header(frame) -> dict:
    """Standard keyword set for a recorded frame."""
    m = frame.meta
    p = m.params
    date_obs = datetime.datetime.fromtimestamp(
        m.t_start, tz=datetime.timezone.utc).strftime("%Y-%m-%dT%H:%M:%S.%f")[:-3]
    hdr = {
        "EXPTIME": float(p.exptime if p.exptime is not None else 0.0),
        "DATE-OBS": date_obs,
        "DETECTOR": m.detector,
        "EXPTYPE": p.exposure_type,
        "GAIN-IDX": p.gain_index,
        "SPEED": p.speed,
        "BINX": p.bin_x,
        "BINY": p.bin_y,
        "NODE": m.node,
        "SEED": m.seed,
        "INCOMPLT": bool(m.incomplete),
    }
    if p.roi is not None:
        hdr["ROI"] = ",".join(str(v) for v in p.roi)
    if m.saturated:
        hdr["SATURATD"] = int(m.saturated)
    if m.ramp_rows:
        hdr["RAMPROWS"] = int(m.ramp_rows)
    if m.missing_rows:
        hdr["MISSROWS"] = ",".join(str(r) for r in m.missing_rows[:16])
    return hdr


def write_fits(frame, path):
    with open(path, "wb") as f:
        f.write(encode_fits(frame.samples, frame_header(frame)))
    return path


def read_fits(path):
    """Parse one of our files back into (samples uint16, header dict)."""
    with open(path, "rb") as f:
        raw = f.read()
    header = {}
    pos = 0
    ended = False
    while not ended:
        block = raw[pos:pos + BLOCK]
        if len(block) < BLOCK:
            raise FitsError("truncated header")
        for i in range(0, BLOCK, CARD):
            card = block[i:i + CARD].decode("ascii")
            kw = card[:8].strip()
            if kw == "END":
                ended = True
                break
            if not kw or card[8:10] != "= ":
                continue
            val = card[10:].split(" / ", 1)[0].strip()
            if val.startswith("'"):
                header[kw] = val[1:val.rindex("'")].rstrip().replace("''", "'")
            elif val in ("T", "F"):
                header[kw] = val == "T"
            else:
                header[kw] = float(val) if "." in val or "E" in val else int(val)
        pos += BLOCK
    w, h = header["NAXIS1"], header["NAXIS2"]
    data = np.frombuffer(raw[pos:pos + w * h * 2], dtype=">i2")
    if data.size != w * h:
        raise FitsError("truncated data segment")
    samples = (data.astype(np.int32) + header.get("BZERO", 0)).astype(np.uint16)
    return samples.reshape(h, w), header


def validate_fits(path):
    """Structural checks over raw bytes; raises FitsError on any defect.

    Independent of read_fits: no value parsing beyond the handful of
    integers needed to locate the data segment.
    """
    with open(path, "rb") as f:
        raw = f.read()
    if len(raw) == 0 or len(raw) % BLOCK:
        raise FitsError(f"file length {len(raw)} is not a multiple of {BLOCK}")
    if not raw.startswith(b"SIMPLE  = "):
        raise FitsError("first card is not SIMPLE")
    if raw[10:30].strip() != b"T":
        raise FitsError("SIMPLE is not T")

    required = {"BITPIX": None, "NAXIS": None, "NAXIS1": None, "NAXIS2": None}
    pos = 0
    end_at = None
    while end_at is None:
        if pos >= len(raw):
            raise FitsError("no END card")
        block = raw[pos:pos + BLOCK]
        for i in range(0, BLOCK, CARD):
            card = block[i:i + CARD]
            if any(b < 0x20 or b > 0x7E for b in card):
                raise FitsError("non-printable character in header")
            kw = card[:8].strip().decode("ascii")
            if kw == "END":
                end_at = pos + i
                break
            if kw in required:
                required[kw] = int(card[10:30])
        pos += BLOCK
    header_bytes = pos

    missing = [k for k, v in required.items() if v is None]
    if missing:
        raise FitsError(f"missing required cards: {missing}")
    if required["BITPIX"] != 16:
        raise FitsError(f"BITPIX {required['BITPIX']}, expected 16")
    if required["NAXIS"] != 2:
        raise FitsError(f"NAXIS {required['NAXIS']}, expected 2")

    data_bytes = required["NAXIS1"] * required["NAXIS2"] * 2
    data_padded = -(-data_bytes // BLOCK) * BLOCK
    if len(raw) != header_bytes + data_padded:
        raise FitsError(
            f"file length {len(raw)} != header {header_bytes} + data {data_padded}")
    tail = raw[header_bytes + data_bytes:]
    if tail.strip(b"\0"):
        raise FitsError("data padding is not zero-filled")
    return {"header_bytes": header_bytes, "data_bytes": data_bytes,
            "naxis1": required["NAXIS1"], "naxis2": required["NAXIS2"]}
