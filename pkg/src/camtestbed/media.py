"""NAL-like framed synthetic video.

Wire form of one frame::

    00 00 00 01 | kind (0x65 I, 0x41 P) | payload length (u32 BE) | payload

Payload bytes never contain a start code, so a stream can be re-synchronised
by scanning for ``00 00 00 01``.
"""
from __future__ import annotations

import random
import struct
from dataclasses import dataclass
from enum import Enum

START_CODE = b"\x00\x00\x00\x01"
HEADER_LEN = len(START_CODE) + 1 + 4

FRAME_INTERVAL_MS = 100
GOP = 10
MIN_PAYLOAD = 400
MAX_PAYLOAD = 1400


class FrameKind(Enum):
    I = 0x65
    P = 0x41


@dataclass(frozen=True)
class MediaFrame:
    index: int
    kind: FrameKind
    payload: bytes

    def serialize(self) -> bytes:
        return START_CODE + bytes([self.kind.value]) + struct.pack(">I", len(self.payload)) + self.payload


# A received or extracted stream is just an ordered list of frames.
MediaStream = list


def _scrub(payload: bytearray) -> bytes:
    # break any 00 00 00 / 00 00 01 run so no start code can appear
    for i in range(2, len(payload)):
        if payload[i - 2] == 0 and payload[i - 1] == 0 and payload[i] <= 1:
            payload[i] = 0x03
    return bytes(payload)


class MediaSource:
    """Seeded frame generator; frame ``i`` depends only on ``(seed, i)``."""

    def __init__(self, seed: int = 0, gop: int = GOP,
                 min_payload: int = MIN_PAYLOAD, max_payload: int = MAX_PAYLOAD):
        self.seed = seed
        self.gop = gop
        self.min_payload = min_payload
        self.max_payload = max_payload

    def frame(self, index: int) -> MediaFrame:
        rng = random.Random(f"media:{self.seed}:{index}")
        size = rng.randint(self.min_payload, self.max_payload)
        kind = FrameKind.I if index % self.gop == 0 else FrameKind.P
        return MediaFrame(index, kind, _scrub(bytearray(rng.randbytes(size))))

    def frames(self, count: int) -> list[MediaFrame]:
        return [self.frame(i) for i in range(count)]


def parse_frame(data: bytes, index: int = 0) -> MediaFrame:
    """Parse exactly one serialized frame; raises ValueError otherwise."""
    frames = parse_frames(data)
    if len(frames) != 1 or len(frames[0].serialize()) != len(data):
        raise ValueError("not a single well-formed frame")
    f = frames[0]
    return MediaFrame(index, f.kind, f.payload)


def parse_frames(data: bytes) -> list[MediaFrame]:
    """Scan ``data`` for start codes and return every well-formed frame.

    A candidate is accepted only when its kind byte is known, its declared
    length fits, its payload is free of start codes and it ends exactly at
    the next start code or at the end of the buffer.
    """
    frames = []
    pos = data.find(START_CODE)
    while pos != -1:
        nxt = data.find(START_CODE, pos + 1)
        frame = _try_frame(data, pos, nxt)
        if frame is not None:
            kind, payload = frame
            frames.append(MediaFrame(len(frames), kind, payload))
        pos = nxt
    return frames


def _try_frame(data: bytes, pos: int, nxt: int):
    if pos + HEADER_LEN > len(data):
        return None
    try:
        kind = FrameKind(data[pos + 4])
    except ValueError:
        return None
    (size,) = struct.unpack_from(">I", data, pos + 5)
    end = pos + HEADER_LEN + size
    if end > len(data):
        return None
    if end != (len(data) if nxt == -1 else nxt):
        return None
    return kind, bytes(data[pos + HEADER_LEN:end])
