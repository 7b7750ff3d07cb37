"""CaptureRecord / CaptureFile and the JSON-lines persistence format.

One record per line::

    {"ts": 1000, "seq": 7, "src": "camera:6970", "dst": "client:5000",
     "transport": "UDP", "channel": "PLAIN", "frag": false, "len": 412,
     "payload": "<base64>"}

``len`` always equals the decoded payload length.
"""
from __future__ import annotations

import base64
import binascii
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator

_KEYS = ("ts", "seq", "src", "dst", "transport", "channel", "frag", "len", "payload")


@dataclass(frozen=True)
class CaptureRecord:
    ts: int
    seq: int
    src: str
    dst: str
    transport: str
    channel: str
    frag: bool
    payload: bytes

    @property
    def len(self) -> int:
        return len(self.payload)

    @property
    def src_node(self) -> str:
        return self.src.rsplit(":", 1)[0]

    @property
    def dst_node(self) -> str:
        return self.dst.rsplit(":", 1)[0]

    @classmethod
    def from_packet(cls, packet) -> "CaptureRecord":
        return cls(
            ts=packet.ts,
            seq=packet.seq,
            src=str(packet.src),
            dst=str(packet.dst),
            transport=packet.transport.value,
            channel=packet.channel.value,
            frag=packet.fragmented,
            payload=bytes(packet.payload),
        )

    def to_dict(self) -> dict:
        return {
            "ts": self.ts,
            "seq": self.seq,
            "src": self.src,
            "dst": self.dst,
            "transport": self.transport,
            "channel": self.channel,
            "frag": self.frag,
            "len": self.len,
            "payload": base64.b64encode(self.payload).decode("ascii"),
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "CaptureRecord":
        missing = [k for k in _KEYS if k not in obj]
        if missing:
            raise ValueError(f"capture record missing keys: {', '.join(missing)}")
        try:
            payload = base64.b64decode(obj["payload"], validate=True)
        except (binascii.Error, TypeError) as exc:
            raise ValueError(f"bad base64 payload: {exc}") from None
        if obj["len"] != len(payload):
            raise ValueError(f"len={obj['len']} but payload decodes to {len(payload)} bytes")
        if obj["transport"] not in ("UDP", "TCP"):
            raise ValueError(f"bad transport {obj['transport']!r}")
        if obj["channel"] not in ("PLAIN", "TLS", "AESSTREAM"):
            raise ValueError(f"bad channel {obj['channel']!r}")
        return cls(
            ts=int(obj["ts"]),
            seq=int(obj["seq"]),
            src=str(obj["src"]),
            dst=str(obj["dst"]),
            transport=obj["transport"],
            channel=obj["channel"],
            frag=bool(obj["frag"]),
            payload=payload,
        )


class CaptureFile:
    """Ordered list of capture records, sorted by ``(ts, seq)``."""

    def __init__(self, records: Iterable[CaptureRecord] = ()):
        self.records: list[CaptureRecord] = list(records)

    def append(self, record: CaptureRecord) -> None:
        self.records.append(record)

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self) -> Iterator[CaptureRecord]:
        return iter(self.records)

    def __getitem__(self, i):
        return self.records[i]

    def is_sorted(self) -> bool:
        keys = [(r.ts, r.seq) for r in self.records]
        return all(a < b for a, b in zip(keys, keys[1:]))

    def to_jsonl(self) -> str:
        return "".join(json.dumps(r.to_dict()) + "\n" for r in self.records)

    @classmethod
    def from_jsonl(cls, text: str) -> "CaptureFile":
        records = []
        for lineno, line in enumerate(text.splitlines(), 1):
            if not line.strip():
                continue
            try:
                records.append(CaptureRecord.from_dict(json.loads(line)))
            except (ValueError, json.JSONDecodeError) as exc:
                raise ValueError(f"line {lineno}: {exc}") from None
        capture = cls(records)
        if not capture.is_sorted():
            raise ValueError("capture records are not sorted by (ts, seq)")
        return capture

    def write(self, path) -> Path:
        path = Path(path)
        path.write_text(self.to_jsonl(), encoding="utf-8")
        return path

    @classmethod
    def read(cls, path) -> "CaptureFile":
        return cls.from_jsonl(Path(path).read_text(encoding="utf-8"))
