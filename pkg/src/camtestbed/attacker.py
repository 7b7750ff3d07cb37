"""On-path attacker toolkit: media extraction, the motion side channel,
notification suppression and request flooding."""
from __future__ import annotations

import csv
import io
import logging
import math
import random
from dataclasses import dataclass, field
from typing import Iterable, Optional

from .camera import NOTIFICATION_LEN
from .capture import CaptureFile, CaptureRecord
from .errors import BadBinWidth
from .media import parse_frames
from .netsim import (
    Channel,
    Endpoint,
    HookAction,
    MitmHook,
    Network,
    Packet,
    send_tls,
)

log = logging.getLogger(__name__)

NO_VALID_FRAMES = "NoValidFrames"


class ExtractedStream(list):
    """Frames recovered from a capture; empty means ``NoValidFrames``."""

    @property
    def diagnostic(self) -> Optional[str]:
        return None if self else NO_VALID_FRAMES


def extract_media(capture: Iterable[CaptureRecord],
                  between: Optional[tuple[str, str]] = None) -> ExtractedStream:
    """Reassemble plaintext UDP media from a capture.

    Payloads of PLAIN UDP records (optionally only those exchanged between
    the two named nodes) are concatenated in capture order and scanned for
    start codes.
    """
    pair = set(between) if between else None
    buf = bytearray()
    for rec in capture:
        if rec.transport != "UDP" or rec.channel != "PLAIN":
            continue
        if pair is not None and {rec.src_node, rec.dst_node} != pair:
            continue
        buf += rec.payload
    frames = ExtractedStream(parse_frames(bytes(buf)))
    if not frames:
        log.info("extract_media: %s", NO_VALID_FRAMES)
    return frames


@dataclass
class MotionHistogram:
    bin_width: int  # seconds
    origin: int  # ms
    bins: list[int] = field(default_factory=list)

    @property
    def total(self) -> int:
        return sum(self.bins)

    def bin_start(self, i: int) -> int:
        return self.origin + i * self.bin_width * 1000

    @classmethod
    def from_times(cls, times_ms: Iterable[int], bin_width: int = 600, origin: int = 0,
                   span_ms: Optional[int] = None) -> "MotionHistogram":
        if bin_width <= 0:
            raise BadBinWidth(f"bin width must be positive, got {bin_width}")
        width = bin_width * 1000
        times = list(times_ms)
        if span_ms is not None:
            nbins = math.ceil(span_ms / width)
        else:
            nbins = max(((t - origin) // width + 1 for t in times), default=0)
        bins = [0] * nbins
        for t in times:
            i = (t - origin) // width
            if 0 <= i < nbins:
                bins[i] += 1
        return cls(bin_width, origin, bins)

    def to_csv(self) -> str:
        out = io.StringIO()
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(["bin_start_ms", "count"])
        for i, count in enumerate(self.bins):
            writer.writerow([self.bin_start(i), count])
        return out.getvalue()

    @classmethod
    def from_csv(cls, text: str, bin_width: int) -> "MotionHistogram":
        rows = list(csv.reader(io.StringIO(text)))
        if not rows or rows[0] != ["bin_start_ms", "count"]:
            raise ValueError("not a motion histogram CSV")
        body = rows[1:]
        origin = int(body[0][0]) if body else 0
        return cls(bin_width, origin, [int(r[1]) for r in body])


def motion_records(capture: Iterable[CaptureRecord], size: int = NOTIFICATION_LEN,
                   camera: str = "camera", cloud: str = "cloud") -> list[CaptureRecord]:
    return [
        r for r in capture
        if r.channel == "TLS" and r.len == size and r.src_node == camera and r.dst_node == cloud
    ]


def motion_histogram(capture: Iterable[CaptureRecord], size: int = NOTIFICATION_LEN,
                     bin: int = 600, *, origin: int = 0, span_ms: Optional[int] = None,
                     camera: str = "camera", cloud: str = "cloud") -> MotionHistogram:
    """Count camera-to-cloud TLS records of exactly ``size`` bytes per ``bin`` seconds."""
    if bin <= 0:
        raise BadBinWidth(f"bin width must be positive, got {bin}")
    records = motion_records(capture, size, camera, cloud)
    return MotionHistogram.from_times((r.ts for r in records), bin, origin, span_ms)


def is_motion_notification(packet: Packet, camera: str = "camera",
                           size: int = NOTIFICATION_LEN) -> bool:
    return packet.channel is Channel.TLS and packet.length == size and packet.src.node == camera


def suppress_motion(net: Network, camera: str = "camera", cloud: str = "cloud",
                    size: int = NOTIFICATION_LEN) -> MitmHook:
    """Drop every motion notification on the camera-cloud link.

    Raises HookConflict if that link already carries a hook.
    """
    return net.install_hook(
        (camera, cloud), lambda p: is_motion_notification(p, camera, size), HookAction.DROP,
    )


def capture(net: Network, location, filter=None) -> CaptureFile:
    """Start passively recording ``location``; returns the live capture."""
    return net.attach_tap(location, CaptureFile(), filter).sink


@dataclass
class FloodReport:
    target: str
    rate: float
    duration: float
    start_ms: int
    sent: int = 0
    answered: int = 0
    crashed: bool = False
    crashed_at: Optional[int] = None
    first_failed_legit_ts: Optional[int] = None

    def to_dict(self) -> dict:
        return {
            "target": self.target,
            "rate": self.rate,
            "duration": self.duration,
            "start_ms": self.start_ms,
            "sent": self.sent,
            "answered": self.answered,
            "crashed": self.crashed,
            "crashed_at": self.crashed_at,
            "first_failed_legit_ts": self.first_failed_legit_ts,
        }


class Flooder:
    """Attacker node firing bogus login requests at a fixed rate."""

    PORT = 45000

    def __init__(self, net: Network, name: str = "attacker", *, seed: int = 0,
                 timeout_ms: int = 1_000):
        self.net = net
        self.name = name
        self.rng = random.Random(f"attacker:{seed}")
        self.timeout_ms = timeout_ms
        self._sent_at: dict[int, int] = {}
        self._report_of: dict[int, FloodReport] = {}
        self._answered: set[int] = set()
        self.reports: list[FloodReport] = []

    def flood(self, target: Endpoint, rate: float, duration: float,
              start_ms: Optional[int] = None) -> FloodReport:
        """Schedule ``rate * duration`` probes starting at ``start_ms``.

        The report fills in as the simulation runs: a probe left unanswered
        past the timeout marks the target as crashed at that probe's send time.
        """
        if rate <= 0:
            raise ValueError("rate must be positive")
        start = self.net.now if start_ms is None else start_ms
        report = FloodReport(str(target), rate, duration, start)
        self.reports.append(report)
        for k in range(int(rate * duration)):
            self.net.schedule(start + round(k * 1000 / rate), self._probe, target, report)
        return report

    def _probe(self, target: Endpoint, report: FloodReport) -> None:
        rid = len(self._sent_at) + 1
        self._sent_at[rid] = self.net.now
        self._report_of[rid] = report
        msg = {"id": rid, "method": "login", "params": {"username": "admin", "password": f"guess{rid}"}}
        send_tls(self.net, self.rng, Endpoint(self.name, self.PORT), target, msg)
        report.sent += 1
        self.net.schedule(self.net.now + self.timeout_ms, self._check, rid, report)

    def _check(self, rid: int, report: FloodReport) -> None:
        if rid in self._answered:
            return
        if not report.crashed:
            report.crashed = True
            report.crashed_at = self._sent_at[rid]

    def handle(self, packet: Packet, ingress: str) -> None:
        msg = packet.inner
        if isinstance(msg, dict) and msg.get("id") in self._sent_at:
            self._answered.add(msg["id"])
            self._report_of[msg["id"]].answered += 1
