"""Deterministic in-process network driven by a virtual millisecond clock.

Nodes exchange :class:`Packet` objects over point-to-point links. Every hop
takes a fixed latency; deliveries are ordered by ``(time, send order)`` so a
scenario replayed with the same seed produces the same delivery log. Taps
record what crosses a link or node into a :class:`~camtestbed.capture.CaptureFile`,
and a MITM hook on a link can observe, drop or rewrite matching packets.
"""
from __future__ import annotations

import heapq
import json
import logging
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Callable, Optional, Union

from .capture import CaptureFile, CaptureRecord
from .errors import (
    ClockRegression,
    DuplicateNode,
    HookConflict,
    UnknownLocation,
    UnknownNode,
)

log = logging.getLogger(__name__)

# Ports the camera exposes.
PORT_HTTPS = 443
PORT_RTSP = 554
PORT_ONVIF = 2020

# Modeled TLS record overhead: 5-byte header, 8-byte explicit nonce, 16-byte tag.
TLS_OVERHEAD = 29


class Transport(str, Enum):
    UDP = "UDP"
    TCP = "TCP"


class Channel(str, Enum):
    PLAIN = "PLAIN"
    TLS = "TLS"
    AESSTREAM = "AESSTREAM"


@dataclass(frozen=True)
class Endpoint:
    node: str
    port: int

    def __post_init__(self):
        if not 1 <= self.port <= 65535:
            raise ValueError(f"port out of range: {self.port}")

    def __str__(self) -> str:
        return f"{self.node}:{self.port}"

    @classmethod
    def parse(cls, text: str) -> "Endpoint":
        node, _, port = text.rpartition(":")
        if not node or not port.isdigit():
            raise ValueError(f"bad endpoint {text!r}")
        return cls(node, int(port))


@dataclass(frozen=True)
class Packet:
    seq: int
    ts: int
    src: Endpoint
    dst: Endpoint
    transport: Transport
    channel: Channel
    fragmented: bool
    payload: bytes
    # TLS plaintext; only the two endpoints read it, never serialized.
    inner: Any = field(default=None, compare=False, repr=False)

    @property
    def length(self) -> int:
        return len(self.payload)


Link = tuple  # (node, node), normalized with sorted order
Location = Union[str, Link]


def link(a: str, b: str) -> Link:
    return tuple(sorted((a, b)))


class HookAction(Enum):
    OBSERVE = "OBSERVE"
    DROP = "DROP"
    MODIFY = "MODIFY"


@dataclass
class Tap:
    location: Location
    sink: CaptureFile
    filter: Optional[Callable[[Packet], bool]] = None

    def covers(self, hop: Link) -> bool:
        if isinstance(self.location, tuple):
            return self.location == hop
        return self.location in hop


@dataclass
class MitmHook:
    location: Link
    match: Callable[[Packet], bool]
    action: HookAction
    transform: Optional[Callable[[Packet], Packet]] = None
    sink: Optional[CaptureFile] = None
    matched: int = 0
    drop_count: int = 0
    dropped: list = field(default_factory=list)


@dataclass(frozen=True)
class Receipt:
    seq: int
    deliver_at: int
    first_hop: str


class Network:
    """Single-threaded discrete-event network.

    Nodes are registered by name and may carry a handler object exposing
    ``handle(packet, ingress)``; ``ingress`` is the neighbour the packet
    arrived from. A handler may also expose ``is_down`` (a crashed node
    swallows everything delivered to it).
    """

    def __init__(self, latency_ms: int = 1):
        if latency_ms < 1:
            raise ValueError("latency must be at least 1 ms")
        self.latency = latency_ms
        self.now = 0
        self._ids: dict[str, int] = {}
        self._handlers: dict[str, Any] = {}
        self._addresses: dict[str, str] = {}
        self.inboxes: dict[str, list[Packet]] = {}
        self._via: dict[str, str] = {}
        self._queue: list = []
        self._counter = 0
        self._seq = 0
        self._taps: list[Tap] = []
        self._hooks: dict[Link, MitmHook] = {}
        self.sent: list[Packet] = []
        self.delivered: list[tuple[Link, Packet]] = []
        self.drops: list[tuple[Packet, str]] = []

    # -- topology -----------------------------------------------------------

    def register_node(self, name: str, handler: Any = None, address: Optional[str] = None) -> int:
        if name in self._ids:
            raise DuplicateNode(name)
        self._ids[name] = len(self._ids) + 1
        self._handlers[name] = handler
        self.inboxes[name] = []
        if address is not None:
            self._addresses[address] = name
        return self._ids[name]

    def attach(self, name: str, handler: Any) -> None:
        self._require(name)
        self._handlers[name] = handler

    def node_id(self, name: str) -> int:
        self._require(name)
        return self._ids[name]

    @property
    def nodes(self) -> list[str]:
        return list(self._ids)

    def resolve(self, host: str) -> str:
        """Map a host (node name or registered address) to a node name."""
        if host in self._ids:
            return host
        try:
            return self._addresses[host]
        except KeyError:
            raise UnknownNode(host) from None

    def route_via(self, node: str, gateway: str) -> None:
        """All traffic to and from ``node`` traverses ``gateway`` first."""
        self._require(node)
        self._require(gateway)
        self._via[node] = gateway

    def _require(self, name: str) -> None:
        if name not in self._ids:
            raise UnknownNode(name)

    def _next_hop(self, frm: str, dst: str) -> str:
        if frm in self._via and self._via[frm] != dst:
            return self._via[frm]
        if dst in self._via and frm != self._via[dst]:
            return self._via[dst]
        return dst

    # -- clock & events -----------------------------------------------------

    def _push(self, at: int, item: tuple) -> None:
        self._counter += 1
        heapq.heappush(self._queue, (at, self._counter, item))

    def schedule(self, at: int, fn: Callable, *args) -> None:
        """Run ``fn(*args)`` when the clock reaches ``at`` (ms)."""
        if at < self.now:
            raise ClockRegression(f"cannot schedule at {at} < now {self.now}")
        self._push(at, ("timer", fn, args))

    def send(
        self,
        src: Endpoint,
        dst: Endpoint,
        payload: bytes = b"",
        *,
        transport: Transport = Transport.UDP,
        channel: Channel = Channel.PLAIN,
        fragmented: bool = False,
        inner: Any = None,
    ) -> Receipt:
        """Enqueue a new packet originating at ``src.node``."""
        return self._send(src.node, src, dst, bytes(payload), transport, channel, fragmented, inner)

    def forward(self, packet: Packet, at_node: str) -> Receipt:
        """Re-emit ``packet`` unchanged from an intermediate node (new hop, new seq)."""
        return self._send(
            at_node, packet.src, packet.dst, packet.payload,
            packet.transport, packet.channel, packet.fragmented, packet.inner,
        )

    def _send(self, frm, src, dst, payload, transport, channel, fragmented, inner) -> Receipt:
        self._require(src.node)
        self._require(dst.node)
        self._seq += 1
        packet = Packet(
            seq=self._seq, ts=self.now, src=src, dst=dst,
            transport=Transport(transport), channel=Channel(channel),
            fragmented=bool(fragmented), payload=payload, inner=inner,
        )
        hop_to = self._next_hop(frm, dst.node)
        deliver_at = self.now + self.latency
        self.sent.append(packet)
        self._push(deliver_at, ("packet", frm, hop_to, packet))
        return Receipt(packet.seq, deliver_at, hop_to)

    def step(self, until: int) -> list[Packet]:
        """Deliver everything due at or before ``until``; the clock ends at ``until``."""
        if until < self.now:
            raise ClockRegression(f"step({until}) but clock is at {self.now}")
        delivered = []
        while self._queue and self._queue[0][0] <= until:
            at, _, item = heapq.heappop(self._queue)
            self.now = at
            if item[0] == "timer":
                _, fn, args = item
                fn(*args)
                continue
            _, frm, to, packet = item
            packet = self._cross(frm, to, packet)
            if packet is not None:
                delivered.append(packet)
        self.now = until
        return delivered

    def pending(self) -> int:
        return len(self._queue)

    def _cross(self, frm: str, to: str, packet: Packet) -> Optional[Packet]:
        hop = link(frm, to)
        hook = self._hooks.get(hop)
        if hook is not None and hook.match(packet):
            hook.matched += 1
            if hook.action is HookAction.DROP:
                hook.drop_count += 1
                hook.dropped.append(packet)
                self.drops.append((packet, "hook"))
                return None
            if hook.action is HookAction.MODIFY:
                packet = hook.transform(packet)
            elif hook.sink is not None:
                hook.sink.append(CaptureRecord.from_packet(packet))
        for tap in self._taps:
            if tap.covers(hop) and (tap.filter is None or tap.filter(packet)):
                tap.sink.append(CaptureRecord.from_packet(packet))
        handler = self._handlers.get(to)
        if getattr(handler, "is_down", False):
            self.drops.append((packet, "crashed"))
            return None
        self.delivered.append((hop, packet))
        self.inboxes[to].append(packet)
        if handler is not None:
            handler.handle(packet, frm)
        return packet

    # -- observation --------------------------------------------------------

    def _check_location(self, location: Location) -> None:
        names = location if isinstance(location, tuple) else (location,)
        for name in names:
            if name not in self._ids:
                raise UnknownLocation(str(location))

    def attach_tap(self, location: Location, sink: Optional[CaptureFile] = None,
                   filter: Optional[Callable[[Packet], bool]] = None) -> Tap:
        if isinstance(location, tuple):
            location = link(*location)
        self._check_location(location)
        tap = Tap(location, sink if sink is not None else CaptureFile(), filter)
        self._taps.append(tap)
        return tap

    def detach_tap(self, tap: Tap) -> None:
        self._taps.remove(tap)

    def install_hook(self, location: Link, match: Callable[[Packet], bool],
                     action: HookAction = HookAction.OBSERVE,
                     transform: Optional[Callable[[Packet], Packet]] = None) -> MitmHook:
        location = link(*location)
        self._check_location(location)
        if location in self._hooks:
            raise HookConflict(f"link {location} already has a hook")
        if action is HookAction.MODIFY and transform is None:
            raise ValueError("MODIFY hook needs a transform")
        hook = MitmHook(location, match, action, transform,
                        sink=CaptureFile() if action is HookAction.OBSERVE else None)
        self._hooks[location] = hook
        return hook

    def remove_hook(self, hook: MitmHook) -> None:
        if self._hooks.get(hook.location) is hook:
            del self._hooks[hook.location]


def rewrite(packet: Packet, **changes) -> Packet:
    """Copy of ``packet`` with fields replaced; for MODIFY transforms."""
    return replace(packet, **changes)


def send_tls(net: Network, rng, src: Endpoint, dst: Endpoint, message: Any,
             plaintext_len: Optional[int] = None) -> Receipt:
    """Send ``message`` over a modeled TLS association.

    The wire payload is opaque filler whose length is the plaintext length
    plus :data:`TLS_OVERHEAD`; the message itself rides in ``Packet.inner``.
    """
    if plaintext_len is None:
        plaintext_len = len(json.dumps(message, sort_keys=True).encode("utf-8"))
    record = rng.randbytes(plaintext_len + TLS_OVERHEAD)
    return net.send(src, dst, record, transport=Transport.TCP, channel=Channel.TLS, inner=message)
