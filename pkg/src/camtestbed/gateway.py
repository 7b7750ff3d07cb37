"""Encrypting access point placed between the camera and the rest of the LAN.

The gateway queues every UDP datagram forwarded from the camera-side
interface, seals its application payload and re-sends it from its own
address to the original destination and port. Fragments arriving from the
camera side are dropped so no partial datagram leaves unsealed. On the
player host a :class:`ClientDecryptor` opens datagrams arriving from the
gateway and hands the plaintext to the player.

Payload offset: on a real box the queued buffer is the raw IPv4 datagram and
the application bytes start after the 20-byte IPv4 header plus the 8-byte
UDP header. :func:`encapsulate` rebuilds that datagram so the sealed bytes
are literally ``datagram[HEADER_SKIP:]``.
"""
from __future__ import annotations

import ipaddress
import random
import struct
from dataclasses import dataclass
from enum import Enum
from typing import Optional

from cryptography.exceptions import InvalidTag
from cryptography.hazmat.primitives.ciphers.aead import AESGCM

from .netsim import Channel, Endpoint, Network, Packet, Transport, rewrite

IPV4_HEADER = 20
UDP_HEADER = 8
HEADER_SKIP = IPV4_HEADER + UDP_HEADER
NONCE_LEN = 12
PSK_LEN = 32
GATEWAY_PORT = 40000


class Verdict(Enum):
    INTERCEPT = "INTERCEPT"
    DROP_FRAGMENT = "DROP_FRAGMENT"
    FORWARD = "FORWARD"


@dataclass(frozen=True)
class InterceptRule:
    """Forwarded + camera-side ingress + UDP + camera source."""

    ingress: str
    src: str
    transport: Transport = Transport.UDP

    def matches(self, packet: Packet, ingress: str) -> bool:
        return (ingress == self.ingress and packet.transport is self.transport
                and packet.src.node == self.src)


class GatewayCrypto:
    """AES-256-GCM over a datagram's application bytes; sealed = nonce || ct || tag."""

    header_skip = HEADER_SKIP

    def __init__(self, psk: bytes):
        if len(psk) != PSK_LEN:
            raise ValueError(f"psk must be {PSK_LEN} bytes, got {len(psk)}")
        self.psk = psk
        self._aead = AESGCM(psk)

    def seal(self, plaintext: bytes, nonce: bytes) -> bytes:
        if len(nonce) != NONCE_LEN:
            raise ValueError("nonce must be 12 bytes")
        return nonce + self._aead.encrypt(nonce, plaintext, None)

    def open(self, sealed: bytes) -> bytes:
        """Authenticated decrypt; raises ``InvalidTag`` on any tampering."""
        if len(sealed) < NONCE_LEN + 16:
            raise InvalidTag()
        return self._aead.decrypt(sealed[:NONCE_LEN], sealed[NONCE_LEN:], None)


def _ip(host: str) -> bytes:
    try:
        return ipaddress.IPv4Address(host).packed
    except ValueError:
        return bytes(4)


def encapsulate(packet: Packet, src_ip: str = "0.0.0.0", dst_ip: str = "0.0.0.0") -> bytes:
    """IPv4 + UDP datagram for ``packet`` (checksums left zero)."""
    total = HEADER_SKIP + len(packet.payload)
    ip = struct.pack(">BBHHHBBH4s4s", 0x45, 0, total, packet.seq & 0xFFFF, 0,
                     64, 17, 0, _ip(src_ip), _ip(dst_ip))
    udp = struct.pack(">HHHH", packet.src.port, packet.dst.port, UDP_HEADER + len(packet.payload), 0)
    return ip + udp + packet.payload


class Gateway:
    """Forwarding node; every packet to or from the camera crosses it."""

    def __init__(self, net: Network, name: str, camera: str, psk: bytes, *,
                 enabled: bool = True, seed: int = 0, camera_addr: str = "10.0.0.7"):
        self.net = net
        self.name = name
        self.camera = camera
        self.camera_addr = camera_addr
        self.enabled = enabled
        self.crypto = GatewayCrypto(psk)
        self.rule = InterceptRule(ingress=camera, src=camera)
        self.rng = random.Random(f"gateway:{seed}")
        self.intercepted = 0
        self.sealed = 0
        self.dropped_fragments = 0
        self.forwarded = 0

    @property
    def endpoint(self) -> Endpoint:
        return Endpoint(self.name, GATEWAY_PORT)

    def classify(self, packet: Packet, ingress: str) -> Verdict:
        if packet.fragmented and ingress == self.rule.ingress:
            return Verdict.DROP_FRAGMENT
        if self.rule.matches(packet, ingress):
            return Verdict.INTERCEPT
        return Verdict.FORWARD

    def seal_payload(self, packet: Packet) -> bytes:
        datagram = encapsulate(packet, self.camera_addr)
        return self.crypto.seal(datagram[self.crypto.header_skip:], self.rng.randbytes(NONCE_LEN))

    def encrypt_forward(self, packet: Packet) -> Packet:
        """Seal ``packet`` and re-send it from the gateway to its original dst:dport."""
        sealed = self.seal_payload(packet)
        self.net.send(self.endpoint, packet.dst, sealed, transport=Transport.UDP, channel=Channel.PLAIN)
        self.sealed += 1
        return self.net.sent[-1]

    def handle(self, packet: Packet, ingress: str) -> None:
        if packet.dst.node == self.name:
            return
        if not self.enabled:
            self.net.forward(packet, self.name)
            self.forwarded += 1
            return
        verdict = self.classify(packet, ingress)
        if verdict is Verdict.DROP_FRAGMENT:
            self.dropped_fragments += 1
        elif verdict is Verdict.INTERCEPT:
            self.intercepted += 1
            self.encrypt_forward(packet)
        else:
            self.net.forward(packet, self.name)
            self.forwarded += 1

    def counters(self) -> dict:
        return {
            "intercepted": self.intercepted,
            "sealed": self.sealed,
            "dropped_fragments": self.dropped_fragments,
            "forwarded": self.forwarded,
        }


class ClientDecryptor:
    """Player-side half: opens UDP datagrams whose source is the gateway."""

    def __init__(self, psk: bytes, gateway: str):
        self.crypto = GatewayCrypto(psk)
        self.gateway = gateway
        self.decrypted = 0
        self.auth_failures = 0

    def matches(self, packet: Packet) -> bool:
        return packet.transport is Transport.UDP and packet.src.node == self.gateway

    def client_decrypt(self, packet: Packet) -> Optional[Packet]:
        """Plaintext datagram for the local player, or None if authentication fails."""
        try:
            plaintext = self.crypto.open(packet.payload)
        except InvalidTag:
            self.auth_failures += 1
            return None
        self.decrypted += 1
        return rewrite(packet, payload=plaintext)
