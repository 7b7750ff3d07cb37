"""Emulated IP camera.

The camera is a state machine attached to a :class:`~camtestbed.netsim.Network`
node. It exposes four planes:

* control (port 443, modeled TLS): login issues a ``stok``; control requests
  must carry it.
* proprietary stream (port 443): nonce / key derivation / response tag, then
  AES-128-CBC encrypted frames on channel ``AESSTREAM``.
* RTSP (port 554) and ONVIF (port 2020): third-party users, plaintext frames.
* motion notifications: a 523-byte TLS record to the cloud per event.

Bursts of requests above the configured rate crash the camera; it reboots
after a fixed delay with every token and session invalidated.
"""
from __future__ import annotations

import logging
import random
import struct
from collections import deque
from dataclasses import dataclass
from enum import Enum, IntEnum
from typing import Optional
from urllib.parse import urlsplit

from . import crypto, rtsp
from .errors import (
    AuthFailed,
    BadPath,
    BadResponse,
    InvalidStok,
    RtspError,
    SessionExists,
    TestbedError,
    Unavailable,
    WrongState,
)
from .media import FRAME_INTERVAL_MS, MediaFrame, MediaSource
from .netsim import (
    PORT_HTTPS,
    PORT_ONVIF,
    PORT_RTSP,
    TLS_OVERHEAD,
    Channel,
    Endpoint,
    Network,
    Packet,
    Transport,
    send_tls,
)

log = logging.getLogger(__name__)

NOTIFICATION_LEN = 523
RTP_SERVER_PORT = 6970
NOTIFY_PORT = 49152


class Power(Enum):
    RUNNING = "RUNNING"
    CRASHED = "CRASHED"


class SessionState(IntEnum):
    NONCE_SENT = 1
    AUTHENTICATED = 2
    STREAMING = 3
    CLOSED = 4


@dataclass(frozen=True)
class Credentials:
    user: str
    password: str


@dataclass
class CameraConfig:
    max_requests: int = 200
    window_ms: int = 5_000
    reboot_delay_ms: int = 30_000
    motion_detection: bool = True


@dataclass
class StreamSession:
    stok: str
    nonce: bytes
    key: bytes
    iv: bytes
    state: SessionState = SessionState.NONCE_SENT
    client: Optional[Endpoint] = None
    next_index: int = 0

    def advance(self, state: SessionState) -> None:
        if state < self.state:
            raise WrongState(f"session cannot go from {self.state.name} to {state.name}")
        self.state = state


@dataclass
class RtspSession:
    session_id: str
    user: str
    client_port: int
    state: str = "READY"  # READY, PLAYING, PAUSED, RECORDING, CLOSED
    next_index: int = 0
    media_dst: Optional[Endpoint] = None


@dataclass(frozen=True)
class MotionEvent:
    ts: int


@dataclass(frozen=True)
class MotionNotification:
    ts: int
    body: bytes


@dataclass(frozen=True)
class OnvifResponse:
    code: int
    stream_uri: Optional[str] = None


class Camera:
    """Camera node; register it with ``net.register_node(name, camera, address)``."""

    def __init__(self, net: Network, name: str, owner: Credentials, *,
                 address: str = "10.0.0.7", cloud: Optional[Endpoint] = None,
                 media: Optional[MediaSource] = None, seed: int = 0,
                 config: Optional[CameraConfig] = None):
        self.net = net
        self.name = name
        self.address = address
        self.owner = owner
        self.cloud = cloud
        self.media = media or MediaSource(seed)
        self.config = config or CameraConfig()
        self.rng = random.Random(f"camera:{seed}")
        self.power = Power.RUNNING
        self.reboot_at: Optional[int] = None
        self.power_log: list[tuple[int, Power]] = [(net.now, Power.RUNNING)]
        self.motion_detection = self.config.motion_detection
        self.third_party_users: dict[str, str] = {}
        self.stok_table: dict[str, int] = {}
        self.sessions: dict[str, StreamSession] = {}
        self.rtsp_sessions: dict[str, RtspSession] = {}
        self._described: set[Endpoint] = set()
        self.request_window: deque[int] = deque()
        self.requests_seen = 0
        self.motion_log: list[int] = []
        self.notifications_sent = 0
        self.storage: list[MediaFrame] = []
        self.frames_emitted: dict[str, int] = {}
        self._epoch = 0

    @property
    def is_down(self) -> bool:
        return self.power is Power.CRASHED

    def endpoint(self, port: int) -> Endpoint:
        return Endpoint(self.name, port)

    def _require_running(self) -> None:
        if self.is_down:
            raise Unavailable(f"{self.name} is down until {self.reboot_at}")

    # -- availability -------------------------------------------------------

    def ingest_tick(self, now: int) -> list[Power]:
        """Apply overload and reboot rules at ``now``; returns the transitions made."""
        transitions = []
        if self.power is Power.CRASHED and now >= self.reboot_at:
            self._set_power(Power.RUNNING, now)
            self.reboot_at = None
            self._invalidate()
            transitions.append(Power.RUNNING)
        if self.power is Power.RUNNING:
            horizon = now - self.config.window_ms
            while self.request_window and self.request_window[0] <= horizon:
                self.request_window.popleft()
            if len(self.request_window) > self.config.max_requests:
                self.reboot_at = now + self.config.reboot_delay_ms
                self._set_power(Power.CRASHED, now)
                self._invalidate()
                self.request_window.clear()
                self.net.schedule(self.reboot_at, self._reboot)
                transitions.append(Power.CRASHED)
                log.info("%s crashed at %d, reboot at %d", self.name, now, self.reboot_at)
        return transitions

    def _reboot(self) -> None:
        self.ingest_tick(self.net.now)

    def _set_power(self, power: Power, now: int) -> None:
        self.power = power
        self.power_log.append((now, power))

    def _invalidate(self) -> None:
        self._epoch += 1
        self.stok_table.clear()
        for session in self.sessions.values():
            session.state = SessionState.CLOSED
        self.sessions.clear()
        for session in self.rtsp_sessions.values():
            session.state = "CLOSED"
        self.rtsp_sessions.clear()
        self._described.clear()

    def stop_media(self) -> None:
        """Stop every media emitter without touching tokens or sessions."""
        self._epoch += 1

    def send_fragment(self, dst: Endpoint, payload: bytes) -> None:
        """Emit a stray fragmented UDP datagram (scenario-injected)."""
        if not self.is_down:
            self.net.send(self.endpoint(RTP_SERVER_PORT), dst, payload,
                          transport=Transport.UDP, fragmented=True)

    def crash_intervals(self) -> list[tuple[int, Optional[int]]]:
        out = []
        for ts, power in self.power_log:
            if power is Power.CRASHED:
                out.append((ts, None))
            elif out and out[-1][1] is None:
                out[-1] = (out[-1][0], ts)
        return out

    # -- control plane ------------------------------------------------------

    def handle_login(self, user: str, password: str) -> str:
        self._require_running()
        if user != self.owner.user or password != self.owner.password:
            raise AuthFailed(f"bad credentials for {user!r}")
        stok = self.rng.randbytes(16).hex()
        self.stok_table[stok] = self.net.now
        return stok

    def _check_stok(self, stok) -> None:
        if not isinstance(stok, str) or stok not in self.stok_table:
            raise InvalidStok("unknown or expired stok")

    def handle_control(self, stok: str, request: dict) -> dict:
        self._require_running()
        self._check_stok(stok)
        method = request.get("method")
        params = request.get("params", {})
        if method == "create_third_party_user":
            self.third_party_users[params["username"]] = params["password"]
            return {"created": params["username"]}
        if method == "set_motion_detection":
            self.motion_detection = params.get("enabled") in (True, "on")
            return {"motion_detection": self.motion_detection}
        if method == "get_settings":
            return {
                "motion_detection": self.motion_detection,
                "third_party_users": sorted(self.third_party_users),
            }
        raise WrongState(f"unsupported control request {method!r}")

    # -- proprietary stream -------------------------------------------------

    def begin_proprietary_stream(self, stok: str) -> bytes:
        self._require_running()
        self._check_stok(stok)
        if stok in self.sessions and self.sessions[stok].state is not SessionState.CLOSED:
            raise SessionExists("a stream session is already open for this stok")
        nonce = self.rng.randbytes(crypto.NONCE_LEN)
        key, iv = crypto.derive_session_keys(crypto.account_secret(self.owner.password), nonce)
        self.sessions[stok] = StreamSession(stok, nonce, key, iv)
        return nonce

    def verify_response(self, stok: str, response: bytes,
                        client: Optional[Endpoint] = None) -> StreamSession:
        """Check the app's response tag; on success start streaming to ``client``."""
        self._require_running()
        self._check_stok(stok)
        session = self.sessions.get(stok)
        if session is None or session.state is not SessionState.NONCE_SENT:
            raise WrongState("no session awaiting a response")
        if not crypto.check_response(session.key, session.nonce, response):
            session.advance(SessionState.CLOSED)
            raise BadResponse("response tag mismatch")
        session.advance(SessionState.AUTHENTICATED)
        session.advance(SessionState.STREAMING)
        session.client = client
        if client is not None:
            self._emit_proprietary(session, self._epoch)
        return session

    def close_proprietary_stream(self, stok: str) -> None:
        session = self.sessions.pop(stok, None)
        if session is not None:
            session.advance(SessionState.CLOSED)

    def encrypt_frame(self, session: StreamSession, frame: MediaFrame) -> bytes:
        return crypto.cbc_encrypt(session.key, session.iv, frame.serialize())

    def _emit_proprietary(self, session: StreamSession, epoch: int) -> None:
        if epoch != self._epoch or self.is_down or session.state is not SessionState.STREAMING:
            return
        frame = self.media.frame(session.next_index)
        session.next_index += 1
        self.net.send(
            self.endpoint(PORT_HTTPS), session.client, self.encrypt_frame(session, frame),
            transport=Transport.TCP, channel=Channel.AESSTREAM,
        )
        self._count_frame("proprietary")
        self.net.schedule(self.net.now + FRAME_INTERVAL_MS, self._emit_proprietary, session, epoch)

    def _count_frame(self, plane: str) -> None:
        self.frames_emitted[plane] = self.frames_emitted.get(plane, 0) + 1

    # -- RTSP ---------------------------------------------------------------

    def _rtsp_user(self, creds: Optional[Credentials]) -> str:
        if creds is None or self.third_party_users.get(creds.user) != creds.password:
            raise RtspError(401, "Unauthorized")
        return creds.user

    def rtsp_request(self, method: str, uri: str, creds: Optional[Credentials] = None,
                     session_id: Optional[str] = None, *, conn: Optional[Endpoint] = None,
                     client_port: Optional[int] = None) -> rtsp.RtspResponse:
        """Run one RTSP method through the session state machine.

        ``conn`` identifies the client's control connection (DESCRIBE state is
        per connection). Refusals raise :class:`RtspError` carrying the code.
        """
        self._require_running()
        method = method.upper()
        if method not in rtsp.METHODS:
            raise RtspError(501, "Not Implemented")
        if method == "OPTIONS":
            return rtsp.RtspResponse(200, 0, {"Public": ", ".join(rtsp.METHODS)})
        user = self._rtsp_user(creds)
        if urlsplit(uri).path.rstrip("/") not in (rtsp.STREAM_PATH, rtsp.STREAM_PATH + "/track1"):
            raise RtspError(404, "Not Found")

        if method == "DESCRIBE":
            self._described.add(conn)
            body = rtsp.describe_body(self.address)
            return rtsp.RtspResponse(200, 0, {"Content-Type": "application/sdp"}, body)

        if method == "SETUP":
            if conn not in self._described:
                raise RtspError(455, "SETUP before DESCRIBE")
            if session_id is not None:
                raise RtspError(455, "session already set up")
            if client_port is None:
                raise RtspError(455, "missing client_port")
            sid = self.rng.randbytes(8).hex().upper()
            while sid in self.rtsp_sessions:
                sid = self.rng.randbytes(8).hex().upper()
            self.rtsp_sessions[sid] = RtspSession(sid, user, client_port)
            transport = (f"RTP/AVP;unicast;client_port={client_port}-{client_port + 1};"
                         f"server_port={RTP_SERVER_PORT}-{RTP_SERVER_PORT + 1}")
            return rtsp.RtspResponse(200, 0, {"Session": sid, "Transport": transport})

        if session_id is None:
            raise RtspError(455, f"{method} before SETUP")
        session = self.rtsp_sessions.get(session_id)
        if session is None:
            raise RtspError(454, "Session Not Found")
        if session.user != user:
            raise RtspError(401, "Unauthorized")

        if method in ("PLAY", "RECORD"):
            if session.state not in ("READY", "PAUSED"):
                raise RtspError(455, f"{method} in state {session.state}")
            session.state = "PLAYING" if method == "PLAY" else "RECORDING"
            if conn is not None:
                session.media_dst = Endpoint(conn.node, session.client_port)
            self._emit_rtsp(session, self._epoch)
        elif method == "PAUSE":
            if session.state not in ("PLAYING", "RECORDING"):
                raise RtspError(455, f"PAUSE in state {session.state}")
            session.state = "PAUSED"
        else:  # TEARDOWN
            session.state = "CLOSED"
            del self.rtsp_sessions[session_id]
        return rtsp.RtspResponse(200, 0, {"Session": session_id})

    def _emit_rtsp(self, session: RtspSession, epoch: int) -> None:
        if epoch != self._epoch or self.is_down or session.state not in ("PLAYING", "RECORDING"):
            return
        frame = self.media.frame(session.next_index)
        session.next_index += 1
        if session.state == "RECORDING":
            self.storage.append(frame)
        elif session.media_dst is not None:
            self.net.send(self.endpoint(RTP_SERVER_PORT), session.media_dst, frame.serialize(),
                          transport=Transport.UDP, channel=Channel.PLAIN)
            self._count_frame("rtsp")
        self.net.schedule(self.net.now + FRAME_INTERVAL_MS, self._emit_rtsp, session, epoch)

    # -- ONVIF --------------------------------------------------------------

    def stream_uri(self) -> str:
        return f"rtsp://{self.address}:{PORT_RTSP}{rtsp.STREAM_PATH}"

    def onvif_request(self, uri: str, creds: Optional[Credentials]) -> OnvifResponse:
        self._require_running()
        path = urlsplit(uri).path if "://" in uri else uri
        if path != rtsp.ONVIF_PATH:
            raise BadPath(path)
        if creds is None or self.third_party_users.get(creds.user) != creds.password:
            raise AuthFailed("ONVIF authentication failed")
        return OnvifResponse(200, self.stream_uri())

    # -- motion -------------------------------------------------------------

    def notification_body(self, ts: int) -> bytes:
        # 16-byte header (timestamp, event counter) + filler; only the length matters
        header = struct.pack(">QQ", ts, len(self.motion_log))
        filler = self.rng.randbytes(NOTIFICATION_LEN - TLS_OVERHEAD - len(header))
        return header + filler

    def on_motion(self, ev: MotionEvent) -> Optional[Packet]:
        """Record a motion event and notify the cloud with one 523-byte TLS record."""
        if self.is_down or not self.motion_detection:
            return None
        self.motion_log.append(ev.ts)
        if self.cloud is None:
            return None
        note = MotionNotification(ev.ts, self.notification_body(ev.ts))
        send_tls(self.net, self.rng, self.endpoint(NOTIFY_PORT), self.cloud, note,
                 plaintext_len=len(note.body))
        self.notifications_sent += 1
        return self.net.sent[-1]

    # -- wire dispatch ------------------------------------------------------

    def handle(self, packet: Packet, ingress: str) -> None:
        now = self.net.now
        self.requests_seen += 1
        self.request_window.append(now)
        self.ingest_tick(now)
        if self.is_down:
            return
        port = packet.dst.port
        if port == PORT_HTTPS and packet.channel is Channel.TLS:
            self._handle_control_packet(packet)
        elif port == PORT_RTSP and packet.transport is Transport.TCP:
            self._handle_rtsp_packet(packet)
        elif port == PORT_ONVIF and packet.transport is Transport.TCP:
            self._handle_onvif_packet(packet)

    def _reply_tls(self, packet: Packet, message: dict) -> None:
        send_tls(self.net, self.rng, packet.dst, packet.src, message)

    def _handle_control_packet(self, packet: Packet) -> None:
        msg = packet.inner if isinstance(packet.inner, dict) else {}
        reply = {"id": msg.get("id")}
        method = msg.get("method")
        params = msg.get("params", {})
        try:
            if method == "login":
                reply["result"] = {"stok": self.handle_login(params.get("username"), params.get("password"))}
            elif method == "begin_stream":
                reply["result"] = {"nonce": self.begin_proprietary_stream(msg.get("stok")).hex()}
            elif method == "verify":
                response = bytes.fromhex(params.get("response", ""))
                self.verify_response(msg.get("stok"), response, client=packet.src)
                reply["result"] = {"streaming": True}
            elif method == "close_stream":
                self._check_stok(msg.get("stok"))
                self.close_proprietary_stream(msg.get("stok"))
                reply["result"] = {"closed": True}
            else:
                reply["result"] = self.handle_control(msg.get("stok"), {"method": method, "params": params})
        except (TestbedError, KeyError, ValueError) as exc:
            reply["error"] = type(exc).__name__
        self._reply_tls(packet, reply)

    def _handle_rtsp_packet(self, packet: Packet) -> None:
        try:
            req = rtsp.RtspRequest.decode(packet.payload)
        except (ValueError, UnicodeDecodeError):
            return
        auth = rtsp.parse_basic_auth(req.headers.get("Authorization"))
        creds = Credentials(*auth) if auth else None
        try:
            resp = self.rtsp_request(
                req.method, req.uri, creds, req.headers.get("Session"), conn=packet.src,
                client_port=rtsp.parse_client_port(req.headers.get("Transport", "")),
            )
        except RtspError as exc:
            resp = rtsp.RtspResponse(exc.code, 0)
        resp.cseq = req.cseq
        self.net.send(packet.dst, packet.src, resp.encode(), transport=Transport.TCP)

    def _handle_onvif_packet(self, packet: Packet) -> None:
        try:
            _, path, headers = rtsp.parse_http_request(packet.payload)
        except (ValueError, UnicodeDecodeError):
            return
        auth = rtsp.parse_basic_auth(headers.get("Authorization"))
        try:
            result = self.onvif_request(path, Credentials(*auth) if auth else None)
            data = rtsp.http_response(200, rtsp.onvif_stream_uri_body(result.stream_uri))
        except AuthFailed:
            data = rtsp.http_response(401)
        except BadPath:
            data = rtsp.http_response(404)
        self.net.send(packet.dst, packet.src, data, transport=Transport.TCP)
