"""The camera's legitimate counterparties.

* :class:`AppClient` - the vendor app: login, control requests, and the
  encrypted streaming ceremony.
* :class:`ThirdPartyClient` - a VLC/iSpy-style player speaking RTSP, or
  ONVIF first and then RTSP.
* :class:`CloudStub` - the vendor cloud relaying motion alerts to every app
  registered on the camera owner's account.

Clients are event driven: each request is sent on the network and the reply
is handled when it is delivered. A reply that does not arrive within
``timeout_ms`` is recorded as :class:`~camtestbed.errors.Unavailable`.
"""
from __future__ import annotations

import logging
import random
from dataclasses import dataclass
from typing import Callable, Optional
from urllib.parse import unquote, urlsplit

from . import crypto, rtsp
from .camera import Credentials, MotionNotification
from .errors import (
    AuthFailed,
    BadPath,
    BadResponse,
    InvalidStok,
    MalformedUri,
    SessionExists,
    TestbedError,
    Unavailable,
    UnknownAccount,
    WrongState,
)
from .media import MediaFrame, parse_frame
from .netsim import PORT_HTTPS, PORT_ONVIF, PORT_RTSP, Channel, Endpoint, Network, Packet, Transport, send_tls

log = logging.getLogger(__name__)

_WIRE_ERRORS = {cls.__name__: cls for cls in (
    AuthFailed, BadResponse, InvalidStok, SessionExists, Unavailable, WrongState, BadPath,
)}

DEFAULT_TIMEOUT_MS = 1_000


def wire_error(name: str) -> TestbedError:
    return _WIRE_ERRORS.get(name, TestbedError)(name)


@dataclass(frozen=True)
class StreamUri:
    scheme: str
    creds: Optional[Credentials]
    host: str
    port: int
    path: str


def parse_stream_uri(uri: str, *, require_credentials: bool = False) -> StreamUri:
    """Split an ``rtsp://`` or ``http://`` camera URI into its parts.

    Missing credentials give ``creds=None`` (anonymous; the camera will
    answer 401) unless ``require_credentials`` is set.
    """
    try:
        parts = urlsplit(uri)
        port = parts.port
    except ValueError as exc:
        raise MalformedUri(f"{uri!r}: {exc}") from None
    if parts.scheme not in ("rtsp", "http"):
        raise MalformedUri(f"{uri!r}: unsupported scheme {parts.scheme!r}")
    if not parts.hostname:
        raise MalformedUri(f"{uri!r}: missing host")
    if not parts.path or not parts.path.startswith("/"):
        raise MalformedUri(f"{uri!r}: missing path")
    creds = None
    if parts.username is not None:
        if parts.password is None:
            raise MalformedUri(f"{uri!r}: user without password")
        creds = Credentials(unquote(parts.username), unquote(parts.password))
    elif require_credentials:
        raise MalformedUri(f"{uri!r}: no credentials")
    default_port = PORT_RTSP if parts.scheme == "rtsp" else PORT_ONVIF
    return StreamUri(parts.scheme, creds, parts.hostname, port or default_port, parts.path)


class _Requester:
    """Request/response bookkeeping shared by the clients."""

    def __init__(self, net: Network, name: str, timeout_ms: int):
        self.net = net
        self.name = name
        self.timeout_ms = timeout_ms
        self._pending: dict = {}
        self._next_id = 0
        self.events: list[tuple[int, str, str]] = []
        self.error: Optional[TestbedError] = None

    def _new_id(self) -> int:
        self._next_id += 1
        return self._next_id

    def _await(self, key, action: str, on_reply: Callable) -> None:
        self._pending[key] = (action, on_reply)
        self.net.schedule(self.net.now + self.timeout_ms, self._expire, key)

    def _expire(self, key) -> None:
        if key in self._pending:
            action, _ = self._pending.pop(key)
            self._fail(action, Unavailable(f"{action}: no reply"))

    def _resolve(self, key, reply) -> None:
        entry = self._pending.pop(key, None)
        if entry is not None:
            entry[1](reply)

    def _fail(self, action: str, exc: TestbedError) -> None:
        self.error = exc
        self.events.append((self.net.now, action, type(exc).__name__))
        log.debug("%s: %s failed: %s", self.name, action, exc)

    def _ok(self, action: str) -> None:
        self.events.append((self.net.now, action, "ok"))

    def outcomes(self, action: str) -> list[tuple[int, str]]:
        return [(ts, outcome) for ts, a, outcome in self.events if a == action]


class AppClient(_Requester):
    """Vendor app. Talks to the camera over modeled TLS only."""

    PORT = 50000

    def __init__(self, net: Network, name: str, account: Credentials, camera: Endpoint, *,
                 cloud: Optional[Endpoint] = None, seed: int = 0,
                 timeout_ms: int = DEFAULT_TIMEOUT_MS):
        super().__init__(net, name, timeout_ms)
        self.account = account
        self.camera = camera
        self.cloud = cloud
        self.rng = random.Random(f"app:{name}:{seed}")
        self.stok: Optional[str] = None
        self.key: Optional[bytes] = None
        self.iv: Optional[bytes] = None
        self.streaming = False
        self.received_frames: list[MediaFrame] = []
        self.bad_packets = 0
        self.notifications: list[tuple[int, int]] = []

    @property
    def endpoint(self) -> Endpoint:
        return Endpoint(self.name, self.PORT)

    def _request(self, dst: Endpoint, method: str, params: Optional[dict],
                 on_result: Callable[[dict], None], stok: Optional[str] = None) -> None:
        rid = self._new_id()
        msg = {"id": rid, "method": method, "params": params or {}}
        if stok is not None:
            msg["stok"] = stok

        def on_reply(reply: dict):
            if "error" in reply:
                self._fail(method, wire_error(reply["error"]))
            else:
                self._ok(method)
                on_result(reply.get("result", {}))

        self._await(rid, method, on_reply)
        send_tls(self.net, self.rng, self.endpoint, dst, msg)

    # actions; each may be scheduled with net.schedule(t, app.<action>)

    def register_with_cloud(self) -> None:
        self._request(self.cloud, "register", {"account": self.account.user}, lambda _: None)

    def login(self, then: Optional[Callable[[], None]] = None) -> None:
        def on_result(result):
            self.stok = result["stok"]
            if then is not None:
                then()

        self._request(self.camera, "login",
                      {"username": self.account.user, "password": self.account.password}, on_result)

    def control(self, method: str, params: Optional[dict] = None,
                then: Optional[Callable[[dict], None]] = None) -> None:
        self._request(self.camera, method, params, then or (lambda _: None), stok=self.stok)

    def create_third_party_user(self, user: str, password: str) -> None:
        self.control("create_third_party_user", {"username": user, "password": password})

    def start_stream(self) -> None:
        """Nonce, key derivation and response tag; the camera then streams."""

        def on_nonce(result):
            nonce = bytes.fromhex(result["nonce"])
            self.key, self.iv = crypto.derive_session_keys(crypto.account_secret(self.account.password), nonce)
            tag = crypto.response_tag(self.key, nonce)
            self._request(self.camera, "verify", {"response": tag.hex()}, on_streaming, stok=self.stok)

        def on_streaming(_):
            self.streaming = True

        self._request(self.camera, "begin_stream", None, on_nonce, stok=self.stok)

    def connect_and_stream(self) -> None:
        self.login(then=self.start_stream)

    def handle(self, packet: Packet, ingress: str) -> None:
        if packet.channel is Channel.AESSTREAM:
            self._on_media(packet)
        elif packet.channel is Channel.TLS and isinstance(packet.inner, dict):
            msg = packet.inner
            if "alert" in msg:
                self.notifications.append((self.net.now, msg.get("ts")))
            else:
                self._resolve(msg.get("id"), msg)

    def _on_media(self, packet: Packet) -> None:
        if self.key is None:
            self.bad_packets += 1
            return
        try:
            data = crypto.cbc_decrypt(self.key, self.iv, packet.payload)
            frame = parse_frame(data, len(self.received_frames))
        except ValueError:
            self.bad_packets += 1
            return
        self.received_frames.append(frame)


class ThirdPartyClient(_Requester):
    """RTSP player. Given an ``http://.../onvif/device_service`` URI it first asks
    the ONVIF service for the stream URI, then plays it exactly like an RTSP URI."""

    CONTROL_PORT = 50100

    def __init__(self, net: Network, name: str, uri: str, *, client_port: int = 5000,
                 timeout_ms: int = DEFAULT_TIMEOUT_MS):
        super().__init__(net, name, timeout_ms)
        self.uri = uri
        self.client_port = client_port
        self.session_id: Optional[str] = None
        self.received_frames: list[MediaFrame] = []
        self.bad_datagrams = 0
        self.decryptor = None  # set to a gateway.ClientDecryptor when deployed
        self._cseq = 0
        self._creds: Optional[Credentials] = None
        self._stream_uri: Optional[str] = None
        self._camera: Optional[str] = None
        self.last_status: Optional[int] = None

    @property
    def control_endpoint(self) -> Endpoint:
        return Endpoint(self.name, self.CONTROL_PORT)

    def play(self) -> None:
        try:
            target = parse_stream_uri(self.uri)
            self._camera = self.net.resolve(target.host)
        except TestbedError as exc:
            self._fail("play", exc)
            return
        self._creds = target.creds
        if target.scheme == "http":
            self._onvif_discover(target)
        else:
            self._stream_uri = f"rtsp://{target.host}:{target.port}{target.path}"
            self._rtsp_sequence(target.port)

    def _onvif_discover(self, target: StreamUri) -> None:
        auth = rtsp.basic_auth(self._creds.user, self._creds.password) if self._creds else None
        data = rtsp.onvif_request(target.path, target.host, auth)
        def on_reply(payload: bytes):
            code, body = rtsp.parse_http_response(payload)
            self.last_status = code
            uri = rtsp.extract_uri(body) if code == 200 else None
            if uri is None:
                self._fail("onvif", AuthFailed("ONVIF refused") if code == 401 else BadPath(target.path))
                return
            self._ok("onvif")
            self._stream_uri = uri
            self._rtsp_sequence(parse_stream_uri(uri).port)

        self._await("onvif", "onvif", on_reply)
        self.net.send(self.control_endpoint, Endpoint(self._camera, target.port), data, transport=Transport.TCP)

    def _rtsp(self, method: str, port: int, headers: dict, on_ok: Callable) -> None:
        self._cseq += 1
        if self._creds is not None:
            headers = {"Authorization": rtsp.basic_auth(self._creds.user, self._creds.password), **headers}
        req = rtsp.RtspRequest(method, self._stream_uri, self._cseq, headers)

        def on_reply(resp: rtsp.RtspResponse):
            self.last_status = resp.code
            if resp.code == 401:
                self._fail(method, AuthFailed(f"{method}: 401"))
            elif not resp.ok:
                self._fail(method, WrongState(f"{method}: {resp.code}"))
            else:
                self._ok(method)
                on_ok(resp)

        self._await(("rtsp", self._cseq), method, on_reply)
        self.net.send(self.control_endpoint, Endpoint(self._camera, port), req.encode(), transport=Transport.TCP)

    def _rtsp_sequence(self, port: int) -> None:
        transport = f"RTP/AVP;unicast;client_port={self.client_port}-{self.client_port + 1}"

        def after_setup(resp):
            self.session_id = resp.headers.get("Session")
            self._rtsp("PLAY", port, {"Session": self.session_id}, lambda _: None)

        self._rtsp("DESCRIBE", port, {"Accept": "application/sdp"},
                   lambda _: self._rtsp("SETUP", port, {"Transport": transport}, after_setup))

    def teardown(self) -> None:
        if self.session_id is not None and self._stream_uri is not None:
            port = parse_stream_uri(self._stream_uri).port
            self._rtsp("TEARDOWN", port, {"Session": self.session_id}, lambda _: None)

    def handle(self, packet: Packet, ingress: str) -> None:
        if self.decryptor is not None and self.decryptor.matches(packet):
            packet = self.decryptor.client_decrypt(packet)
            if packet is None:
                return
        if packet.dst.port == self.client_port and packet.transport is Transport.UDP:
            self._on_media(packet)
        elif packet.dst.port == self.CONTROL_PORT:
            self._on_control(packet)

    def _on_control(self, packet: Packet) -> None:
        if packet.src.port == PORT_ONVIF or packet.payload.startswith(b"HTTP/"):
            self._resolve("onvif", packet.payload)
            return
        try:
            resp = rtsp.RtspResponse.decode(packet.payload)
        except (ValueError, UnicodeDecodeError):
            return
        self._resolve(("rtsp", resp.cseq), resp)

    def _on_media(self, packet: Packet) -> None:
        try:
            frame = parse_frame(packet.payload, len(self.received_frames))
        except ValueError:
            self.bad_datagrams += 1
            return
        self.received_frames.append(frame)


class CloudStub:
    """Vendor cloud: binds cameras to accounts and fans motion alerts out."""

    def __init__(self, net: Network, name: str = "cloud", *, seed: int = 0):
        self.net = net
        self.name = name
        self.rng = random.Random(f"cloud:{seed}")
        self.camera_accounts: dict[str, str] = {}
        self.registered_devices: dict[str, list[Endpoint]] = {}
        self.relay_log: list[tuple[int, str, int]] = []
        self.rejected = 0

    @property
    def endpoint(self) -> Endpoint:
        return Endpoint(self.name, PORT_HTTPS)

    def bind_camera(self, camera_node: str, account: str) -> None:
        self.camera_accounts[camera_node] = account
        self.registered_devices.setdefault(account, [])

    def register_app(self, account: str, app: Endpoint) -> None:
        devices = self.registered_devices.setdefault(account, [])
        if app not in devices:
            devices.append(app)

    def cloud_relay(self, n: MotionNotification, account: str) -> int:
        """Send one alert per registered app endpoint; returns the fan-out count."""
        if account not in self.registered_devices:
            raise UnknownAccount(account)
        devices = self.registered_devices[account]
        for app in devices:
            send_tls(self.net, self.rng, self.endpoint, app, {"alert": "motion", "ts": n.ts})
        self.relay_log.append((self.net.now, account, len(devices)))
        if not devices:
            log.info("motion for %s relayed to no devices", account)
        return len(devices)

    def handle(self, packet: Packet, ingress: str) -> None:
        if packet.channel is not Channel.TLS or packet.dst.port != PORT_HTTPS:
            return
        msg = packet.inner
        if isinstance(msg, MotionNotification):
            try:
                self.cloud_relay(msg, self.camera_accounts.get(packet.src.node, packet.src.node))
            except UnknownAccount:
                self.rejected += 1
        elif isinstance(msg, dict) and msg.get("method") == "register":
            self.register_app(msg["params"]["account"], packet.src)
            send_tls(self.net, self.rng, self.endpoint, packet.src, {"id": msg.get("id"), "result": {}})


def app_connect_and_stream(net: Network, app: AppClient, duration_ms: int) -> list[MediaFrame]:
    """Run the full proprietary ceremony now and stream for ``duration_ms``.

    Raises the first error the client recorded (AuthFailed, Unavailable, ...).
    """
    app.error = None
    net.schedule(net.now, app.connect_and_stream)
    net.step(net.now + duration_ms)
    if app.error is not None:
        raise app.error
    return app.received_frames


def thirdparty_play(net: Network, client: ThirdPartyClient, duration_ms: int) -> list[MediaFrame]:
    """Play ``client.uri`` for ``duration_ms``; raises the first recorded error."""
    client.error = None
    net.schedule(net.now, client.play)
    net.step(net.now + duration_ms)
    if client.error is not None:
        raise client.error
    return client.received_frames
