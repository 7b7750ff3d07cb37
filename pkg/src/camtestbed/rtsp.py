"""Text wire formats for the RTSP (port 554) and ONVIF (port 2020) planes."""
from __future__ import annotations

import base64
import re
from dataclasses import dataclass, field
from typing import Optional

RTSP_VERSION = "RTSP/1.0"
STREAM_PATH = "/stream/1"
ONVIF_PATH = "/onvif/device_service"

REASONS = {
    200: "OK",
    401: "Unauthorized",
    404: "Not Found",
    454: "Session Not Found",
    455: "Method Not Valid in This State",
    501: "Not Implemented",
}

METHODS = ("OPTIONS", "DESCRIBE", "SETUP", "PLAY", "PAUSE", "RECORD", "TEARDOWN")


def basic_auth(user: str, password: str) -> str:
    token = base64.b64encode(f"{user}:{password}".encode("utf-8")).decode("ascii")
    return f"Basic {token}"


def parse_basic_auth(header: Optional[str]) -> Optional[tuple[str, str]]:
    if not header or not header.startswith("Basic "):
        return None
    try:
        user, _, password = base64.b64decode(header[6:], validate=True).decode("utf-8").partition(":")
    except (ValueError, UnicodeDecodeError):
        return None
    return user, password


def _encode(start: str, headers: dict, body: str) -> bytes:
    lines = [start] + [f"{k}: {v}" for k, v in headers.items()]
    return ("\r\n".join(lines) + "\r\n\r\n" + body).encode("utf-8")


def _decode(data: bytes) -> tuple[str, dict, str]:
    text = data.decode("utf-8")
    head, sep, body = text.partition("\r\n\r\n")
    if not sep:
        raise ValueError("missing header terminator")
    start, *rest = head.split("\r\n")
    headers = {}
    for line in rest:
        name, colon, value = line.partition(":")
        if not colon:
            raise ValueError(f"bad header line {line!r}")
        headers[name.strip()] = value.strip()
    return start, headers, body


@dataclass
class RtspRequest:
    method: str
    uri: str
    cseq: int
    headers: dict = field(default_factory=dict)

    def encode(self) -> bytes:
        return _encode(f"{self.method} {self.uri} {RTSP_VERSION}", {"CSeq": self.cseq, **self.headers}, "")

    @classmethod
    def decode(cls, data: bytes) -> "RtspRequest":
        start, headers, _ = _decode(data)
        parts = start.split(" ")
        if len(parts) != 3 or parts[2] != RTSP_VERSION:
            raise ValueError(f"bad request line {start!r}")
        cseq = int(headers.pop("CSeq", "0"))
        return cls(parts[0], parts[1], cseq, headers)


@dataclass
class RtspResponse:
    code: int
    cseq: int
    headers: dict = field(default_factory=dict)
    body: str = ""

    @property
    def ok(self) -> bool:
        return self.code == 200

    def encode(self) -> bytes:
        headers = {"CSeq": self.cseq, **self.headers}
        if self.body:
            headers["Content-Length"] = len(self.body.encode("utf-8"))
        return _encode(f"{RTSP_VERSION} {self.code} {REASONS.get(self.code, '')}", headers, self.body)

    @classmethod
    def decode(cls, data: bytes) -> "RtspResponse":
        start, headers, body = _decode(data)
        m = re.match(r"RTSP/1\.0 (\d{3})", start)
        if not m:
            raise ValueError(f"bad status line {start!r}")
        cseq = int(headers.pop("CSeq", "0"))
        headers.pop("Content-Length", None)
        return cls(int(m.group(1)), cseq, headers, body)


def parse_client_port(transport: str) -> Optional[int]:
    m = re.search(r"client_port=(\d+)", transport or "")
    return int(m.group(1)) if m else None


def describe_body(host: str) -> str:
    """Minimal SDP for a single H264-style video track."""
    return (
        "v=0\r\n"
        f"o=- 0 0 IN IP4 {host}\r\n"
        "s=Session streamed by camtestbed\r\n"
        "m=video 0 RTP/AVP 96\r\n"
        "a=rtpmap:96 H264/90000\r\n"
        "a=control:track1\r\n"
    )


# -- ONVIF device service (HTTP) ----------------------------------------------

GET_STREAM_URI = "<GetStreamUri><StreamSetup><Transport>RTSP</Transport></StreamSetup></GetStreamUri>"


def onvif_request(path: str, host: str, auth: Optional[str]) -> bytes:
    headers = {"Host": host, "Content-Type": "application/soap+xml"}
    if auth:
        headers["Authorization"] = auth
    headers["Content-Length"] = len(GET_STREAM_URI)
    return _encode(f"POST {path} HTTP/1.1", headers, GET_STREAM_URI)


def onvif_stream_uri_body(uri: str) -> str:
    return f"<GetStreamUriResponse><MediaUri><Uri>{uri}</Uri></MediaUri></GetStreamUriResponse>"


def http_response(code: int, body: str = "") -> bytes:
    reason = {200: "OK", 401: "Unauthorized", 404: "Not Found"}.get(code, "")
    return _encode(f"HTTP/1.1 {code} {reason}", {"Content-Length": len(body)}, body)


def parse_http_request(data: bytes) -> tuple[str, str, dict]:
    start, headers, _ = _decode(data)
    parts = start.split(" ")
    if len(parts) != 3:
        raise ValueError(f"bad request line {start!r}")
    return parts[0], parts[1], headers


def parse_http_response(data: bytes) -> tuple[int, str]:
    start, _, body = _decode(data)
    m = re.match(r"HTTP/1\.[01] (\d{3})", start)
    if not m:
        raise ValueError(f"bad status line {start!r}")
    return int(m.group(1)), body


def extract_uri(body: str) -> Optional[str]:
    m = re.search(r"<Uri>([^<]+)</Uri>", body)
    return m.group(1) if m else None
