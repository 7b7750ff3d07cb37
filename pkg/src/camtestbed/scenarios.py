"""Scenario configuration, the built-in scenarios, and the runner.

A scenario is a JSON object. Unset keys take the values in ``DEFAULTS``::

    {
      "name": "eavesdrop-thirdparty",
      "seed": 2021,
      "duration": 60,                       # virtual seconds
      "topology": "baseline",               # or "gateway"
      "camera": {"max_requests": 200, "window": 5, "reboot_delay": 30,
                 "motion_detection": true, "stray_fragments": []},
      "app": {"register_cloud": true,
              "third_party_user": {"user": "cam", "password": "pw", "at": 0.1},
              "stream_at": null,
              "actions": [{"at": 15, "do": "stream"}]},
      "thirdparty": {"uri": "rtsp://cam:pw@10.0.0.7/stream/1", "start": 1},
      "motion_script": {"events": [10, 20]}  or  {"night_curve": {...}},
      "attacker": {"taps": [["camera", "client"]],
                   "extract": {"tap": "camera-client", "expect": "frames"},
                   "histogram": {"tap": "camera-cloud", "bin": 600},
                   "suppress": {"start": 0, "stop": null},
                   "flood": {"rate": 100, "duration": 10, "start": 5}},
      "gateway": {"enabled": true, "psk": "<base64, 32 bytes>", "camera_addr": "10.0.0.7"}
    }

Times in the config are seconds; everything inside the simulation is ms.
"""
from __future__ import annotations

import base64
import binascii
import copy
import json
import logging
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

from . import cvss
from .attacker import Flooder, MotionHistogram, extract_media, motion_histogram, suppress_motion
from .camera import Camera, CameraConfig, Credentials, MotionEvent
from .errors import ConfigError
from .gateway import ClientDecryptor, Gateway
from .media import MediaFrame, MediaSource
from .netsim import PORT_HTTPS, Endpoint, Network
from .peers import AppClient, CloudStub, ThirdPartyClient

log = logging.getLogger(__name__)

CAMERA, CLOUD, APP, CLIENT, ATTACKER, GATEWAY = "camera", "cloud", "app", "client", "attacker", "gateway"
CAMERA_ADDR = "10.0.0.7"
GATEWAY_ADDR = "10.0.0.2"
OWNER = {"user": "owner@example.com", "password": "owner-pass"}
DEFAULT_PSK = base64.b64encode(bytes(range(32))).decode("ascii")
DRAIN_MS = 50
DEFAULT_SEED = 2021

DEFAULTS: dict = {
    "description": "",
    "seed": DEFAULT_SEED,
    "duration": 60,
    "topology": "baseline",
    "clock_origin": "00:00",
    "camera": {
        "owner": OWNER,
        "max_requests": 200,
        "window": 5,
        "reboot_delay": 30,
        "motion_detection": True,
        "stray_fragments": [],
    },
    "app": {
        "register_cloud": True,
        "third_party_user": None,
        "stream_at": None,
        "actions": [],
    },
    "thirdparty": None,
    "motion_script": None,
    "attacker": {"taps": [], "extract": None, "histogram": None, "suppress": None, "flood": None},
    "gateway": {"enabled": True, "psk": DEFAULT_PSK, "camera_addr": CAMERA_ADDR},
}

_TP_USER = {"user": "cam", "password": "pw", "at": 0.1}
_RTSP_URI = f"rtsp://cam:pw@{CAMERA_ADDR}/stream/1"
_ONVIF_URI = f"http://cam:pw@{CAMERA_ADDR}:2020/onvif/device_service"

BUILTINS: dict[str, dict] = {
    "baseline-proprietary": {
        "description": "Owner app runs the encrypted streaming ceremony; a tap on the "
                       "camera-app link recovers no frames.",
        "duration": 30,
        "app": {"stream_at": 0.5},
        "attacker": {"taps": [[CAMERA, APP]], "extract": {"tap": "app-camera", "expect": "none"}},
    },
    "baseline-thirdparty": {
        "description": "Third-party player discovers the stream over ONVIF and plays it over RTSP.",
        "duration": 30,
        "app": {"third_party_user": _TP_USER},
        "thirdparty": {"uri": _ONVIF_URI, "start": 1},
    },
    "eavesdrop-thirdparty": {
        "description": "On-path attacker reconstructs the plaintext third-party video.",
        "duration": 60,
        "app": {"third_party_user": _TP_USER},
        "thirdparty": {"uri": _RTSP_URI, "start": 1},
        "attacker": {"taps": [[CAMERA, CLIENT]], "extract": {"tap": "camera-client", "expect": "frames"}},
    },
    "eavesdrop-gateway": {
        "description": "Same session behind the encrypting gateway; the attacker taps the "
                       "gateway-client link.",
        "duration": 60,
        "topology": "gateway",
        "camera": {"stray_fragments": [5, 25, 45]},
        "app": {"third_party_user": _TP_USER},
        "thirdparty": {"uri": _RTSP_URI, "start": 1},
        "attacker": {"taps": [[GATEWAY, CLIENT]], "extract": {"tap": "client-gateway", "expect": "none"}},
    },
    "motion-oracle-overnight": {
        "description": "Eight hours of street traffic from 23:00; the attacker bins 523-byte "
                       "TLS records from the camera into 10-minute intervals.",
        "duration": 8 * 3600,
        "clock_origin": "23:00",
        "motion_script": {"night_curve": {
            "bin": 600,
            "points": [["23:00", 30], ["03:00", 2], ["03:30", 2], ["07:00", 40]],
        }},
        "attacker": {"taps": [[CAMERA, CLOUD]], "histogram": {"tap": "camera-cloud", "bin": 600}},
    },
    "motion-suppress": {
        "description": "Attacker drops every motion notification on the camera-cloud link.",
        "duration": 60,
        "motion_script": {"events": [10, 20, 30, 40, 50]},
        "attacker": {"taps": [[CAMERA, CLOUD]], "suppress": {"start": 0, "stop": None}},
    },
    "dos-flood": {
        "description": "Request flood crashes the camera; legitimate requests fail until it "
                       "reboots, and old tokens are rejected afterwards.",
        "duration": 60,
        "app": {
            "stream_at": 1,
            "actions": [
                {"at": 15, "do": "stream"},
                {"at": 40, "do": "get_settings"},
                {"at": 41, "do": "connect"},
            ],
        },
        "attacker": {"flood": {"rate": 100, "duration": 10, "start": 5}},
    },
}

APP_ACTIONS = ("login", "stream", "connect", "get_settings", "motion_on", "motion_off")


def list_scenarios() -> list[str]:
    return list(BUILTINS)


def _merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def builtin_config(name: str) -> dict:
    if name not in BUILTINS:
        raise ConfigError("name", f"unknown scenario {name!r}")
    return _merge(DEFAULTS, {"name": name, **BUILTINS[name]})


# -- validation ----------------------------------------------------------------


@dataclass
class ScenarioConfig:
    name: str
    seed: int
    duration: float
    topology: str
    camera: dict
    app: dict
    thirdparty: Optional[dict]
    motion_script: Optional[dict]
    attacker: dict
    gateway: dict
    clock_origin: str = "00:00"
    description: str = ""

    @property
    def duration_ms(self) -> int:
        return int(round(self.duration * 1000))

    def to_dict(self) -> dict:
        return {
            "name": self.name, "description": self.description, "seed": self.seed,
            "duration": self.duration, "topology": self.topology, "clock_origin": self.clock_origin,
            "camera": self.camera, "app": self.app, "thirdparty": self.thirdparty,
            "motion_script": self.motion_script, "attacker": self.attacker, "gateway": self.gateway,
        }

    def psk(self) -> bytes:
        return base64.b64decode(self.gateway["psk"])


def _num(obj, path, *, minimum=0.0, integer=False):
    if isinstance(obj, bool) or not isinstance(obj, (int, float)) or (integer and not isinstance(obj, int)):
        raise ConfigError(path, f"expected {'an integer' if integer else 'a number'}, got {obj!r}")
    if obj < minimum:
        raise ConfigError(path, f"must be >= {minimum}")
    return obj


def _time(obj, path, duration):
    t = _num(obj, path)
    if t > duration:
        raise ConfigError(path, f"time {t} is beyond the scenario duration {duration}")
    return t


def _clock(text, path) -> int:
    """'HH:MM' -> minutes after midnight."""
    try:
        hh, mm = str(text).split(":")
        minutes = int(hh) * 60 + int(mm)
    except ValueError:
        raise ConfigError(path, f"expected HH:MM, got {text!r}") from None
    if not 0 <= minutes < 24 * 60:
        raise ConfigError(path, f"clock time out of range: {text!r}")
    return minutes


def _tap_name(location) -> str:
    return location if isinstance(location, str) else "-".join(sorted(location))


def load_config(obj: Any, *, seed: Optional[int] = None) -> ScenarioConfig:
    """Validate a scenario object (merged over DEFAULTS) into a ScenarioConfig."""
    if not isinstance(obj, dict):
        raise ConfigError("$", "scenario must be a JSON object")
    unknown = set(obj) - set(DEFAULTS) - {"name"}
    if unknown:
        raise ConfigError(sorted(unknown)[0], "unknown key")
    cfg = _merge(DEFAULTS, obj)
    if seed is not None:
        cfg["seed"] = seed
    if not isinstance(cfg.get("name"), str) or not cfg["name"]:
        raise ConfigError("name", "required non-empty string")
    _num(cfg["seed"], "seed", minimum=0, integer=True)
    if cfg["seed"] >= 2**64:
        raise ConfigError("seed", "must fit in 64 bits")
    duration = _num(cfg["duration"], "duration")
    if duration <= 0:
        raise ConfigError("duration", "must be positive")
    if cfg["topology"] not in ("baseline", "gateway"):
        raise ConfigError("topology", "must be 'baseline' or 'gateway'")
    _clock(cfg["clock_origin"], "clock_origin")

    cam = cfg["camera"]
    for key in set(cam) - set(DEFAULTS["camera"]):
        raise ConfigError(f"camera.{key}", "unknown key")
    _num(cam["max_requests"], "camera.max_requests", minimum=1, integer=True)
    _num(cam["window"], "camera.window", minimum=0.001)
    _num(cam["reboot_delay"], "camera.reboot_delay", minimum=0.001)
    for i, t in enumerate(cam["stray_fragments"]):
        _time(t, f"camera.stray_fragments[{i}]", duration)
    if cam["stray_fragments"] and not cfg["thirdparty"]:
        raise ConfigError("camera.stray_fragments", "needs a third-party client to aim at")

    app = cfg["app"]
    for key in set(app) - set(DEFAULTS["app"]):
        raise ConfigError(f"app.{key}", "unknown key")
    if app["stream_at"] is not None:
        _time(app["stream_at"], "app.stream_at", duration)
    if app["third_party_user"] is not None:
        tpu = app["third_party_user"]
        for key in ("user", "password", "at"):
            if key not in tpu:
                raise ConfigError(f"app.third_party_user.{key}", "required")
        _time(tpu["at"], "app.third_party_user.at", duration)
    for i, action in enumerate(app["actions"]):
        _time(action.get("at"), f"app.actions[{i}].at", duration)
        if action.get("do") not in APP_ACTIONS:
            raise ConfigError(f"app.actions[{i}].do", f"must be one of {', '.join(APP_ACTIONS)}")

    if cfg["thirdparty"] is not None:
        tp = cfg["thirdparty"]
        if not isinstance(tp.get("uri"), str):
            raise ConfigError("thirdparty.uri", "required string")
        _time(tp.get("start", 0), "thirdparty.start", duration)

    ms = cfg["motion_script"]
    if ms is not None:
        if "events" in ms:
            for i, t in enumerate(ms["events"]):
                _time(t, f"motion_script.events[{i}]", duration)
        elif "night_curve" in ms:
            curve = ms["night_curve"]
            _num(curve.get("bin", 600), "motion_script.night_curve.bin", minimum=1, integer=True)
            points = curve.get("points")
            if not points or len(points) < 2:
                raise ConfigError("motion_script.night_curve.points", "need at least two points")
            for i, (clock, count) in enumerate(points):
                _clock(clock, f"motion_script.night_curve.points[{i}][0]")
                _num(count, f"motion_script.night_curve.points[{i}][1]")
        else:
            raise ConfigError("motion_script", "needs 'events' or 'night_curve'")

    nodes = {CAMERA, CLOUD, APP, ATTACKER} | ({CLIENT} if cfg["thirdparty"] else set())
    if cfg["topology"] == "gateway":
        nodes.add(GATEWAY)
    atk = cfg["attacker"]
    for key in set(atk) - set(DEFAULTS["attacker"]):
        raise ConfigError(f"attacker.{key}", "unknown key")
    tap_names = set()
    for i, loc in enumerate(atk["taps"]):
        names = [loc] if isinstance(loc, str) else list(loc)
        if len(names) not in (1, 2):
            raise ConfigError(f"attacker.taps[{i}]", "a node name or a [node, node] link")
        for name in names:
            if name not in nodes:
                raise ConfigError(f"attacker.taps[{i}]", f"node {name!r} not in the {cfg['topology']} topology")
        tap_names.add(_tap_name(loc if isinstance(loc, str) else names))
    for part in ("extract", "histogram"):
        spec = atk[part]
        if spec is not None and spec.get("tap") not in tap_names:
            raise ConfigError(f"attacker.{part}.tap", f"unknown tap {spec.get('tap')!r}")
    if atk["extract"] is not None and atk["extract"].get("expect", "frames") not in ("frames", "none"):
        raise ConfigError("attacker.extract.expect", "must be 'frames' or 'none'")
    if atk["histogram"] is not None:
        _num(atk["histogram"].get("bin", 600), "attacker.histogram.bin", minimum=1, integer=True)
    if atk["suppress"] is not None:
        _time(atk["suppress"].get("start", 0), "attacker.suppress.start", duration)
        if atk["suppress"].get("stop") is not None:
            _time(atk["suppress"]["stop"], "attacker.suppress.stop", duration)
    if atk["flood"] is not None:
        fl = atk["flood"]
        if _num(fl.get("rate"), "attacker.flood.rate") <= 0:
            raise ConfigError("attacker.flood.rate", "must be positive")
        _num(fl.get("duration"), "attacker.flood.duration")
        _time(fl.get("start", 0), "attacker.flood.start", duration)

    if cfg["topology"] == "gateway":
        try:
            psk = base64.b64decode(cfg["gateway"]["psk"], validate=True)
        except (binascii.Error, TypeError):
            raise ConfigError("gateway.psk", "not valid base64") from None
        if len(psk) != 32:
            raise ConfigError("gateway.psk", f"must decode to 32 bytes, got {len(psk)}")

    return ScenarioConfig(
        name=cfg["name"], seed=cfg["seed"], duration=duration, topology=cfg["topology"],
        camera=cam, app=app, thirdparty=cfg["thirdparty"], motion_script=ms, attacker=atk,
        gateway=cfg["gateway"], clock_origin=cfg["clock_origin"], description=cfg["description"],
    )


# -- motion scripts ------------------------------------------------------------


def night_curve_counts(curve: dict, duration_ms: int, clock_origin: str) -> list[int]:
    """Per-bin event counts from a piecewise-linear curve over clock times."""
    width = curve.get("bin", 600) * 1000
    origin = _clock(clock_origin, "clock_origin")
    points = []
    for clock, count in curve["points"]:
        offset = (_clock(clock, "points") - origin) % (24 * 60)
        points.append((offset * 60_000, float(count)))
    nbins = -(-duration_ms // width)
    counts = []
    for i in range(nbins):
        t = i * width
        counts.append(int(round(_interp(points, t))))
    return counts


def _interp(points, t):
    if t <= points[0][0]:
        return points[0][1]
    for (t0, v0), (t1, v1) in zip(points, points[1:]):
        if t0 <= t <= t1:
            return v0 + (v1 - v0) * (t - t0) / (t1 - t0)
    return points[-1][1]


def motion_times(cfg: ScenarioConfig) -> list[int]:
    """Scripted motion event times (ms); the same list drives camera and ground truth."""
    ms = cfg.motion_script
    if ms is None:
        return []
    if "events" in ms:
        return sorted(int(round(t * 1000)) for t in ms["events"])
    curve = ms["night_curve"]
    width = curve.get("bin", 600) * 1000
    rng = random.Random(f"motion:{cfg.seed}")
    times = []
    for i, count in enumerate(night_curve_counts(curve, cfg.duration_ms, cfg.clock_origin)):
        start = i * width
        end = min(start + width, cfg.duration_ms)
        times.extend(sorted(rng.randrange(start, end) for _ in range(count)))
    return times


# -- testbed -------------------------------------------------------------------


@dataclass
class Testbed:
    """Live objects of one simulation run."""

    __test__ = False

    net: Network
    camera: Camera
    cloud: CloudStub
    app: AppClient
    attacker: Flooder
    client: Optional[ThirdPartyClient] = None
    gateway: Optional[Gateway] = None
    decryptor: Optional[ClientDecryptor] = None
    captures: dict = field(default_factory=dict)
    hooks: list = field(default_factory=list)


def build_testbed(cfg: ScenarioConfig) -> Testbed:
    net = Network()
    seed = cfg.seed
    cam_cfg = cfg.camera
    owner = Credentials(cam_cfg["owner"]["user"], cam_cfg["owner"]["password"])
    cloud = CloudStub(net, CLOUD, seed=seed)
    camera = Camera(
        net, CAMERA, owner, address=CAMERA_ADDR, cloud=cloud.endpoint, media=MediaSource(seed), seed=seed,
        config=CameraConfig(
            max_requests=cam_cfg["max_requests"],
            window_ms=int(round(cam_cfg["window"] * 1000)),
            reboot_delay_ms=int(round(cam_cfg["reboot_delay"] * 1000)),
            motion_detection=cam_cfg["motion_detection"],
        ),
    )
    app = AppClient(net, APP, owner, camera.endpoint(PORT_HTTPS), cloud=cloud.endpoint, seed=seed)
    flooder = Flooder(net, ATTACKER, seed=seed)
    net.register_node(CAMERA, camera, address=CAMERA_ADDR)
    net.register_node(CLOUD, cloud)
    net.register_node(APP, app)
    net.register_node(ATTACKER, flooder)
    cloud.bind_camera(CAMERA, owner.user)
    bed = Testbed(net, camera, cloud, app, flooder)
    if cfg.thirdparty is not None:
        bed.client = ThirdPartyClient(net, CLIENT, cfg.thirdparty["uri"])
        net.register_node(CLIENT, bed.client)
    if cfg.topology == "gateway":
        psk = cfg.psk()
        bed.gateway = Gateway(net, GATEWAY, CAMERA, psk, enabled=cfg.gateway.get("enabled", True),
                              seed=seed, camera_addr=cfg.gateway.get("camera_addr", CAMERA_ADDR))
        net.register_node(GATEWAY, bed.gateway, address=GATEWAY_ADDR)
        net.route_via(CAMERA, GATEWAY)
        if bed.client is not None and bed.gateway.enabled:
            bed.decryptor = ClientDecryptor(psk, GATEWAY)
            bed.client.decryptor = bed.decryptor
    for loc in cfg.attacker["taps"]:
        loc = loc if isinstance(loc, str) else tuple(loc)
        bed.captures[_tap_name(loc)] = net.attach_tap(loc).sink
    return bed


def _schedule(cfg: ScenarioConfig, bed: Testbed) -> dict:
    net, app = bed.net, bed.app
    sec = lambda t: int(round(t * 1000))  # noqa: E731
    handles: dict = {}
    if cfg.app["register_cloud"]:
        net.schedule(0, app.register_with_cloud)
    tpu = cfg.app["third_party_user"]
    if tpu is not None:
        net.schedule(sec(tpu["at"]), app.login,
                     lambda: app.create_third_party_user(tpu["user"], tpu["password"]))
    if cfg.app["stream_at"] is not None:
        net.schedule(sec(cfg.app["stream_at"]), app.connect_and_stream)
    for action in cfg.app["actions"]:
        fn = {
            "login": app.login,
            "stream": app.start_stream,
            "connect": app.connect_and_stream,
            "get_settings": lambda: app.control("get_settings"),
            "motion_on": lambda: app.control("set_motion_detection", {"enabled": True}),
            "motion_off": lambda: app.control("set_motion_detection", {"enabled": False}),
        }[action["do"]]
        net.schedule(sec(action["at"]), fn)
    if bed.client is not None:
        net.schedule(sec(cfg.thirdparty.get("start", 0)), bed.client.play)
        junk = b"\xff" * 600
        for t in cfg.camera["stray_fragments"]:
            net.schedule(sec(t), bed.camera.send_fragment,
                         Endpoint(CLIENT, bed.client.client_port), junk)
    for t in motion_times(cfg):
        net.schedule(t, bed.camera.on_motion, MotionEvent(t))
    atk = cfg.attacker
    if atk["suppress"] is not None:
        def start_suppression():
            handles["suppress"] = suppress_motion(net, CAMERA, CLOUD)
            bed.hooks.append(handles["suppress"])

        net.schedule(sec(atk["suppress"].get("start", 0)), start_suppression)
        if atk["suppress"].get("stop") is not None:
            net.schedule(sec(atk["suppress"]["stop"]), lambda: net.remove_hook(handles["suppress"]))
    if atk["flood"] is not None:
        fl = atk["flood"]
        handles["flood"] = bed.attacker.flood(
            bed.camera.endpoint(PORT_HTTPS), fl["rate"], fl["duration"], sec(fl.get("start", 0)))
    return handles


def simulate(cfg: ScenarioConfig) -> tuple[Testbed, dict]:
    bed = build_testbed(cfg)
    handles = _schedule(cfg, bed)
    end = cfg.duration_ms
    bed.net.schedule(end, bed.camera.stop_media)
    bed.net.step(end + DRAIN_MS)
    return bed, handles


# -- report --------------------------------------------------------------------


@dataclass
class RunReport:
    config: ScenarioConfig
    data: dict
    captures: dict
    histogram: Optional[MotionHistogram] = None
    testbed: Optional[Testbed] = None

    @property
    def checks(self) -> dict:
        return self.data["checks"]

    @property
    def passed(self) -> bool:
        return self.data["passed"]

    def to_json(self) -> str:
        return json.dumps(self.data, indent=2, sort_keys=True) + "\n"

    def write(self, out_dir) -> Path:
        out = Path(out_dir)
        (out / "captures").mkdir(parents=True, exist_ok=True)
        for name, cap in self.captures.items():
            cap.write(out / "captures" / f"{name}.jsonl")
        if self.histogram is not None:
            (out / "histogram.csv").write_text(self.histogram.to_csv(), encoding="utf-8")
        (out / "report.json").write_text(self.to_json(), encoding="utf-8")
        return out


def _frames_equal(frames: list[MediaFrame], source: MediaSource) -> bool:
    return [f.serialize() for f in frames] == [f.serialize() for f in source.frames(len(frames))]


def _packet_counts(net: Network) -> dict:
    sent: dict[str, int] = {}
    received: dict[str, int] = {}
    for p in net.sent:
        sent[p.src.node] = sent.get(p.src.node, 0) + 1
    for hop, p in net.delivered:
        received[p.dst.node] = received.get(p.dst.node, 0) + 1
    drops: dict[str, int] = {}
    for _, reason in net.drops:
        drops[reason] = drops.get(reason, 0) + 1
    return {"sent_by": dict(sorted(sent.items())), "delivered_to": dict(sorted(received.items())),
            "dropped": dict(sorted(drops.items())), "total_sent": len(net.sent)}


def run_scenario(cfg: ScenarioConfig, *, twin: bool = True) -> RunReport:
    """Run ``cfg`` deterministically and evaluate its checks.

    For gateway scenarios the same config is also run on the baseline
    topology (``twin``) so the report can state whether the player saw
    identical frames with and without the gateway.
    """
    bed, handles = simulate(cfg)
    net, camera, app = bed.net, bed.camera, bed.app
    source = camera.media
    checks: dict[str, bool] = {}
    attacks: dict[str, Any] = {}
    data: dict[str, Any] = {
        "scenario": cfg.name,
        "seed": cfg.seed,
        "duration_s": cfg.duration,
        "topology": cfg.topology,
        "packets": _packet_counts(net),
        "captures": {name: {"path": f"captures/{name}.jsonl", "records": len(cap)}
                     for name, cap in bed.captures.items()},
        "camera": {
            "frames_emitted": dict(sorted(camera.frames_emitted.items())),
            "motion_events": len(camera.motion_log),
            "notifications_sent": camera.notifications_sent,
            "crash_intervals": [list(iv) for iv in camera.crash_intervals()],
        },
        "cvss": cvss.findings_table(),
    }

    if cfg.app["stream_at"] is not None:
        n = camera.frames_emitted.get("proprietary", 0)
        data["app"] = {"frames_received": len(app.received_frames), "bad_packets": app.bad_packets}
        checks["app_stream_decrypts"] = app.bad_packets == 0 and len(app.received_frames) > 0
        if cfg.attacker["flood"] is None:
            checks["app_stream_matches_generator"] = (
                len(app.received_frames) == n and _frames_equal(app.received_frames, source))

    if bed.client is not None:
        client = bed.client
        n = camera.frames_emitted.get("rtsp", 0)
        data["thirdparty"] = {"frames_received": len(client.received_frames),
                              "bad_datagrams": client.bad_datagrams}
        checks["thirdparty_stream_matches_generator"] = (
            n > 0 and len(client.received_frames) == n and _frames_equal(client.received_frames, source))

    ex = cfg.attacker["extract"]
    if ex is not None:
        frames = extract_media(bed.captures[ex["tap"]])
        generated = camera.frames_emitted.get("rtsp", 0) + camera.frames_emitted.get("proprietary", 0)
        attacks["eavesdrop"] = {"tap": ex["tap"], "frames_extracted": len(frames),
                                "frames_generated": generated, "diagnostic": frames.diagnostic}
        if ex.get("expect", "frames") == "frames":
            checks["extracted_equals_generated"] = (
                generated > 0 and len(frames) == generated and _frames_equal(frames, source))
        else:
            checks["extraction_finds_nothing"] = len(frames) == 0

    histogram = None
    hs = cfg.attacker["histogram"]
    if hs is not None:
        width = hs.get("bin", 600)
        histogram = motion_histogram(bed.captures[hs["tap"]], bin=width, span_ms=cfg.duration_ms,
                                     camera=CAMERA, cloud=CLOUD)
        truth = MotionHistogram.from_times(motion_times(cfg), width, span_ms=cfg.duration_ms)
        attacks["motion_oracle"] = {
            "histogram_path": "histogram.csv", "bin_width_s": width, "bins": histogram.bins,
            "total": histogram.total, "ground_truth_total": truth.total,
            "clock_origin": cfg.clock_origin,
        }
        checks["histogram_matches_ground_truth"] = histogram.bins == truth.bins
        if cfg.motion_script and "night_curve" in cfg.motion_script:
            checks.update(night_curve_shape(histogram.bins, width, cfg.clock_origin))

    if cfg.attacker["suppress"] is not None:
        hook = handles.get("suppress")
        drops = hook.drop_count if hook else 0
        motions = len(camera.motion_log)
        alerts = len(app.notifications)
        attacks["suppression"] = {"motion_events": motions, "drop_count": drops, "app_alerts": alerts}
        checks["suppression_accounts_for_every_motion"] = motions > 0 and alerts == motions - drops
        if cfg.attacker["suppress"].get("stop") is None and cfg.attacker["suppress"].get("start", 0) == 0:
            checks["victim_sees_no_alerts"] = alerts == 0 and drops == motions

    if handles.get("flood") is not None:
        report = handles["flood"]
        failures = [(ts, a, o) for ts, a, o in app.events if o != "ok" and ts >= report.start_ms]
        report.first_failed_legit_ts = failures[0][0] if failures else None
        attacks["dos"] = report.to_dict()
        checks.update(dos_checks(cfg, camera, app, report))

    if bed.gateway is not None:
        counters = bed.gateway.counters()
        counters["auth_failures"] = bed.decryptor.auth_failures if bed.decryptor else 0
        data["gateway"] = counters
        downstream = [c for name, c in bed.captures.items() if GATEWAY in name.split("-")
                      and CAMERA not in name.split("-")]
        checks["no_fragments_downstream"] = all(
            not (r.frag and r.src_node == CAMERA) for cap in downstream for r in cap)
        checks["every_intercept_sealed"] = counters["intercepted"] == counters["sealed"]
        if bed.client is not None and twin:
            plain_cfg = copy.deepcopy(cfg)
            plain_cfg.topology = "baseline"
            plain_cfg.attacker = dict(plain_cfg.attacker, taps=[], extract=None, histogram=None)
            plain_bed, _ = simulate(plain_cfg)
            same = ([f.serialize() for f in bed.client.received_frames]
                    == [f.serialize() for f in plain_bed.client.received_frames])
            data["transparency"] = {"frames_with_gateway": len(bed.client.received_frames),
                                    "frames_without_gateway": len(plain_bed.client.received_frames)}
            checks["transparency"] = same and len(bed.client.received_frames) > 0

    data["attacks"] = attacks
    data["checks"] = dict(sorted(checks.items()))
    data["passed"] = all(checks.values())
    return RunReport(cfg, data, bed.captures, histogram, bed)


def night_curve_shape(bins: list[int], bin_width: int, clock_origin: str) -> dict[str, bool]:
    """Falling from the start through 03:00, peaking in the 06:30-07:00 window."""
    origin = _clock(clock_origin, "clock_origin")
    per_bin = bin_width // 60

    def index_at(clock: str) -> int:
        return ((_clock(clock, "") - origin) % (24 * 60)) // per_bin

    fall = bins[: index_at("03:00") + 1]
    peak_window = bins[index_at("06:30"): index_at("07:00")]
    return {
        "night_curve_non_increasing_to_0300": all(a >= b for a, b in zip(fall, fall[1:])),
        "night_curve_peaks_0630_0700": bool(peak_window) and max(peak_window) == max(bins),
    }


def dos_checks(cfg: ScenarioConfig, camera: Camera, app: AppClient, report) -> dict[str, bool]:
    intervals = camera.crash_intervals()
    if not intervals:
        return {"camera_crashed_within_window": False}
    crash, reboot = intervals[0]
    window = camera.config.window_ms
    after = [(ts, a, o) for ts, a, o in app.events if reboot is not None and ts >= reboot]
    during = [(ts, a, o) for ts, a, o in app.events if crash <= ts and (reboot is None or ts < reboot)]
    return {
        "camera_crashed_within_window": report.start_ms <= crash <= report.start_ms + window,
        "attacker_observed_crash": report.crashed,
        "legit_requests_fail_during_outage": bool(during) and all(o == "Unavailable" for _, _, o in during),
        "single_outage": len(intervals) == 1 and reboot == crash + camera.config.reboot_delay_ms,
        "old_stok_rejected_after_reboot": any(o == "InvalidStok" for _, _, o in after),
        "relogin_and_stream_after_reboot": any(a == "login" and o == "ok" for _, a, o in after)
        and any(a == "verify" and o == "ok" for _, a, o in after),
    }
