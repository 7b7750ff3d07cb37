import hashlib

import pytest

from camtestbed import crypto, rtsp
from camtestbed.camera import (
    NOTIFICATION_LEN,
    CameraConfig,
    Credentials,
    MotionEvent,
    Power,
    SessionState,
    StreamSession,
)
from camtestbed.errors import (
    AuthFailed,
    BadPath,
    BadResponse,
    InvalidStok,
    RtspError,
    SessionExists,
    Unavailable,
    WrongState,
)
from camtestbed.media import parse_frame
from camtestbed.netsim import Channel, Endpoint, Transport
from conftest import OWNER

URI = "rtsp://10.0.0.7:554/stream/1"
CAM_USER = Credentials("cam", "pw")


def crash(camera, at=None):
    """Push max_requests + 1 requests into the window at one instant."""
    now = camera.net.now if at is None else at
    camera.request_window.extend([now] * (camera.config.max_requests + 1))
    return camera.ingest_tick(now)


def test_login_issues_distinct_stoks(bed):
    a = bed.camera.handle_login(OWNER.user, OWNER.password)
    b = bed.camera.handle_login(OWNER.user, OWNER.password)
    assert a != b and len(a) == 32
    assert set(bed.camera.stok_table) == {a, b}


def test_login_wrong_password(bed):
    with pytest.raises(AuthFailed):
        bed.camera.handle_login(OWNER.user, "wrong")


def test_control_requires_valid_stok(bed):
    stok = bed.camera.handle_login(OWNER.user, OWNER.password)
    assert bed.camera.handle_control(stok, {"method": "get_settings"})["motion_detection"] is True
    with pytest.raises(InvalidStok):
        bed.camera.handle_control("deadbeef", {"method": "get_settings"})


def test_create_third_party_user(bed):
    stok = bed.camera.handle_login(OWNER.user, OWNER.password)
    bed.camera.handle_control(stok, {"method": "create_third_party_user",
                                     "params": {"username": "cam", "password": "pw"}})
    assert bed.camera.third_party_users == {"cam": "pw"}
    settings = bed.camera.handle_control(stok, {"method": "get_settings"})
    assert settings["third_party_users"] == ["cam"]


def test_stok_invalidated_by_crash(bed):
    stok = bed.camera.handle_login(OWNER.user, OWNER.password)
    assert crash(bed.camera) == [Power.CRASHED]
    with pytest.raises(Unavailable):
        bed.camera.handle_control(stok, {"method": "get_settings"})
    bed.run(bed.camera.config.reboot_delay_ms)
    assert not bed.camera.is_down
    with pytest.raises(InvalidStok):
        bed.camera.handle_control(stok, {"method": "get_settings"})


def test_key_agreement_matches_hash_oracle(bed):
    stok = bed.camera.handle_login(OWNER.user, OWNER.password)
    nonce = bed.camera.begin_proprietary_stream(stok)
    secret = hashlib.sha256(OWNER.password.encode()).digest()
    key = hashlib.sha256(secret + nonce).digest()[:16]
    iv = hashlib.sha256(nonce + secret).digest()[:16]
    session = bed.camera.verify_response(stok, hashlib.sha256(key + nonce).digest())
    assert (session.key, session.iv) == (key, iv)
    assert session.state is SessionState.STREAMING
    frame = bed.camera.media.frame(0)
    assert parse_frame(crypto.cbc_decrypt(key, iv, bed.camera.encrypt_frame(session, frame))) == frame


def test_second_session_for_same_stok_rejected(bed):
    stok = bed.camera.handle_login(OWNER.user, OWNER.password)
    bed.camera.begin_proprietary_stream(stok)
    with pytest.raises(SessionExists):
        bed.camera.begin_proprietary_stream(stok)


def test_bit_flipped_response_rejected(bed):
    stok = bed.camera.handle_login(OWNER.user, OWNER.password)
    nonce = bed.camera.begin_proprietary_stream(stok)
    key, _ = crypto.derive_session_keys(crypto.account_secret(OWNER.password), nonce)
    tag = bytearray(crypto.response_tag(key, nonce))
    tag[5] ^= 0x10
    with pytest.raises(BadResponse):
        bed.camera.verify_response(stok, bytes(tag))
    assert bed.camera.sessions[stok].state is SessionState.CLOSED


def test_session_states_only_move_forward():
    s = StreamSession("s", b"", b"", b"")
    s.advance(SessionState.STREAMING)
    with pytest.raises(WrongState):
        s.advance(SessionState.AUTHENTICATED)


def rtsp_bed(make_bed):
    b = make_bed()
    b.add_third_party_user()
    return b


def test_rtsp_setup_before_describe(make_bed):
    cam = rtsp_bed(make_bed).camera
    conn = Endpoint("client", 50100)
    with pytest.raises(RtspError) as err:
        cam.rtsp_request("SETUP", URI, CAM_USER, conn=conn, client_port=5000)
    assert err.value.code == 455


def test_rtsp_wrong_password(make_bed):
    cam = rtsp_bed(make_bed).camera
    with pytest.raises(RtspError) as err:
        cam.rtsp_request("DESCRIBE", URI, Credentials("cam", "nope"))
    assert err.value.code == 401


def test_rtsp_bad_path(make_bed):
    cam = rtsp_bed(make_bed).camera
    with pytest.raises(RtspError) as err:
        cam.rtsp_request("DESCRIBE", "rtsp://10.0.0.7/other", CAM_USER)
    assert err.value.code == 404


def test_rtsp_unknown_method(make_bed):
    cam = rtsp_bed(make_bed).camera
    with pytest.raises(RtspError) as err:
        cam.rtsp_request("ANNOUNCE", URI, CAM_USER)
    assert err.value.code == 501


def _setup(cam, conn):
    cam.rtsp_request("DESCRIBE", URI, CAM_USER, conn=conn)
    resp = cam.rtsp_request("SETUP", URI, CAM_USER, conn=conn, client_port=5000)
    return resp.headers["Session"]


def test_rtsp_play_streams_plain_udp(make_bed):
    b = rtsp_bed(make_bed)
    b.net.register_node("client")
    conn = Endpoint("client", 50100)
    sid = _setup(b.camera, conn)
    b.camera.rtsp_request("PLAY", URI, CAM_USER, sid, conn=conn)
    b.run(1000)
    got = b.net.inboxes["client"]
    assert len(got) == 10
    assert all(p.transport is Transport.UDP and p.channel is Channel.PLAIN for p in got)
    assert all(p.src.port == 6970 and p.dst.port == 5000 for p in got)
    assert [parse_frame(p.payload, i) for i, p in enumerate(got)] == b.camera.media.frames(10)


def test_rtsp_unknown_session(make_bed):
    cam = rtsp_bed(make_bed).camera
    with pytest.raises(RtspError) as err:
        cam.rtsp_request("PLAY", URI, CAM_USER, "NOSUCH")
    assert err.value.code == 454


def test_rtsp_pause_requires_playing(make_bed):
    b = rtsp_bed(make_bed)
    conn = Endpoint("client", 50100)
    sid = _setup(b.camera, conn)
    with pytest.raises(RtspError) as err:
        b.camera.rtsp_request("PAUSE", URI, CAM_USER, sid, conn=conn)
    assert err.value.code == 455


def test_rtsp_record_stores_instead_of_sending(make_bed):
    b = rtsp_bed(make_bed)
    b.net.register_node("client")
    conn = Endpoint("client", 50100)
    sid = _setup(b.camera, conn)
    b.camera.rtsp_request("RECORD", URI, CAM_USER, sid, conn=conn)
    b.run(500)
    assert len(b.camera.storage) == 6  # t = 0, 100, ..., 500
    assert b.net.inboxes["client"] == []


def test_rtsp_teardown_forgets_session(make_bed):
    b = rtsp_bed(make_bed)
    conn = Endpoint("client", 50100)
    sid = _setup(b.camera, conn)
    b.camera.rtsp_request("TEARDOWN", URI, CAM_USER, sid, conn=conn)
    assert sid not in b.camera.rtsp_sessions


def test_onvif_returns_stream_uri(make_bed):
    cam = rtsp_bed(make_bed).camera
    resp = cam.onvif_request("http://10.0.0.7:2020/onvif/device_service", CAM_USER)
    assert resp.code == 200 and resp.stream_uri == URI
    body = rtsp.onvif_stream_uri_body(resp.stream_uri)
    assert rtsp.extract_uri(body) == URI


def test_onvif_errors(make_bed):
    cam = rtsp_bed(make_bed).camera
    with pytest.raises(BadPath):
        cam.onvif_request("/onvif/other", CAM_USER)
    with pytest.raises(AuthFailed):
        cam.onvif_request("/onvif/device_service", Credentials("cam", "x"))


def test_motion_notification_is_523_bytes(bed):
    pkt = bed.camera.on_motion(MotionEvent(0))
    assert pkt.length == NOTIFICATION_LEN == 523
    assert pkt.channel is Channel.TLS and pkt.transport is Transport.TCP
    assert pkt.dst == bed.cloud.endpoint


def test_motion_detection_off(make_bed):
    b = make_bed(config=CameraConfig(motion_detection=False))
    assert b.camera.on_motion(MotionEvent(0)) is None
    b.run(10)
    assert b.net.inboxes["cloud"] == []


def test_motion_while_down_is_lost(bed):
    crash(bed.camera)
    assert bed.camera.on_motion(MotionEvent(0)) is None
    assert bed.camera.motion_log == []


@pytest.mark.parametrize("count, crashed", [(199, False), (200, False), (201, True)])
def test_request_threshold(bed, count, crashed):
    for i in range(count):
        bed.net.send(Endpoint("app", 50000), bed.camera.endpoint(443), b"", channel=Channel.TLS, inner={})
    bed.run(5)
    assert bed.camera.is_down is crashed


def test_requests_spread_beyond_window_never_crash(bed):
    # 200 per 5 s sliding window exactly, forever
    for k in range(1000):
        bed.net.schedule(k * 25, bed.net.send, Endpoint("app", 1), bed.camera.endpoint(443), b"")
    bed.run(30_000)
    assert not bed.camera.is_down


def test_crash_reboot_timeline(bed):
    bed.net.step(1000)
    crash(bed.camera)
    bed.run(29_999)
    assert bed.camera.is_down
    bed.run(1)
    assert not bed.camera.is_down
    assert bed.camera.crash_intervals() == [(1000, 31_000)]


def test_crashed_camera_drops_incoming(bed):
    crash(bed.camera)
    bed.net.send(Endpoint("app", 1), bed.camera.endpoint(443), b"x", channel=Channel.TLS,
                 inner={"id": 1, "method": "login", "params": {}})
    bed.run(5)
    assert any(reason for _, reason in bed.net.drops)
    assert bed.net.inboxes["app"] == []
