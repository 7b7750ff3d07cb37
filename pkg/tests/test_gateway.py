import pytest
from cryptography.exceptions import InvalidTag
from hypothesis import given
from hypothesis import strategies as st

from camtestbed.gateway import (
    HEADER_SKIP,
    ClientDecryptor,
    Gateway,
    GatewayCrypto,
    Verdict,
    encapsulate,
)
from camtestbed.media import MediaSource, parse_frames
from camtestbed.netsim import Channel, Endpoint, Network, Packet, Transport, rewrite

PSK = bytes(range(32))


def pkt(src="camera", dst="client", transport=Transport.UDP, fragmented=False, payload=b"data", dport=5000):
    return Packet(1, 0, Endpoint(src, 6970), Endpoint(dst, dport), transport, Channel.PLAIN,
                  fragmented, payload)


@pytest.fixture
def gw_net():
    net = Network()
    net.register_node("camera", address="10.0.0.7")
    gw = Gateway(net, "gateway", "camera", PSK)
    net.register_node("gateway", gw)
    net.register_node("client")
    net.route_via("camera", "gateway")
    return net, gw


def test_classify(gw_net):
    _, gw = gw_net
    assert gw.classify(pkt(), "camera") is Verdict.INTERCEPT
    assert gw.classify(pkt(fragmented=True), "camera") is Verdict.DROP_FRAGMENT
    assert gw.classify(pkt(transport=Transport.TCP), "camera") is Verdict.FORWARD
    assert gw.classify(pkt(src="client", dst="camera"), "client") is Verdict.FORWARD
    assert gw.classify(pkt(src="client", dst="camera", fragmented=True), "client") is Verdict.FORWARD


@given(st.binary(max_size=1500), st.binary(min_size=12, max_size=12))
def test_seal_open_roundtrip(data, nonce):
    c = GatewayCrypto(PSK)
    sealed = c.seal(data, nonce)
    assert len(sealed) == len(data) + 12 + 16
    assert c.open(sealed) == data


@given(st.binary(min_size=1, max_size=200), st.integers(0, 10**6))
def test_any_tampering_is_rejected(data, where):
    c = GatewayCrypto(PSK)
    sealed = bytearray(c.seal(data, b"\x01" * 12))
    sealed[where % len(sealed)] ^= 0x01
    with pytest.raises(InvalidTag):
        c.open(bytes(sealed))


def test_wrong_psk_length():
    with pytest.raises(ValueError):
        GatewayCrypto(b"short")


def test_encapsulated_payload_offset():
    p = pkt(payload=b"hello world")
    datagram = encapsulate(p, "10.0.0.7", "10.0.0.9")
    assert HEADER_SKIP == 28
    assert datagram[HEADER_SKIP:] == b"hello world"
    assert datagram[0] == 0x45 and datagram[9] == 17
    assert int.from_bytes(datagram[2:4], "big") == len(datagram)
    assert datagram[12:16] == bytes([10, 0, 0, 7])


def test_encrypt_forward_keeps_destination(gw_net):
    net, gw = gw_net
    frame = MediaSource(0).frame(0).serialize()
    net.send(Endpoint("camera", 6970), Endpoint("client", 5000), frame)
    net.step(10)
    out = net.inboxes["client"]
    assert len(out) == 1
    assert out[0].dst == Endpoint("client", 5000)
    assert out[0].src.node == "gateway"
    assert frame not in out[0].payload
    assert parse_frames(out[0].payload) == []
    assert GatewayCrypto(PSK).open(out[0].payload) == frame
    assert gw.counters()["intercepted"] == gw.counters()["sealed"] == 1


def test_fragment_dropped(gw_net):
    net, gw = gw_net
    net.send(Endpoint("camera", 6970), Endpoint("client", 5000), b"\xff" * 600, fragmented=True)
    net.step(10)
    assert net.inboxes["client"] == []
    assert gw.dropped_fragments == 1


def test_client_decrypt_restores_packet(gw_net):
    net, gw = gw_net
    dec = ClientDecryptor(PSK, "gateway")
    net.send(Endpoint("camera", 6970), Endpoint("client", 5000), b"frame")
    net.step(10)
    sealed = net.inboxes["client"][0]
    assert dec.matches(sealed)
    assert dec.client_decrypt(sealed).payload == b"frame"
    bad = rewrite(sealed, payload=sealed.payload[:-1] + bytes([sealed.payload[-1] ^ 1]))
    assert dec.client_decrypt(bad) is None
    assert (dec.decrypted, dec.auth_failures) == (1, 1)


def test_non_gateway_udp_bypasses_decryptor():
    dec = ClientDecryptor(PSK, "gateway")
    assert not dec.matches(pkt(src="other"))
    assert not dec.matches(pkt(src="gateway", transport=Transport.TCP))


def test_disabled_gateway_forwards_everything():
    net = Network()
    net.register_node("camera")
    gw = Gateway(net, "gateway", "camera", PSK, enabled=False)
    net.register_node("gateway", gw)
    net.register_node("client")
    net.route_via("camera", "gateway")
    net.send(Endpoint("camera", 6970), Endpoint("client", 5000), b"plain")
    net.step(10)
    assert net.inboxes["client"][0].payload == b"plain"
    assert gw.counters() == {"intercepted": 0, "sealed": 0, "dropped_fragments": 0, "forwarded": 1}
