import pytest

from camtestbed.camera import Camera, Credentials
from camtestbed.netsim import Network
from camtestbed.peers import AppClient, CloudStub, ThirdPartyClient

OWNER = Credentials("owner@example.com", "hunter2")
CAM_ADDR = "10.0.0.7"


class Bed:
    """Small hand-wired testbed: camera, cloud, app and optionally a player."""

    def __init__(self, seed=1, uri=None, **camera_kw):
        self.net = Network()
        self.cloud = CloudStub(self.net, "cloud", seed=seed)
        self.camera = Camera(self.net, "camera", OWNER, address=CAM_ADDR,
                             cloud=self.cloud.endpoint, seed=seed, **camera_kw)
        self.app = AppClient(self.net, "app", OWNER, self.camera.endpoint(443),
                             cloud=self.cloud.endpoint, seed=seed)
        self.net.register_node("camera", self.camera, address=CAM_ADDR)
        self.net.register_node("cloud", self.cloud)
        self.net.register_node("app", self.app)
        self.cloud.bind_camera("camera", OWNER.user)
        self.client = None
        if uri is not None:
            self.client = ThirdPartyClient(self.net, "client", uri)
            self.net.register_node("client", self.client)

    def add_third_party_user(self, user="cam", password="pw"):
        self.camera.third_party_users[user] = password

    def run(self, ms):
        return self.net.step(self.net.now + ms)


@pytest.fixture
def bed():
    return Bed()


@pytest.fixture
def make_bed():
    return Bed
