"""Exception hierarchy shared by every testbed component."""


class TestbedError(Exception):
    """Base class for all testbed errors."""

    # keep pytest from trying to collect this as a test class
    __test__ = False


# netsim
class DuplicateNode(TestbedError):
    pass


class UnknownNode(TestbedError):
    pass


class UnknownLocation(TestbedError):
    pass


class ClockRegression(TestbedError):
    pass


class HookConflict(TestbedError):
    pass


# camera / peers
class AuthFailed(TestbedError):
    pass


class Unavailable(TestbedError):
    pass


class InvalidStok(TestbedError):
    pass


class SessionExists(TestbedError):
    pass


class BadResponse(TestbedError):
    pass


class WrongState(TestbedError):
    pass


class BadPath(TestbedError):
    pass


class RtspError(TestbedError):
    """An RTSP request was refused; ``code`` is the RTSP status code."""

    def __init__(self, code: int, reason: str):
        super().__init__(f"{code} {reason}")
        self.code = code
        self.reason = reason


class MalformedUri(TestbedError):
    pass


class UnknownAccount(TestbedError):
    pass


# attacker
class BadBinWidth(TestbedError):
    pass


# cvss
class MalformedVector(TestbedError):
    pass


class MissingMetric(MalformedVector):
    pass


class DuplicateMetric(MalformedVector):
    pass


# scenarios
class ConfigError(TestbedError):
    """Invalid scenario configuration; ``path`` names the offending field."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path
