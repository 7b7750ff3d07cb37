"""Deterministic security testbed for a consumer IP camera.

Emulates the camera's control, proprietary streaming, RTSP/ONVIF and motion
notification planes on a simulated network, the attacks against them, an
encrypting gateway countermeasure, and a CVSS v3.1 calculator.
"""
from .capture import CaptureFile, CaptureRecord
from .netsim import Channel, Endpoint, Network, Packet, Transport

__all__ = [
    "CaptureFile",
    "CaptureRecord",
    "Channel",
    "Endpoint",
    "Network",
    "Packet",
    "Transport",
]

__version__ = "0.1.0"
