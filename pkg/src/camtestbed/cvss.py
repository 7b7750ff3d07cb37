"""CVSS v3.1 base score calculator."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

from .errors import DuplicateMetric, MalformedVector, MissingMetric

METRIC_ORDER = ("AV", "AC", "PR", "UI", "S", "C", "I", "A")

ALLOWED = {
    "AV": ("N", "A", "L", "P"),
    "AC": ("L", "H"),
    "PR": ("N", "L", "H"),
    "UI": ("N", "R"),
    "S": ("U", "C"),
    "C": ("N", "L", "H"),
    "I": ("N", "L", "H"),
    "A": ("N", "L", "H"),
}

AV = {"N": 0.85, "A": 0.62, "L": 0.55, "P": 0.2}
AC = {"L": 0.77, "H": 0.44}
PR = {"U": {"N": 0.85, "L": 0.62, "H": 0.27}, "C": {"N": 0.85, "L": 0.68, "H": 0.5}}
UI = {"N": 0.85, "R": 0.62}
CIA = {"N": 0.0, "L": 0.22, "H": 0.56}


@dataclass(frozen=True)
class CvssVector:
    AV: str
    AC: str
    PR: str
    UI: str
    S: str
    C: str
    I: str  # noqa: E741
    A: str

    def __post_init__(self):
        for metric in METRIC_ORDER:
            value = getattr(self, metric)
            if value not in ALLOWED[metric]:
                raise MalformedVector(f"{metric}:{value} is not a valid value")

    def __str__(self) -> str:
        return "CVSS:3.1/" + "/".join(f"{m}:{getattr(self, m)}" for m in METRIC_ORDER)


@dataclass(frozen=True)
class Score:
    value: float
    severity: str

    def __str__(self) -> str:
        return f"{self.value:.1f} {self.severity}"


def parse_vector(s: str) -> CvssVector:
    """Parse ``CVSS:3.1/AV:N/...``; the prefix is optional and metric order is free."""
    parts = s.strip().split("/")
    if parts and parts[0].startswith("CVSS:"):
        if parts[0] != "CVSS:3.1":
            raise MalformedVector(f"unsupported version {parts[0]!r}")
        parts = parts[1:]
    metrics: dict[str, str] = {}
    for part in parts:
        name, sep, value = part.partition(":")
        if not sep or name not in ALLOWED:
            raise MalformedVector(f"unknown component {part!r}")
        if name in metrics:
            raise DuplicateMetric(name)
        if value not in ALLOWED[name]:
            raise MalformedVector(f"{name}:{value} is not a valid value")
        metrics[name] = value
    missing = [m for m in METRIC_ORDER if m not in metrics]
    if missing:
        raise MissingMetric(", ".join(missing))
    return CvssVector(**metrics)


def roundup(value: float) -> float:
    """Smallest one-decimal number >= value, immune to binary float noise."""
    as_int = round(value * 100_000)
    if as_int % 10_000 == 0:
        return as_int / 100_000.0
    return (math.floor(as_int / 10_000) + 1) / 10.0


def severity(value: float) -> str:
    if value == 0.0:
        return "None"
    if value < 4.0:
        return "Low"
    if value < 7.0:
        return "Medium"
    if value < 9.0:
        return "High"
    return "Critical"


def subscores(v: CvssVector) -> tuple[float, float]:
    """(impact, exploitability) before rounding."""
    iss = 1 - (1 - CIA[v.C]) * (1 - CIA[v.I]) * (1 - CIA[v.A])
    if v.S == "U":
        impact = 6.42 * iss
    else:
        impact = 7.52 * (iss - 0.029) - 3.25 * (iss - 0.02) ** 15
    exploitability = 8.22 * AV[v.AV] * AC[v.AC] * PR[v.S][v.PR] * UI[v.UI]
    return impact, exploitability


def base_score(v: CvssVector) -> Score:
    impact, exploitability = subscores(v)
    if impact <= 0:
        value = 0.0
    elif v.S == "U":
        value = roundup(min(impact + exploitability, 10))
    else:
        value = roundup(min(1.08 * (impact + exploitability), 10))
    return Score(value, severity(value))


def all_vectors(**fixed: str):
    """Every valid vector, optionally with some metrics pinned."""
    choices = [(fixed[m],) if m in fixed else ALLOWED[m] for m in METRIC_ORDER]
    for combo in itertools.product(*choices):
        yield CvssVector(*combo)


def vectors_with_score(target: float, **fixed: str) -> list[CvssVector]:
    return [v for v in all_vectors(**fixed) if base_score(v).value == target]


# Reconstructed vectors for the three findings; only the scores were published.
DOS_VECTOR = "CVSS:3.1/AV:A/AC:L/PR:N/UI:N/S:U/C:N/I:N/A:H"
EAVESDROP_VECTOR = "CVSS:3.1/AV:A/AC:L/PR:N/UI:N/S:U/C:H/I:N/A:N"
MOTION_ORACLE_VECTOR = "CVSS:3.1/AV:A/AC:L/PR:N/UI:N/S:U/C:L/I:N/A:L"
FINDINGS = {
    "dos": DOS_VECTOR,
    "eavesdropping": EAVESDROP_VECTOR,
    "motion-oracle": MOTION_ORACLE_VECTOR,
}
REPORTED_MEAN = 6.14


def findings_table() -> dict:
    rows = {name: base_score(parse_vector(vec)) for name, vec in FINDINGS.items()}
    mean = sum(s.value for s in rows.values()) / len(rows)
    return {
        "findings": {
            name: {"vector": FINDINGS[name], "score": s.value, "severity": s.severity}
            for name, s in rows.items()
        },
        "mean": round(mean, 4),
        "mean_1dp": round(mean, 1),
        "reported_mean": REPORTED_MEAN,
    }
