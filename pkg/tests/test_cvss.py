import itertools
import math
from fractions import Fraction as F

import pytest
from hypothesis import given
from hypothesis import strategies as st

from camtestbed import cvss
from camtestbed.errors import DuplicateMetric, MalformedVector, MissingMetric

# Exact-rational reference calculator, written from the v3.1 formulas.
W = {
    "AV": {"N": F("0.85"), "A": F("0.62"), "L": F("0.55"), "P": F("0.2")},
    "AC": {"L": F("0.77"), "H": F("0.44")},
    "UI": {"N": F("0.85"), "R": F("0.62")},
    "CIA": {"N": F(0), "L": F("0.22"), "H": F("0.56")},
}
PR_U = {"N": F("0.85"), "L": F("0.62"), "H": F("0.27")}
PR_C = {"N": F("0.85"), "L": F("0.68"), "H": F("0.5")}


def exact_roundup(x: F) -> F:
    return F(math.ceil(x * 10), 10)


def oracle(av, ac, pr, ui, s, c, i, a) -> float:
    iss = 1 - (1 - W["CIA"][c]) * (1 - W["CIA"][i]) * (1 - W["CIA"][a])
    if s == "U":
        impact = F("6.42") * iss
    else:
        impact = F("7.52") * (iss - F("0.029")) - F("3.25") * (iss - F("0.02")) ** 15
    expl = F("8.22") * W["AV"][av] * W["AC"][ac] * (PR_U if s == "U" else PR_C)[pr] * W["UI"][ui]
    if impact <= 0:
        return 0.0
    total = impact + expl if s == "U" else F("1.08") * (impact + expl)
    return float(exact_roundup(min(total, F(10))))


ALL = list(itertools.product(*(cvss.ALLOWED[m] for m in cvss.METRIC_ORDER)))


def test_every_vector_matches_exact_oracle():
    mismatches = [combo for combo in ALL if cvss.base_score(cvss.CvssVector(*combo)).value != oracle(*combo)]
    assert len(ALL) == 2592
    assert mismatches == []


@pytest.mark.parametrize("vector, value, sev", [
    (cvss.DOS_VECTOR, 6.5, "Medium"),
    (cvss.EAVESDROP_VECTOR, 6.5, "Medium"),
    (cvss.MOTION_ORACLE_VECTOR, 5.4, "Medium"),
    ("CVSS:3.1/AV:N/AC:L/PR:N/UI:N/S:U/C:H/I:H/A:H", 9.8, "Critical"),
    ("CVSS:3.1/AV:N/AC:L/PR:N/UI:N/S:U/C:N/I:N/A:N", 0.0, "None"),
    ("CVSS:3.1/AV:N/AC:L/PR:N/UI:N/S:C/C:H/I:H/A:H", 10.0, "Critical"),
    ("CVSS:3.1/AV:P/AC:H/PR:H/UI:R/S:U/C:L/I:N/A:N", 1.6, "Low"),
])
def test_known_scores(vector, value, sev):
    score = cvss.base_score(cvss.parse_vector(vector))
    assert (score.value, score.severity) == (value, sev)


def test_roundup_float_noise():
    assert cvss.roundup(4.000000000000001) == 4.0
    assert cvss.roundup(4.02) == 4.1
    assert cvss.roundup(4.0) == 4.0


@pytest.mark.parametrize("text, exc", [
    ("CVSS:3.1/AV:X/AC:L/PR:N/UI:N/S:U/C:N/I:N/A:H", MalformedVector),
    ("CVSS:3.0/AV:A/AC:L/PR:N/UI:N/S:U/C:N/I:N/A:H", MalformedVector),
    ("CVSS:3.1/AV:A/AC:L/PR:N/UI:N/S:U/C:N/I:N", MissingMetric),
    ("CVSS:3.1/AV:A/AV:A/AC:L/PR:N/UI:N/S:U/C:N/I:N/A:H", DuplicateMetric),
    ("CVSS:3.1/AV:A/AC:L/PR:N/UI:N/S:U/C:N/I:N/A:H/E:X", MalformedVector),
    ("garbage", MalformedVector),
])
def test_parse_errors(text, exc):
    with pytest.raises(exc):
        cvss.parse_vector(text)


def test_parse_accepts_any_order_and_no_prefix():
    v = cvss.parse_vector("A:H/I:N/C:N/S:U/UI:N/PR:N/AC:L/AV:A")
    assert str(v) == cvss.DOS_VECTOR


@given(st.sampled_from(ALL))
def test_roundtrip_through_text(combo):
    v = cvss.CvssVector(*combo)
    assert cvss.parse_vector(str(v)) == v


RANK = {"C": "NLH", "I": "NLH", "A": "NLH"}


@given(st.sampled_from(ALL), st.sampled_from(["C", "I", "A"]))
def test_raising_impact_never_lowers_score(combo, metric):
    v = dict(zip(cvss.METRIC_ORDER, combo))
    order = RANK[metric]
    if v[metric] == "H":
        return
    higher = dict(v, **{metric: order[order.index(v[metric]) + 1]})
    assert cvss.base_score(cvss.CvssVector(**higher)).value >= cvss.base_score(cvss.CvssVector(**v)).value


@pytest.mark.parametrize("value, sev", [(0.0, "None"), (0.1, "Low"), (3.9, "Low"), (4.0, "Medium"),
                                        (6.9, "Medium"), (7.0, "High"), (8.9, "High"), (9.0, "Critical")])
def test_severity_bands(value, sev):
    assert cvss.severity(value) == sev


@pytest.mark.parametrize("target", [5.4, 6.5])
def test_enumeration_matches_oracle(target):
    got = {str(v) for v in cvss.vectors_with_score(target, AV="A")}
    want = {str(cvss.CvssVector(*c)) for c in ALL if c[0] == "A" and oracle(*c) == target}
    assert got == want and got
    finding = cvss.MOTION_ORACLE_VECTOR if target == 5.4 else cvss.DOS_VECTOR
    assert finding in got


def test_findings_mean():
    table = cvss.findings_table()
    assert table["mean"] == pytest.approx((6.5 + 6.5 + 5.4) / 3, abs=1e-4)
    assert table["mean_1dp"] == 6.1
    assert table["reported_mean"] == 6.14
