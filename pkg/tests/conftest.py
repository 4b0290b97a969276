import pytest

from geoveil.model import Crs, GeoPoint, Owner, Report
from geoveil.place import Fingerprint


def planar(x, y, owner=Owner.OTHER, **kw):
    return Report(kw.pop("ap_id", "ap"), GeoPoint(float(x), float(y), Crs.PLANAR), owner=owner, **kw)


def geo(lat, lon, owner=Owner.OTHER, **kw):
    return Report(kw.pop("ap_id", "ap"), GeoPoint.latlon(lat, lon), owner=owner, **kw)


@pytest.fixture
def collinear3():
    return [planar(0, 0), planar(100, 0), planar(200, 0)]


HOME = frozenset({"A1", "A2", "A3"})
OFFICE = frozenset({"B1", "B2", "B3", "B4"})


def two_stay_trace():
    """2 h at A, a 30 min commute past changing APs, 2 h at B; one scan every 10 min."""
    scans = [Fingerprint(HOME, t) for t in range(0, 7201, 600)]
    t0 = 7800
    scans += [Fingerprint(frozenset({f"street{i}", f"bus{i}"}), t0 + 600 * i) for i in range(3)]
    t1 = t0 + 1800
    scans += [Fingerprint(OFFICE, t1 + t) for t in range(0, 7201, 600)]
    return scans


def pytest_terminal_summary(terminalreporter):
    from tests import acceptance_log

    if acceptance_log.LINES:
        terminalreporter.section("acceptance criteria")
        for line in acceptance_log.LINES:
            terminalreporter.write_line(line)
