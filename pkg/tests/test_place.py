import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from geoveil.model import ReportSchemaError, UsageError
from geoveil.place import (
    Fingerprint,
    PlaceConfig,
    PlaceProfile,
    Verdict,
    is_private,
    iter_scans,
    load_profile,
    observe_scan,
    replay,
    save_profile,
    save_scans,
    similarity,
)

CFG = PlaceConfig(delta=0.2, delta_l_seconds=3600)


def fp(s, t=0.0):
    return Fingerprint(frozenset(s), t)


def stay(bssids, start, end, every=600):
    return [fp(bssids, t) for t in range(start, end + 1, every)]


def test_similarity_examples():
    assert similarity("abcd", "abe") == 0.5
    assert similarity("ab", "ab") == 1.0
    assert similarity("ab", "cd") == 0.0
    with pytest.raises(UsageError):
        similarity("", "abc")


def test_similarity_normalizes_by_stored_fingerprint():
    assert similarity("a", "abcdefghij") == 1.0


def test_constant_two_hour_stay_learns_one_place():
    profile = PlaceProfile()
    verdicts = {}
    for scan in stay("abc", 0, 7200):
        profile, verdicts[scan.timestamp] = observe_scan(profile, scan, CFG)
        if scan.timestamp <= 3600:
            assert profile.places == ()
    assert profile.places == (frozenset("abc"),)
    # learned on the 4200 s scan (span 4200 > 3600), detected from then on
    assert verdicts[4200] is Verdict.NOT_PRIVATE
    assert all(verdicts[t] is Verdict.IN_PRIVATE_PLACE for t in range(4800, 7201, 600))


def test_span_equal_to_threshold_does_not_promote():
    profile = PlaceProfile()
    for scan in stay("abc", 0, 3600):
        profile, _ = observe_scan(profile, scan, CFG)
    assert profile.places == ()
    assert profile.candidate == frozenset("abc")


def test_candidate_narrows_by_intersection():
    p = PlaceProfile(candidate=frozenset("abcd"), candidate_start=0.0)
    p, v = observe_scan(p, fp("abe", 60), CFG)
    assert p.candidate == frozenset("ab")
    assert p.candidate_start == 0.0
    assert v is Verdict.NOT_PRIVATE


def test_mismatch_restarts_candidate():
    p = PlaceProfile(candidate=frozenset("ab"), candidate_start=0.0)
    p, _ = observe_scan(p, fp("cd", 600), CFG)
    assert p.candidate == frozenset("cd")
    assert p.candidate_start == 600


def test_is_private_examples():
    p = PlaceProfile(places=(frozenset("abcde"),))
    assert is_private(p, fp("a"), CFG)
    assert not is_private(PlaceProfile(), fp("abc"), CFG)
    assert not is_private(PlaceProfile(places=(frozenset("ab"),)), fp("c"), CFG)


def test_detection_does_not_touch_places():
    p = PlaceProfile(places=(frozenset("abc"),), candidate=frozenset("xy"), candidate_start=0.0)
    q, v = observe_scan(p, fp("ab", 10), CFG)
    assert v is Verdict.IN_PRIVATE_PLACE
    assert q.places == p.places and q.candidate == p.candidate


def test_out_of_order_scan_rejected():
    p, _ = observe_scan(PlaceProfile(), fp("a", 100), CFG)
    with pytest.raises(UsageError):
        observe_scan(p, fp("a", 50), CFG)


def test_empty_scan_rejected():
    with pytest.raises(UsageError):
        observe_scan(PlaceProfile(), fp("", 0), CFG)


def test_delta_zero_matches_anything_but_drops_empty_intersection():
    cfg = PlaceConfig(0.0, 3600)
    p = PlaceProfile(candidate=frozenset("ab"), candidate_start=0.0)
    p, _ = observe_scan(p, fp("cd", 10), cfg)
    assert p.candidate == frozenset("cd") and p.candidate_start == 10
    assert is_private(PlaceProfile(places=(frozenset("ab"),)), fp("zz"), cfg)


def test_delta_one_requires_superset():
    cfg = PlaceConfig(1.0, 3600)
    prof = PlaceProfile(places=(frozenset("ab"),))
    assert is_private(prof, fp("abz"), cfg)
    assert not is_private(prof, fp("az"), cfg)


def test_config_validation():
    with pytest.raises(UsageError):
        PlaceConfig(1.5, 10)
    with pytest.raises(UsageError):
        PlaceConfig(0.2, 0)


def test_profile_invariants():
    with pytest.raises(UsageError):
        PlaceProfile(places=(frozenset(),))
    with pytest.raises(UsageError):
        PlaceProfile(candidate=frozenset(), candidate_start=0.0)


def test_profile_file_round_trip(tmp_path):
    prof = PlaceProfile(places=(frozenset("abc"), frozenset({"x:y"})))
    save_profile(prof, tmp_path / "p.json")
    assert json.loads((tmp_path / "p.json").read_text()) == {"places": [["a", "b", "c"], ["x:y"]]}
    assert load_profile(tmp_path / "p.json") == prof


def test_bad_profile_file(tmp_path):
    (tmp_path / "p.json").write_text('{"places": [[]]}')
    with pytest.raises(ReportSchemaError):
        load_profile(tmp_path / "p.json")


def test_scan_file_round_trip(tmp_path):
    scans = stay("abc", 0, 1800)
    save_scans(scans, tmp_path / "s.jsonl")
    assert list(iter_scans(tmp_path / "s.jsonl")) == scans


scans_strategy = st.lists(
    st.tuples(st.integers(0, 900), st.frozensets(st.sampled_from("abcdefgh"), min_size=1)),
    max_size=40,
)


def _trace(steps):
    t = 0
    out = []
    for dt, bssids in steps:
        t += dt
        out.append(Fingerprint(bssids, float(t)))
    return out


@settings(max_examples=200, deadline=None)
@given(scans_strategy, st.floats(0, 1), st.integers(1, 3000))
def test_learning_invariants(steps, delta, delta_l):
    cfg = PlaceConfig(delta, delta_l)
    trace = _trace(steps)
    profile = PlaceProfile()
    for scan in trace:
        prev = profile
        profile, verdict = observe_scan(profile, scan, cfg)
        # learned places only ever grow by appending
        assert profile.places[: len(prev.places)] == prev.places
        if verdict is Verdict.IN_PRIVATE_PLACE:
            assert profile.places == prev.places and profile.candidate == prev.candidate
        elif (
            prev.candidate is not None
            and similarity(prev.candidate, scan.bssids) >= delta
            and prev.candidate & scan.bssids
            and profile.candidate is not None
        ):
            # continued match: the candidate only shrinks and keeps its start time
            assert profile.candidate == prev.candidate & scan.bssids <= prev.candidate
            assert profile.candidate_start == prev.candidate_start
        if len(profile.places) > len(prev.places):
            assert scan.timestamp - prev.candidate_start > delta_l
        for p in profile.places:
            assert p
    assert replay(trace, cfg).profile == profile
