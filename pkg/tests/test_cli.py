import json

import pytest

from geoveil.cli import main
from geoveil.model import load_reports, save_reports
from geoveil.place import Fingerprint, load_profile, save_scans

from .conftest import planar, two_stay_trace


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def parse_kv(out):
    return dict(line.split(" ", 1) for line in out.strip().splitlines())


def test_metrics_collinear(tmp_path, capsys, collinear3):
    save_reports(collinear3, tmp_path / "r.jsonl")
    code, out, _ = run(capsys, "metrics", "--input", tmp_path / "r.jsonl", "--dmax", 500)
    assert code == 0
    assert parse_kv(out) == {"n": "3", "coverage": "0.400000", "uniformity": "0.888889", "exposure": "0.644444"}


def test_metrics_single_report(tmp_path, capsys):
    save_reports([planar(3, 3)], tmp_path / "r.jsonl")
    code, out, _ = run(capsys, "metrics", "--input", tmp_path / "r.jsonl")
    assert code == 0 and parse_kv(out)["exposure"] == "1.000000"


def test_metrics_missing_file(tmp_path, capsys):
    code, _, err = run(capsys, "metrics", "--input", tmp_path / "nope.jsonl")
    assert code == 2 and "nope.jsonl" in err


def test_metrics_empty_file(tmp_path, capsys):
    (tmp_path / "e.jsonl").write_text("")
    code, _, err = run(capsys, "metrics", "--input", tmp_path / "e.jsonl")
    assert code == 2 and "metrics undefined for empty report set" in err


def test_metrics_malformed_file(tmp_path, capsys):
    (tmp_path / "bad.jsonl").write_text('{"ap_id": "a", "timestamp": 0}\n')
    code, _, err = run(capsys, "metrics", "--input", tmp_path / "bad.jsonl")
    assert code == 2 and ":1" in err


def test_metrics_geo_file_uses_haversine(tmp_path, capsys):
    lines = [{"ap_id": "a", "lat": 0, "lon": 0, "timestamp": 0}, {"ap_id": "b", "lat": 0, "lon": 0.1, "timestamp": 1}]
    (tmp_path / "g.jsonl").write_text("".join(json.dumps(l) + "\n" for l in lines))
    code, out, _ = run(capsys, "metrics", "--input", tmp_path / "g.jsonl", "--profile", "deploy")
    assert code == 0
    assert float(parse_kv(out)["coverage"]) == pytest.approx(11119.49 / 50_000, abs=1e-6)
    code, _, _ = run(capsys, "metrics", "--input", tmp_path / "g.jsonl", "--distance", "planar")
    assert code == 2


def test_gen_writes_reports(tmp_path, capsys):
    code, _, _ = run(capsys, "gen", "--pattern", "beta:5:30", "--n", 25, "--seed", 3, "--output", tmp_path / "g.jsonl")
    assert code == 0
    pool = load_reports(tmp_path / "g.jsonl")
    assert len(pool) == 25 and len(pool.mine) == 25
    run(capsys, "gen", "--pattern", "beta:5:30", "--n", 25, "--seed", 3, "--output", tmp_path / "h.jsonl")
    assert (tmp_path / "g.jsonl").read_bytes() == (tmp_path / "h.jsonl").read_bytes()


def test_bad_flags_exit_2(tmp_path, capsys):
    out = tmp_path / "x.csv"
    assert run(capsys, "sim-anonymity", "--k", 0, "--output", out)[0] == 2
    assert run(capsys, "sim-anonymity", "--runs", 0, "--output", out)[0] == 2
    assert run(capsys, "sim-anonymity", "--pattern", "gauss", "--output", out)[0] == 2
    assert run(capsys, "place-replay", "--input", out, "--delta", 1.5)[0] == 2
    assert run(capsys, "gen", "--n", 3)[0] == 2  # --output missing
    assert not out.exists()


def test_sim_anonymity_default_row_count(tmp_path, capsys):
    code, _, _ = run(capsys, "sim-anonymity", "--runs", 1, "--seed", 7, "--output", tmp_path / "a.csv")
    assert code == 0
    lines = (tmp_path / "a.csv").read_text().splitlines()
    assert lines[0].startswith("# seed=7 runs=1 k=10 d_max=500.0")
    assert lines[1] == "pattern,algorithm,step,n,coverage,uniformity,exposure"
    assert len(lines) - 2 == 3 * 100


def test_sim_anonymity_is_byte_identical(tmp_path, capsys):
    args = ["sim-anonymity", "--runs", 1, "--seed", 7, "--n", 10, "--omega", 200]
    run(capsys, *args, "--output", tmp_path / "a.csv")
    run(capsys, *args, "--output", tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_seed_env_overrides_flag(tmp_path, capsys, monkeypatch):
    args = ["sim-anonymity", "--runs", 1, "--n", 5, "--omega", 50]
    run(capsys, *args, "--seed", 11, "--output", tmp_path / "a.csv")
    monkeypatch.setenv("GEOVEIL_SEED", "11")
    run(capsys, *args, "--seed", 99, "--output", tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    monkeypatch.setenv("GEOVEIL_SEED", "eleven")
    assert run(capsys, *args, "--output", tmp_path / "c.csv")[0] == 2


def test_sim_metric_study(tmp_path, capsys):
    code, _, _ = run(
        capsys, "sim-metric-study", "--n", 40, "--step", 20, "--runs", 2, "--pattern", "uniform",
        "--pattern", "beta:2:30", "--output", tmp_path / "m.csv",
    )
    assert code == 0
    lines = (tmp_path / "m.csv").read_text().splitlines()
    assert lines[1] == "pattern,n,coverage,uniformity,exposure" and len(lines) == 2 + 4
    assert lines[4].startswith('"BD(2,30)",20,')


# --- place replay -------------------------------------------------------------


def test_place_replay_two_stays(tmp_path, capsys):
    save_scans(two_stay_trace(), tmp_path / "s.jsonl")
    code, out, _ = run(capsys, "place-replay", "--input", tmp_path / "s.jsonl", "--output", tmp_path / "p.json")
    assert code == 0
    kv = parse_kv(out)
    assert kv["places_learned"] == "2"
    # scans after each promotion at t=4200 are detected: 5 at A, 5 at B
    assert kv["suppressed"] == "10"
    assert len(load_profile(tmp_path / "p.json").places) == 2


def test_place_replay_empty_and_short(tmp_path, capsys):
    (tmp_path / "e.jsonl").write_text("")
    assert parse_kv(run(capsys, "place-replay", "--input", tmp_path / "e.jsonl")[1])["places_learned"] == "0"
    save_scans([Fingerprint(frozenset("abc"), t) for t in range(0, 1801, 600)], tmp_path / "short.jsonl")
    assert parse_kv(run(capsys, "place-replay", "--input", tmp_path / "short.jsonl")[1])["places_learned"] == "0"


def test_place_replay_out_of_order(tmp_path, capsys):
    save_scans([Fingerprint(frozenset("a"), 10), Fingerprint(frozenset("a"), 5)], tmp_path / "s.jsonl")
    assert run(capsys, "place-replay", "--input", tmp_path / "s.jsonl")[0] == 2


# --- anonymize ------------------------------------------------------------------


def test_anonymize_end_to_end(tmp_path, capsys):
    pool = [planar(x, y) for x, y in [(0, 0), (200, 0), (-200, 50), (0, -220), (100, 180), (-150, -150)]]
    save_reports(pool, tmp_path / "pool.jsonl")
    home = {"h1", "h2", "h3"}
    outgoing = [planar(5, 5, ambient_aps=home, timestamp=t) for t in range(0, 7201, 2400)]
    outgoing += [planar(80, 40, ambient_aps={"cafe"}, timestamp=9000)]
    save_reports(outgoing, tmp_path / "out.jsonl")
    (tmp_path / "poi.csv").write_text("name,x,y\nmall,0,0\npark,100,50\n")
    code, out, _ = run(
        capsys, "anonymize", "--input", tmp_path / "out.jsonl", "--pool", tmp_path / "pool.jsonl",
        "--poi", tmp_path / "poi.csv", "--k", 3, "--output", tmp_path / "t.jsonl", "--places-out", tmp_path / "p.json",
    )
    assert code == 0
    kv = parse_kv(out)
    # home learned at t=4800 (span > 3600), so the t=7200 report is suppressed
    assert kv == {"submitted": "4", "suppressed": "1", "reports_sent": "12"}
    recs = [json.loads(l) for l in (tmp_path / "t.jsonl").read_text().splitlines()]
    assert [r["decision"] for r in recs] == ["submit", "submit", "submit", "suppressed", "submit"]
    assert (recs[-1]["members"][0]["x"], recs[-1]["members"][0]["y"]) == (100.0, 50.0)
    assert load_profile(tmp_path / "p.json").places == (frozenset(home),)


def test_anonymize_without_poi_needs_override(tmp_path, capsys):
    save_reports([planar(0, 0)], tmp_path / "pool.jsonl")
    save_reports([planar(1, 1)], tmp_path / "out.jsonl")
    args = ["anonymize", "--input", tmp_path / "out.jsonl", "--pool", tmp_path / "pool.jsonl", "--output", tmp_path / "t.jsonl"]
    assert run(capsys, *args)[0] == 2
    assert run(capsys, *args, "--allow-raw-location", "--kind", "query")[0] == 0
