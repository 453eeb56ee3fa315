import json
import os
import pathlib

import pytest

import andlantis

FIXTURES = pathlib.Path(os.environ.get("ANDLANTIS_FIXTURE_DIR", pathlib.Path(__file__).parents[2] / "fixtures"))


def test_theoretical_anchors():
    assert andlantis.theoretical_runtime(1261, 188, 3, 300) == pytest.approx(670.7, abs=0.5)
    assert andlantis.theoretical_runtime(1261, 188, 3, 520) == pytest.approx(1162.6, abs=0.5)
    assert andlantis.wave_bound(1261, 564, 520) == 3 * 520


def test_simulate_single_job():
    r = andlantis.simulate_run(n_nodes=1, n_jobs=1, per_job_comm_s=0, wait_jitter_s=0, ip_fail_prob=0)
    assert r["wall_time_s"] == 520.0
    assert r["jobs_done"] == 1


def test_sweep_and_csv():
    rows = andlantis.sweep([10, 20], n_jobs=60, per_job_comm_s=0, wait_jitter_s=0, ip_fail_prob=0)
    assert [r["n_nodes"] for r in rows] == [10, 20]
    assert andlantis.speedup(rows, 10) == [(10, 10.0), (20, 20.0)]
    csv = andlantis.sweep_csv(rows, 10).splitlines()
    assert csv[0] == "n_nodes,wall_time_s,comm_time_s,comm_fraction,jobs_done,jobs_failed,speedup,ideal_speedup"
    assert len(csv) == 3


def test_ready_queue():
    stats = [
        {"node": 3, "ram_free_mb": 4096, "load_avg": 0.0, "active_vms": 0},
        {"node": 1, "ram_free_mb": 4096, "load_avg": 0.0, "active_vms": 3},
        {"node": 2, "ram_free_mb": 512, "load_avg": 0.0, "active_vms": 0},
    ]
    assert andlantis.build_ready_queue(stats) == [3]


def test_explore_and_replay():
    graph = (FIXTURES / "ui" / "crash.ui.json").read_text()
    record = andlantis.explore(graph, 50)
    doc = json.loads(record)
    assert doc["crash"] is True
    assert andlantis.replay(graph, record)[-1] == "crash"
    assert json.loads(andlantis.explore(graph, 0))["steps"] == []


def test_digests_and_classify():
    assert andlantis.digests(b"")["md5"] == "d41d8cd98f00b204e9800998ecf8427e"
    assert andlantis.classify(b"PK\x03\x04abc") == "zip/apk"
    assert andlantis.classify(b"") == "binary"


def test_diff_dirs(tmp_path):
    (tmp_path / "a").mkdir()
    (tmp_path / "b").mkdir()
    (tmp_path / "b" / "new.txt").write_text("hello")
    doc = json.loads(andlantis.diff_dirs(str(tmp_path / "a"), str(tmp_path / "b")))
    assert [c["path"] for c in doc["created"]] == ["/new.txt"]
    assert doc["created"][0]["type_tag"] == "text"
    with pytest.raises(ValueError):
        andlantis.diff_dirs(str(tmp_path / "missing"), str(tmp_path / "b"))


def test_run(tmp_path):
    out = tmp_path / "run"
    m = andlantis.run(str(FIXTURES / "configs" / "malware.json"), str(out))
    assert m["jobs_done"] + m["jobs_failed"] == 4
    assert (out / "manifest.json").is_file()
    assert (out / "transitions.ndjson").is_file()
    first = (out / "reports" / "job-00001.json").read_text()
    andlantis.run(str(FIXTURES / "configs" / "malware.json"), str(out))
    assert (out / "reports" / "job-00001.json").read_text() == first


def test_bad_config(tmp_path):
    cfg = tmp_path / "bad.json"
    cfg.write_text('{"cluster": {"n_nodez": 3}}')
    with pytest.raises(ValueError, match="cluster.n_nodez"):
        andlantis.run(str(cfg), str(tmp_path / "out"))
