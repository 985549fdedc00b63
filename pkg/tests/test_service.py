import json
import threading
import urllib.error
import urllib.request

import pytest

from scriptorium.data import LineRecord, Manifest, load_manifest, write_manifest
from scriptorium.service import ServiceConfig, load_config, make_server
from scriptorium.synth import render_line, save_png
from scriptorium.textcore import Alphabet


@pytest.fixture
def workspace(tmp_path):
    (tmp_path / "images").mkdir()
    line_records, char_records = [], []
    for i, text in enumerate(["ab", "ba", "aa"]):
        rel = f"images/line-{i}.png"
        save_png(render_line(text, style_seed=i), tmp_path / rel)
        line_records.append(LineRecord(id=f"line-{i}", image_path=rel, transcription=text))
    for i, char in enumerate(["a", "b"]):
        rel = f"images/char-{i}.png"
        save_png(render_line(char, style_seed=10 + i), tmp_path / rel)
        char_records.append(LineRecord(id=f"char-{i}", image_path=rel, transcription=char))
    write_manifest(Manifest(records=line_records), tmp_path / "lines.jsonl")
    write_manifest(Manifest(records=char_records), tmp_path / "chars.jsonl")
    Alphabet(("a", "b")).save(tmp_path / "alphabet.txt")
    config = {
        "host": "127.0.0.1", "port": 0, "store": "annotations.jsonl",
        "tasks": {"line_typing": "lines.jsonl", "char_labeling": "chars.jsonl"},
        "alphabet": "alphabet.txt",
    }
    (tmp_path / "service.json").write_text(json.dumps(config), encoding="utf-8")
    return tmp_path


@pytest.fixture
def server(workspace):
    config = load_config(workspace / "service.json")
    httpd, service = make_server(config)
    thread = threading.Thread(target=httpd.serve_forever, daemon=True)
    thread.start()
    base = f"http://127.0.0.1:{httpd.server_address[1]}"
    yield base, workspace, config
    httpd.shutdown()
    service.close()
    thread.join(timeout=5)


def call(base, method, path, body=None):
    data = json.dumps(body).encode() if body is not None else None
    req = urllib.request.Request(base + path, data=data, method=method,
                                 headers={"Content-Type": "application/json"})
    try:
        with urllib.request.urlopen(req) as resp:
            payload = resp.read()
            return resp.status, json.loads(payload) if payload else None
    except urllib.error.HTTPError as exc:
        payload = exc.read()
        return exc.code, json.loads(payload) if payload else None


def open_session(base, annotator="ann-1", task="line_typing"):
    status, body = call(base, "POST", "/sessions", {"annotator_id": annotator, "task": task})
    assert status == 201
    return body["session_id"]


class TestSessions:
    def test_create_and_bad_task(self, server):
        base, _, _ = server
        assert open_session(base)
        status, _ = call(base, "POST", "/sessions", {"annotator_id": "x", "task": "foo"})
        assert status == 400

    def test_queue_drains_then_204(self, server):
        base, _, _ = server
        sid = open_session(base)
        seen = set()
        for _ in range(3):
            status, item = call(base, "GET", f"/sessions/{sid}/next")
            assert status == 200
            seen.add(item["item_id"])
        assert len(seen) == 3
        status, _ = call(base, "GET", f"/sessions/{sid}/next")
        assert status == 204

    def test_unknown_session_404(self, server):
        base, _, _ = server
        status, _ = call(base, "GET", "/sessions/nope/next")
        assert status == 404

    def test_concurrent_sessions_get_disjoint_items(self, server):
        base, _, _ = server
        sid_a, sid_b = open_session(base), open_session(base)
        _, item_a = call(base, "GET", f"/sessions/{sid_a}/next")
        _, item_b = call(base, "GET", f"/sessions/{sid_b}/next")
        assert item_a["item_id"] != item_b["item_id"]

    def test_char_task_includes_options(self, server):
        base, _, _ = server
        sid = open_session(base, task="char_labeling")
        status, item = call(base, "GET", f"/sessions/{sid}/next")
        assert status == 200
        assert item["char_options"] == ["a", "b"]

    def test_image_served(self, server):
        base, _, _ = server
        sid = open_session(base)
        _, item = call(base, "GET", f"/sessions/{sid}/next")
        with urllib.request.urlopen(base + item["image_url"]) as resp:
            assert resp.status == 200
            assert resp.read()[:8] == b"\x89PNG\r\n\x1a\n"


class TestAnnotations:
    def test_line_annotation_roundtrip(self, server):
        base, workspace, config = server
        sid = open_session(base)
        _, item = call(base, "GET", f"/sessions/{sid}/next")
        status, body = call(base, "POST", f"/sessions/{sid}/annotations", {
            "item_id": item["item_id"], "transcription": "ab",
            "keystroke_times_ms": [100, 300],
            "keystrokes": [["a", 100], ["b", 300]],
            "difficulty": 2,
        })
        assert status == 201
        assert body["stored"]["line_time_ms"] == 300
        manifest = load_manifest(config.store, require_images=False)
        record = manifest.records[0]
        assert record.id == item["item_id"]
        assert record.transcription == "ab"
        assert record.line_time_ms == 300
        assert record.difficulty == 2
        assert record.extra["keystrokes"] == [["a", 100], ["b", 300]]
        assert "received_at_unix_ms" in record.extra

    def test_char_annotation(self, server):
        base, _, config = server
        sid = open_session(base, task="char_labeling")
        _, item = call(base, "GET", f"/sessions/{sid}/next")
        status, _ = call(base, "POST", f"/sessions/{sid}/annotations", {
            "item_id": item["item_id"], "label": "a", "reaction_ms": 850,
            "difficulty": 4,
        })
        assert status == 201
        record = load_manifest(config.store, require_images=False).records[0]
        assert record.transcription == "a"
        assert record.char_times_ms == [850.0]
        assert record.line_time_ms == 850.0

    def test_label_outside_options_rejected(self, server):
        base, _, _ = server
        sid = open_session(base, task="char_labeling")
        _, item = call(base, "GET", f"/sessions/{sid}/next")
        status, _ = call(base, "POST", f"/sessions/{sid}/annotations", {
            "item_id": item["item_id"], "label": "z", "reaction_ms": 850})
        assert status == 422

    def test_negative_timing_422(self, server):
        base, _, _ = server
        sid = open_session(base)
        _, item = call(base, "GET", f"/sessions/{sid}/next")
        status, _ = call(base, "POST", f"/sessions/{sid}/annotations", {
            "item_id": item["item_id"], "transcription": "ab",
            "keystroke_times_ms": [-5]})
        assert status == 422

    def test_unassigned_item_409(self, server):
        base, _, _ = server
        sid = open_session(base)
        status, _ = call(base, "POST", f"/sessions/{sid}/annotations", {
            "item_id": "line-0", "transcription": "ab",
            "keystroke_times_ms": [100]})
        assert status == 409

    def test_repost_replaces_with_200(self, server):
        base, _, config = server
        sid = open_session(base)
        _, item = call(base, "GET", f"/sessions/{sid}/next")
        body = {"item_id": item["item_id"], "transcription": "ab",
                "keystroke_times_ms": [100, 300]}
        status, _ = call(base, "POST", f"/sessions/{sid}/annotations", body)
        assert status == 201
        body["transcription"] = "ba"
        status, _ = call(base, "POST", f"/sessions/{sid}/annotations", body)
        assert status == 200
        # single record after replacement, last write wins on restart
        from scriptorium.service import AnnotationService
        fresh = AnnotationService(config)
        try:
            assert [r.transcription for r in fresh.completed.values()] == ["ba"]
        finally:
            fresh.close()


class TestStaticUi:
    def test_frontend_served_when_configured(self, workspace):
        (workspace / "ui").mkdir()
        (workspace / "ui" / "index.html").write_text("<html>annotator</html>")
        config = json.loads((workspace / "service.json").read_text())
        config["static_dir"] = "ui"
        (workspace / "service.json").write_text(json.dumps(config))
        cfg = load_config(workspace / "service.json")
        httpd, service = make_server(cfg)
        thread = threading.Thread(target=httpd.serve_forever, daemon=True)
        thread.start()
        base = f"http://127.0.0.1:{httpd.server_address[1]}"
        try:
            with urllib.request.urlopen(base + "/") as resp:
                assert resp.status == 200
                assert b"annotator" in resp.read()
            with pytest.raises(urllib.error.HTTPError):
                urllib.request.urlopen(base + "/ui/../service.json")
        finally:
            httpd.shutdown()
            service.close()
            thread.join(timeout=5)


class TestRestart:
    def test_completed_items_not_reserved_after_restart(self, workspace):
        config = load_config(workspace / "service.json")
        httpd, service = make_server(config)
        thread = threading.Thread(target=httpd.serve_forever, daemon=True)
        thread.start()
        base = f"http://127.0.0.1:{httpd.server_address[1]}"
        sid = open_session(base)
        _, item = call(base, "GET", f"/sessions/{sid}/next")
        call(base, "POST", f"/sessions/{sid}/annotations", {
            "item_id": item["item_id"], "transcription": "ab",
            "keystroke_times_ms": [120]})
        httpd.shutdown()
        service.close()
        thread.join(timeout=5)

        fresh_config = load_config(workspace / "service.json")
        httpd2, service2 = make_server(fresh_config)
        thread2 = threading.Thread(target=httpd2.serve_forever, daemon=True)
        thread2.start()
        base2 = f"http://127.0.0.1:{httpd2.server_address[1]}"
        sid2 = open_session(base2)
        served = []
        while True:
            status, nxt = call(base2, "GET", f"/sessions/{sid2}/next")
            if status != 200:
                break
            served.append(nxt["item_id"])
        assert item["item_id"] not in served
        assert len(served) == 2
        httpd2.shutdown()
        service2.close()
        thread2.join(timeout=5)

    def test_store_is_loadable_manifest(self, workspace):
        config = load_config(workspace / "service.json")
        _, service = make_server(config)
        service.close()
        manifest = load_manifest(config.store, require_images=False)
        assert manifest.records == []
