"""HTTP annotation service.

Serves line or character images to annotators, assigns each pending item
to at most one live session, and appends completed annotations to a
JSONL store that doubles as a dataset manifest. Timing always comes from
the client (measured at the glass); the server only adds its own receive
timestamp for auditing and never fabricates durations.

Endpoints (JSON bodies):
  POST /sessions {annotator_id, task}            -> 201 {session_id}
  GET  /sessions/{id}/next                       -> 200 item | 204 | 404
  POST /sessions/{id}/annotations {...}          -> 201 | 200 replace | 409 | 422
  GET  /images/{item_id}                         -> image bytes
  GET  /ui/...                                   -> static frontend, if configured
"""

from __future__ import annotations

import json
import signal
import threading
import time
import uuid
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

from .data import (
    MANIFEST_KIND, SCHEMA_VERSION, LineRecord, Manifest, load_manifest,
    record_from_dict, write_manifest,
)
from .errors import SchemaError
from .textcore import Alphabet

TASKS = ("line_typing", "char_labeling")


@dataclass
class ServiceConfig:
    host: str
    port: int
    data_dir: Path
    store: Path
    tasks: dict[str, Path]          # task -> manifest of items to annotate
    alphabet: Path | None = None    # option list for char labeling
    static_dir: Path | None = None


def load_config(path: str | Path) -> ServiceConfig:
    base = Path(path).parent
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    tasks = {name: base / p for name, p in raw["tasks"].items()}
    for name in tasks:
        if name not in TASKS:
            raise ValueError(f"unknown task {name!r}")
    return ServiceConfig(
        host=raw.get("host", "127.0.0.1"),
        port=int(raw.get("port", 8775)),
        data_dir=base / raw.get("data_dir", "."),
        store=base / raw["store"],
        tasks=tasks,
        alphabet=base / raw["alphabet"] if raw.get("alphabet") else None,
        static_dir=base / raw["static_dir"] if raw.get("static_dir") else None,
    )


@dataclass
class Session:
    session_id: str
    annotator_id: str
    task: str
    started_at: float
    claimed: set[str] = field(default_factory=set)


class AnnotationService:
    """The service state machine, independent of HTTP plumbing."""

    def __init__(self, config: ServiceConfig):
        self.config = config
        self.lock = threading.Lock()
        self.sessions: dict[str, Session] = {}
        self.items: dict[str, LineRecord] = {}
        self.queues: dict[str, list[str]] = {}
        self._image_roots: dict[str, Path] = {}
        for task, manifest_path in config.tasks.items():
            manifest = load_manifest(manifest_path, require_images=False)
            self.queues[task] = [r.id for r in manifest.records]
            for record in manifest.records:
                self.items[record.id] = record
                self._image_roots[record.id] = manifest_path.parent
        self.char_options = self._load_options()
        self.completed: dict[str, LineRecord] = {}
        self._replay_and_compact()
        self._store_fh = open(config.store, "a", encoding="utf-8")

    def _load_options(self) -> list[str]:
        if self.config.alphabet is not None:
            return list(Alphabet.load(self.config.alphabet).symbols)
        chars = set()
        for task, ids in self.queues.items():
            if task == "char_labeling":
                for item_id in ids:
                    chars.update(self.items[item_id].transcription)
        return sorted(chars)

    def _replay_and_compact(self) -> None:
        """Rebuild completion state from the append-only store, last write
        wins, then rewrite the store compacted."""
        store = self.config.store
        if store.exists():
            with open(store, encoding="utf-8") as fh:
                for line_no, raw in enumerate(fh, start=1):
                    raw = raw.strip()
                    if not raw:
                        continue
                    data = json.loads(raw)
                    if data.get("kind") == MANIFEST_KIND:
                        continue
                    record = record_from_dict(data, line_no)
                    self.completed[record.id] = record
        store.parent.mkdir(parents=True, exist_ok=True)
        write_manifest(Manifest(records=list(self.completed.values())), store)

    # -- session API ------------------------------------------------------

    def create_session(self, annotator_id: str, task: str) -> str:
        if task not in self.queues or not annotator_id:
            raise ValueError(f"unknown task {task!r}")
        session = Session(uuid.uuid4().hex, annotator_id, task, time.time())
        with self.lock:
            self.sessions[session.session_id] = session
        return session.session_id

    def next_item(self, session_id: str) -> dict | None:
        """Claim and describe the next pending item; None when drained."""
        with self.lock:
            session = self.sessions.get(session_id)
            if session is None:
                raise KeyError(session_id)
            assigned = {i for s in self.sessions.values() for i in s.claimed}
            for item_id in self.queues[session.task]:
                if item_id in self.completed or item_id in assigned:
                    continue
                session.claimed.add(item_id)
                item = self.items[item_id]
                payload = {"item_id": item_id, "image_url": f"/images/{item_id}"}
                if session.task == "char_labeling":
                    payload["char_options"] = self.char_options
                return payload
            return None

    def submit(self, session_id: str, body: dict) -> tuple[int, LineRecord]:
        """Returns (status, stored record); status 201 new, 200 replaced."""
        with self.lock:
            session = self.sessions.get(session_id)
            if session is None:
                raise KeyError(session_id)
            item_id = body.get("item_id")
            if item_id not in session.claimed:
                return 409, None
            record = self._build_record(session, self.items[item_id], body)
            replaced = item_id in self.completed
            self.completed[item_id] = record
            self._store_fh.write(record.to_json() + "\n")
            self._store_fh.flush()
            return (200 if replaced else 201), record

    def _build_record(self, session: Session, item: LineRecord, body: dict) -> LineRecord:
        extra = {
            "task": session.task,
            "session_id": session.session_id,
            "received_at_unix_ms": int(time.time() * 1000),
        }
        difficulty = body.get("difficulty")
        if difficulty is not None and (not isinstance(difficulty, int)
                                       or not 1 <= difficulty <= 5):
            raise ValueError("difficulty must be an integer in 1..5")
        if session.task == "line_typing":
            transcription = body.get("transcription")
            times = body.get("keystroke_times_ms")
            if not isinstance(transcription, str):
                raise ValueError("line annotation needs a transcription string")
            if (not isinstance(times, list) or not times
                    or not all(isinstance(t, (int, float)) and not isinstance(t, bool)
                               and t > 0 for t in times)):
                raise ValueError("keystroke_times_ms must be positive numbers")
            keystrokes = body.get("keystrokes")
            if keystrokes is not None:
                extra["keystrokes"] = keystrokes
            return LineRecord(
                id=item.id, image_path=item.image_path, transcription=transcription,
                annotator_id=session.annotator_id, split=item.split,
                line_time_ms=float(max(times)),  # last keystroke since display
                difficulty=difficulty, extra=extra)
        label = body.get("label")
        reaction = body.get("reaction_ms")
        if not isinstance(label, str) or label not in self.char_options:
            raise ValueError("label must come from the option list")
        if not isinstance(reaction, (int, float)) or isinstance(reaction, bool) \
                or reaction <= 0:
            raise ValueError("reaction_ms must be positive")
        return LineRecord(
            id=item.id, image_path=item.image_path, transcription=label,
            annotator_id=session.annotator_id, split=item.split,
            char_times_ms=[float(reaction)], line_time_ms=float(reaction),
            difficulty=difficulty, extra=extra)

    def image_bytes(self, item_id: str) -> bytes | None:
        item = self.items.get(item_id)
        if item is None:
            return None
        path = self._image_roots[item_id] / item.image_path
        if not path.exists():
            return None
        return path.read_bytes()

    def close(self) -> None:
        with self.lock:
            self._store_fh.flush()
            self._store_fh.close()


class _Handler(BaseHTTPRequestHandler):
    service: AnnotationService = None  # set by make_server
    protocol_version = "HTTP/1.1"

    def log_message(self, fmt, *args):  # quiet by default
        pass

    def _json(self, status: int, payload: dict | None = None) -> None:
        body = json.dumps(payload).encode("utf-8") if payload is not None else b""
        self.send_response(status)
        if body:
            self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        if body:
            self.wfile.write(body)

    def _read_body(self) -> dict | None:
        try:
            length = int(self.headers.get("Content-Length", "0"))
            return json.loads(self.rfile.read(length) or b"{}")
        except (ValueError, json.JSONDecodeError):
            return None

    def do_POST(self):
        parts = self.path.rstrip("/").split("/")
        body = self._read_body()
        if body is None or not isinstance(body, dict):
            return self._json(422, {"error": "malformed JSON body"})
        if parts == ["", "sessions"]:
            try:
                session_id = self.service.create_session(
                    body.get("annotator_id", ""), body.get("task", ""))
            except ValueError as exc:
                return self._json(400, {"error": str(exc)})
            return self._json(201, {"session_id": session_id})
        if len(parts) == 4 and parts[1] == "sessions" and parts[3] == "annotations":
            try:
                status, record = self.service.submit(parts[2], body)
            except KeyError:
                return self._json(404, {"error": "unknown session"})
            except (ValueError, SchemaError) as exc:
                return self._json(422, {"error": str(exc)})
            if status == 409:
                return self._json(409, {"error": "item not assigned to this session"})
            return self._json(status, {"stored": json.loads(record.to_json())})
        return self._json(404, {"error": "no such endpoint"})

    def do_GET(self):
        parts = self.path.split("?")[0].rstrip("/").split("/")
        if len(parts) == 4 and parts[1] == "sessions" and parts[3] == "next":
            try:
                item = self.service.next_item(parts[2])
            except KeyError:
                return self._json(404, {"error": "unknown session"})
            if item is None:
                return self._json(204)
            return self._json(200, item)
        if len(parts) == 3 and parts[1] == "images":
            blob = self.service.image_bytes(parts[2])
            if blob is None:
                return self._json(404, {"error": "unknown image"})
            self.send_response(200)
            self.send_header("Content-Type", "image/png")
            self.send_header("Content-Length", str(len(blob)))
            self.end_headers()
            self.wfile.write(blob)
            return
        if self.service.config.static_dir is not None and (
                parts[:2] == ["", "ui"] or self.path == "/"):
            return self._static(parts)
        return self._json(404, {"error": "no such endpoint"})

    def _static(self, parts):
        rel = "/".join(parts[2:]) or "index.html"
        if self.path == "/":
            rel = "index.html"
        path = (self.service.config.static_dir / rel).resolve()
        if not str(path).startswith(str(self.service.config.static_dir.resolve())) \
                or not path.is_file():
            return self._json(404, {"error": "not found"})
        blob = path.read_bytes()
        ctype = {"html": "text/html", "js": "text/javascript", "css": "text/css"}.get(
            path.suffix.lstrip("."), "application/octet-stream")
        self.send_response(200)
        self.send_header("Content-Type", ctype)
        self.send_header("Content-Length", str(len(blob)))
        self.end_headers()
        self.wfile.write(blob)


def make_server(config: ServiceConfig) -> tuple[ThreadingHTTPServer, AnnotationService]:
    service = AnnotationService(config)
    handler = type("BoundHandler", (_Handler,), {"service": service})
    server = ThreadingHTTPServer((config.host, config.port), handler)
    return server, service


def serve_forever(config: ServiceConfig) -> None:
    server, service = make_server(config)

    def shutdown(signum, frame):
        threading.Thread(target=server.shutdown, daemon=True).start()

    signal.signal(signal.SIGTERM, shutdown)
    signal.signal(signal.SIGINT, shutdown)
    host, port = server.server_address[:2]
    print(f"annotation service on http://{host}:{port}/ "
          f"(store: {config.store})", flush=True)
    try:
        server.serve_forever()
    finally:
        service.close()
        server.server_close()
        print("annotation log flushed", flush=True)
