"""Local JSON API backing the interactive simulation UI.

The service holds one immutable model and any number of mutable
sessions.  A session is a current configuration plus an undo stack;
all mutations of one session are serialized by its lock.  Step
semantics are exactly :func:`rybu.lts.simulate_step`, so the API, the
CLI stepper and the verifier can never disagree.

Payloads carry ``"v": 1``.  Errors: 404 unknown session or path, 409
action not enabled (the body carries the fresh enabled set), 413 graph
over cap, 422 malformed body.
"""

from __future__ import annotations

import itertools
import json
import mimetypes
import threading
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from typing import Any, Optional
from urllib.parse import parse_qs, urlparse

from .imds import Configuration, SystemModel, apply_action, enabled_actions
from .lower import ServerMeta
from .lts import ExplorationLimits, Lts, build_lts, simulate_step, verify, StepRejected
from .report import JSON_VERSION, action_json, config_json, graph_json, report_json

DEFAULT_GRAPH_CAP = 500


class ApiError(Exception):
    def __init__(self, status: int, payload: dict[str, Any]):
        super().__init__(payload.get("error", "error"))
        self.status = status
        self.payload = {"v": JSON_VERSION, **payload}


@dataclass
class Session:
    sid: str
    config: Configuration
    history: list[tuple[Configuration, int]] = field(default_factory=list)
    lock: threading.Lock = field(default_factory=threading.Lock)


def _jsonable(value: Any) -> Any:
    if isinstance(value, tuple):
        return [_jsonable(v) for v in value]
    return value


class ApiService:
    """Endpoint logic, independent of the HTTP plumbing (unit-testable)."""

    def __init__(
        self,
        model: SystemModel,
        meta: Optional[dict[str, ServerMeta]] = None,
        limits: Optional[ExplorationLimits] = None,
    ):
        self.model = model
        self.meta = meta or {}
        self.limits = limits or ExplorationLimits()
        self.sessions: dict[str, Session] = {}
        self._ids = itertools.count(1)
        self._lock = threading.Lock()
        self._lts: Optional[Lts] = None
        self._verify_payload: Optional[dict[str, Any]] = None

    # -- sessions -------------------------------------------------------

    def create_session(self) -> dict[str, Any]:
        with self._lock:
            sid = f"s{next(self._ids)}"
            session = Session(sid=sid, config=self.model.initial)
            self.sessions[sid] = session
        return self.state_payload(session)

    def _session(self, sid: str) -> Session:
        session = self.sessions.get(sid)
        if session is None:
            raise ApiError(404, {"error": "unknown-session", "session": sid})
        return session

    def state_payload(self, session: Session) -> dict[str, Any]:
        config = session.config
        enabled = enabled_actions(self.model, config)
        entries = []
        for action in enabled:
            entry = action_json(self.model, action)
            entry["preview"] = config_json(apply_action(config, action))
            entries.append(entry)
        decomposed: dict[str, Any] = {}
        for server, value in config.states:
            m = self.meta.get(server)
            if m is not None and m.kind == "resource" and value in m.decode:
                decomposed[server] = {
                    var: _jsonable(v) for var, v in m.decode[value].items()
                }
        return {
            "v": JSON_VERSION,
            "session": session.sid,
            "configuration": config_json(config),
            "decomposed": decomposed,
            "enabled": entries,
            "deadlock": not enabled and bool(config.pending),
            "blocked": [m.agent for m in config.pending] if not enabled else [],
            "history_length": len(session.history),
        }

    def state(self, sid: str) -> dict[str, Any]:
        return self.state_payload(self._session(sid))

    def step(self, sid: str, body: dict[str, Any]) -> dict[str, Any]:
        session = self._session(sid)
        action_id = body.get("action_id")
        if not isinstance(action_id, int) or not 0 <= action_id < len(self.model.actions):
            raise ApiError(422, {"error": "malformed-body", "detail": "action_id must be a valid action id"})
        action = self.model.actions[action_id]
        with session.lock:
            try:
                successor, _ = simulate_step(self.model, session.config, action)
            except StepRejected as e:
                raise ApiError(
                    409,
                    {
                        "error": "action-not-enabled",
                        "action_id": action_id,
                        "enabled": [action_json(self.model, a) for a in e.enabled],
                    },
                ) from e
            session.history.append((session.config, action_id))
            session.config = successor
            return self.state_payload(session)

    def undo(self, sid: str) -> dict[str, Any]:
        session = self._session(sid)
        with session.lock:
            if session.history:
                session.config = session.history.pop()[0]
            return self.state_payload(session)

    # -- model-wide queries -----------------------------------------------

    def model_payload(self) -> dict[str, Any]:
        servers = []
        for server in self.model.servers:
            m = self.meta.get(server)
            servers.append(
                {
                    "name": server,
                    "states": sorted(s.value for s in self.model.states_decl if s.server == server),
                    "services": sorted(
                        {msg.service for msg in self.model.messages_decl if msg.server == server}
                    ),
                    "vars": list(m.var_names) if m is not None and m.kind == "resource" else None,
                }
            )
        return {
            "v": JSON_VERSION,
            "servers": servers,
            "agents": list(self.model.agents),
            "initial": config_json(self.model.initial),
        }

    def verify_payload_cached(self) -> dict[str, Any]:
        with self._lock:
            if self._verify_payload is None:
                self._verify_payload = report_json(self.model, verify(self.model, self.limits))
            return self._verify_payload

    def graph_payload(self, cap: int) -> dict[str, Any]:
        with self._lock:
            if self._lts is None:
                self._lts = build_lts(self.model, self.limits)
            lts = self._lts
        if len(lts.nodes) > cap:
            raise ApiError(
                413,
                {
                    "error": "graph-too-large",
                    "nodes": len(lts.nodes),
                    "cap": cap,
                    "detail": "raise ?cap= or consume projections instead",
                },
            )
        return graph_json(self.model, lts)


def _route(service: ApiService, method: str, path: str, query: dict, body: dict) -> dict[str, Any]:
    parts = [p for p in path.split("/") if p]
    if method == "POST" and parts == ["sessions"]:
        return service.create_session()
    if len(parts) == 3 and parts[0] == "sessions":
        sid, tail = parts[1], parts[2]
        if method == "GET" and tail == "state":
            return service.state(sid)
        if method == "POST" and tail == "step":
            return service.step(sid, body)
        if method == "POST" and tail == "undo":
            return service.undo(sid)
    if method == "GET" and parts == ["model"]:
        return service.model_payload()
    if method == "GET" and parts == ["verify"]:
        return service.verify_payload_cached()
    if method == "GET" and parts == ["graph"]:
        try:
            cap = int(query.get("cap", [DEFAULT_GRAPH_CAP])[0])
        except ValueError:
            raise ApiError(422, {"error": "malformed-body", "detail": "cap must be an integer"})
        return service.graph_payload(cap)
    raise ApiError(404, {"error": "not-found", "path": path})


def make_handler(service: ApiService, static_dir: Optional[str] = None):
    static_root = Path(static_dir).resolve() if static_dir else None

    class Handler(BaseHTTPRequestHandler):
        def log_message(self, format: str, *args) -> None:  # noqa: A002
            pass  # keep test output clean; use a reverse proxy for access logs

        def _send_json(self, status: int, payload: dict[str, Any]) -> None:
            data = json.dumps(payload).encode("utf-8")
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(data)))
            self.end_headers()
            self.wfile.write(data)

        def _serve_static(self, path: str) -> bool:
            if static_root is None:
                return False
            name = "index.html" if path in ("", "/") else path.lstrip("/")
            target = (static_root / name).resolve()
            if not str(target).startswith(str(static_root)) or not target.is_file():
                return False
            ctype = mimetypes.guess_type(str(target))[0] or "application/octet-stream"
            data = target.read_bytes()
            self.send_response(200)
            self.send_header("Content-Type", ctype)
            self.send_header("Content-Length", str(len(data)))
            self.end_headers()
            self.wfile.write(data)
            return True

        def _handle(self, method: str) -> None:
            parsed = urlparse(self.path)
            body: dict[str, Any] = {}
            if method == "POST":
                length = int(self.headers.get("Content-Length") or 0)
                raw = self.rfile.read(length) if length else b""
                if raw:
                    try:
                        body = json.loads(raw)
                        if not isinstance(body, dict):
                            raise ValueError("body must be an object")
                    except ValueError as e:
                        self._send_json(
                            422,
                            {"v": JSON_VERSION, "error": "malformed-body", "detail": str(e)},
                        )
                        return
            try:
                payload = _route(service, method, parsed.path, parse_qs(parsed.query), body)
            except ApiError as e:
                self._send_json(e.status, e.payload)
                return
            self._send_json(200, payload)

        def do_GET(self) -> None:  # noqa: N802
            if self._serve_static(urlparse(self.path).path):
                return
            self._handle("GET")

        def do_POST(self) -> None:  # noqa: N802
            self._handle("POST")

    return Handler


def serve_api(
    model: SystemModel,
    meta: Optional[dict[str, ServerMeta]] = None,
    port: int = 0,
    host: str = "127.0.0.1",
    limits: Optional[ExplorationLimits] = None,
    static_dir: Optional[str] = None,
) -> ThreadingHTTPServer:
    """Bind the service (loopback by default) and return the server.

    The caller decides when to ``serve_forever()``; tests run it on a
    background thread and ``shutdown()`` it.
    """
    service = ApiService(model, meta, limits)
    handler = make_handler(service, static_dir)
    server = ThreadingHTTPServer((host, port), handler)
    server.service = service  # type: ignore[attr-defined]
    return server
