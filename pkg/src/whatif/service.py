"""HTTP service exposing the pipeline to interactive clients.

Sessions are in-memory, single-writer (a lock per session), and hold
the current spec, its results, and the compiled interface. Every
mutation re-validates before committing, so an invalid spec is never
session state; errors come back as structured findings, not stack
traces. Datasets and trained models are shared read-only.
"""

from __future__ import annotations

import json
import threading
import uuid
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from fastapi import FastAPI
from fastapi.responses import Response

from .analysis import ExecutionError, ExperimentResult, execute_experiment, execute_spec
from .bridge import ProviderError, classify_wia_type, generate_spec, provider_from_config, repair_spec
from .compiler import (
    InteractionError,
    InteractionEvent,
    InterfaceDescription,
    StaleRevisionError,
    apply_interaction,
    compile_interface,
)
from .data import Dataset, DatasetError, dataset_context, load_dataset
from .errors import ErrorFinding, blocking
from .jsontree import canonical_dumps
from .models import ModelCache
from .spec import (
    SCHEMA_VERSION,
    Spec,
    SpecError,
    apply_patch,
    parse_spec_strict,
    populate_defaults,
    serialize_spec,
)
from .validation import lint_semantics, validate_structure


@dataclass
class Session:
    id: str
    dataset: Dataset
    revision: int = 0
    spec: Spec | None = None
    results: list[ExperimentResult] = field(default_factory=list)
    interface: InterfaceDescription | None = None
    findings: list[ErrorFinding] = field(default_factory=list)
    lock: threading.Lock = field(default_factory=threading.Lock)


def _findings_payload(findings: list[ErrorFinding]) -> list[dict]:
    return [f.to_tree() for f in findings]


def _json(tree: Any, status: int = 200) -> Response:
    return Response(canonical_dumps(tree), status_code=status,
                    media_type="application/json")


def create_app(config: dict | None = None) -> FastAPI:
    config = config or {}
    snapshot_path = Path(config["snapshotPath"]) if config.get("snapshotPath") \
        else None
    datasets: dict[str, Dataset] = {}
    sessions: dict[str, Session] = {}
    cache = ModelCache(config.get("cacheDir"))
    registry_lock = threading.Lock()

    from contextlib import asynccontextmanager

    @asynccontextmanager
    async def lifespan(_app):
        if snapshot_path and snapshot_path.exists():
            _restore_sessions(snapshot_path)
        yield
        if snapshot_path:
            _snapshot_sessions(snapshot_path)

    app = FastAPI(title="whatif", docs_url=None, redoc_url=None,
                  lifespan=lifespan)

    for path in config.get("datasets", []):
        ds = load_dataset(path)
        datasets[ds.name] = ds

    def _snapshot_sessions(target: Path) -> None:
        entries = []
        for session in sessions.values():
            if session.spec is None:
                continue
            entries.append({"id": session.id, "dataset": session.dataset.name,
                            "document": serialize_spec(session.spec),
                            "revision": session.revision})
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_text(canonical_dumps({"version": "sessions.v1",
                                           "sessions": entries}), "utf-8")

    def _restore_sessions(source: Path) -> None:
        payload = json.loads(source.read_text("utf-8"))
        for entry in payload.get("sessions", []):
            ds = datasets.get(entry["dataset"])
            if ds is None:
                continue
            session = Session(id=entry["id"], dataset=ds,
                              revision=entry["revision"] - 1)
            response = run_pipeline(session, entry["document"])
            if response.status_code == 200:
                sessions[session.id] = session

    def provider():
        return provider_from_config(config.get("provider"))

    def get_session(session_id: str) -> Session | None:
        return sessions.get(session_id)

    def run_pipeline(session: Session, text: str) -> Response:
        """Validate, default, lint, execute, compile; commit only on success."""
        structural = validate_structure(text)
        if blocking(structural):
            return _json({"findings": _findings_payload(structural),
                          "revision": session.revision}, status=422)
        spec = parse_spec_strict(text)
        try:
            spec = populate_defaults(spec, session.dataset)
        except SpecError as exc:
            return _json({"findings": _findings_payload(exc.findings),
                          "revision": session.revision}, status=422)
        lints = lint_semantics(spec, session.dataset)
        try:
            results = execute_spec(spec, session.dataset, cache)
        except ExecutionError as exc:
            return _json({"error": {"message": str(exc), "path": exc.path},
                          "findings": _findings_payload(lints),
                          "revision": session.revision}, status=422)
        session.spec = spec
        session.results = results
        session.findings = lints
        session.revision += 1
        session.interface = compile_interface(spec, results, session.dataset,
                                              revision=session.revision)
        return _json({"revision": session.revision,
                      "interface": session.interface.to_tree(),
                      "findings": _findings_payload(lints)})

    @app.post("/datasets")
    async def register_dataset(body: dict):
        name = body.get("name")
        try:
            if body.get("csvText") is not None:
                if not name:
                    return _json({"error": {"message": "dataset needs a name"}}, 422)
                target = Path(config.get("uploadDir", "/tmp/whatif-uploads"))
                target.mkdir(parents=True, exist_ok=True)
                csv_path = target / f"{name}.csv"
                csv_path.write_text(body["csvText"], "utf-8")
                if body.get("encodingHints"):
                    (target / f"{name}.enc.json").write_text(
                        json.dumps({"columns": body["encodingHints"]}), "utf-8")
                ds = load_dataset(csv_path)
            elif body.get("path"):
                ds = load_dataset(body["path"], body.get("encodingHints"))
            else:
                return _json({"error": {"message": "need csvText or path"}}, 422)
        except DatasetError as exc:
            return _json({"error": {"message": str(exc)}}, 422)
        with registry_lock:
            datasets[ds.name] = ds
        return _json({"dataset": ds.name, "rows": ds.n_rows,
                      "columns": [c.name for c in ds.columns]}, 201)

    @app.post("/sessions")
    async def create_session(body: dict):
        name = body.get("dataset")
        if name not in datasets:
            return _json({"error": {"message": f"unknown dataset {name!r}"}}, 404)
        session = Session(id=uuid.uuid4().hex[:12], dataset=datasets[name])
        with registry_lock:
            sessions[session.id] = session
        return _json({"sessionId": session.id, "revision": 0,
                      "dataset": name}, 201)

    @app.post("/sessions/{session_id}/spec")
    async def post_spec(session_id: str, body: dict):
        session = get_session(session_id)
        if session is None:
            return _json({"error": {"message": "unknown session"}}, 404)
        document = body.get("document")
        if isinstance(document, dict):
            document = canonical_dumps(document)
        if not isinstance(document, str):
            return _json({"error": {"message": "need a document"}}, 422)
        with session.lock:
            return run_pipeline(session, document)

    @app.post("/sessions/{session_id}/question")
    async def post_question(session_id: str, body: dict):
        session = get_session(session_id)
        if session is None:
            return _json({"error": {"message": "unknown session"}}, 404)
        text = body.get("text", "")
        try:
            llm = provider()
        except ProviderError as exc:
            return _json({"error": {"message": str(exc)}}, 422)
        ctx = dataset_context(session.dataset)
        with session.lock:
            try:
                wia_type = classify_wia_type(text, ctx, llm)
                outcome = generate_spec(text, wia_type, ctx, llm)
            except ProviderError as exc:
                return _json({"error": {"message": str(exc)}}, 422)
            if blocking(outcome.findings):
                return _json({"findings": _findings_payload(outcome.findings),
                              "raw": outcome.raw, "wiaType": wia_type,
                              "revision": session.revision}, 422)
            response = run_pipeline(session, outcome.raw)
            if response.status_code != 200:
                return response
            tree = json.loads(response.body)
            tree["wiaType"] = wia_type
            return _json(tree)

    @app.get("/sessions/{session_id}/interface")
    async def get_interface(session_id: str):
        session = get_session(session_id)
        if session is None:
            return _json({"error": {"message": "unknown session"}}, 404)
        if session.interface is None:
            return _json({"error": {"message": "no specification posted yet"},
                          "revision": session.revision}, 404)
        return _json({"revision": session.revision,
                      "interface": session.interface.to_tree()})

    @app.get("/sessions/{session_id}/spec")
    async def get_spec(session_id: str):
        session = get_session(session_id)
        if session is None:
            return _json({"error": {"message": "unknown session"}}, 404)
        if session.spec is None:
            return _json({"error": {"message": "no specification posted yet"},
                          "revision": session.revision}, 404)
        return _json({"schemaVersion": SCHEMA_VERSION,
                      "document": serialize_spec(session.spec),
                      "findings": _findings_payload(session.findings),
                      "revision": session.revision})

    @app.post("/sessions/{session_id}/interaction")
    async def post_interaction(session_id: str, body: dict):
        session = get_session(session_id)
        if session is None:
            return _json({"error": {"message": "unknown session"}}, 404)
        with session.lock:
            if session.spec is None or session.interface is None:
                return _json({"error": {"message": "no specification posted yet"},
                              "revision": session.revision}, 409)
            ev = InteractionEvent(control_id=body.get("controlId", ""),
                                  new_value=body.get("newValue"),
                                  revision=body.get("revision", -1))
            try:
                patch, affected = apply_interaction(session.spec,
                                                    session.interface, ev)
            except StaleRevisionError as exc:
                return _json({"error": {"message": str(exc)},
                              "currentRevision": exc.current}, 409)
            except InteractionError as exc:
                return _json({"error": {"message": str(exc)},
                              "revision": session.revision}, 422)
            patched = apply_patch(session.spec, patch)
            if isinstance(patched, list):
                return _json({"findings": _findings_payload(patched),
                              "revision": session.revision}, 422)
            lints = lint_semantics(patched, session.dataset)
            results = list(session.results)
            try:
                for i in affected:
                    results[i] = execute_experiment(patched,
                                                    patched.experiments[i],
                                                    session.dataset, cache,
                                                    index=i)
            except ExecutionError as exc:
                return _json({"error": {"message": str(exc), "path": exc.path},
                              "revision": session.revision}, 422)
            session.spec = patched
            session.results = results
            session.findings = lints
            session.revision += 1
            session.interface = compile_interface(patched, results,
                                                  session.dataset,
                                                  revision=session.revision)
            return _json({"revision": session.revision,
                          "interface": session.interface.to_tree(),
                          "findings": _findings_payload(lints),
                          "reExecuted": affected})

    @app.post("/sessions/{session_id}/repair")
    async def post_repair(session_id: str, body: dict):
        session = get_session(session_id)
        if session is None:
            return _json({"error": {"message": "unknown session"}}, 404)
        category = body.get("category")
        mode = body.get("mode", "regenerate")
        try:
            llm = provider()
        except ProviderError as exc:
            return _json({"error": {"message": str(exc)}}, 422)
        with session.lock:
            if session.spec is None:
                return _json({"error": {"message": "no specification posted yet"},
                              "revision": session.revision}, 409)
            try:
                outcome = repair_spec(body.get("question", ""), session.spec,
                                      category, llm, mode=mode,
                                      dataset_context=dataset_context(
                                          session.dataset))
            except ProviderError as exc:
                return _json({"error": {"message": str(exc)}}, 422)
            if outcome.spec is None or blocking(outcome.findings):
                return _json({"findings": _findings_payload(outcome.findings),
                              "raw": outcome.raw,
                              "revision": session.revision}, 422)
            response = run_pipeline(session, serialize_spec(outcome.spec))
            if response.status_code != 200:
                return response
            tree = json.loads(response.body)
            tree["repairFindings"] = _findings_payload(outcome.findings)
            return _json(tree)

    return app


def serve(config: dict | None = None, port: int | None = None,
          host: str = "127.0.0.1") -> None:
    import uvicorn

    config = config or {}
    app = create_app(config)
    uvicorn.run(app, host=host, port=port or config.get("port", 8787),
                log_level="warning")
