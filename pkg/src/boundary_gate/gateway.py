"""HTTP surface for the gateway service.

JSON over a small fixed set of paths, plus one server-sent-events stream
for trace records. Binds loopback by default and refuses a wildcard
listen address unless explicitly allowed.
"""

from __future__ import annotations

import asyncio
import json
import os
from dataclasses import dataclass, replace
from typing import Any

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse, StreamingResponse

from .audit_trace import TraceRecord
from .plan_model import Strictness
from .service import EngineSettings, GatewayError, GatewayService

DEFAULT_LISTEN = "127.0.0.1:8787"
CONFIG_ENV_VAR = "BGATE_CONFIG"

_CONFIG_KEYS = {
    "data_dir",
    "listen",
    "strictness",
    "rules_path",
    "policy_table_path",
    "host_fixture_path",
}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class GatewayConfig:
    data_dir: str = "./bgate-data"
    listen: str = DEFAULT_LISTEN
    strictness: str = Strictness.PERMISSIVE.value  # floor applied to every session
    rules_path: str | None = None
    policy_table_path: str | None = None
    host_fixture_path: str | None = None


def load_config(path: str | None = None, overrides: dict[str, Any] | None = None) -> GatewayConfig:
    """File (explicit path or $BGATE_CONFIG) first, then explicit overrides."""
    config = GatewayConfig()
    if path is None:
        path = os.environ.get(CONFIG_ENV_VAR) or None
    if path:
        try:
            with open(path, encoding="utf-8") as fh:
                document = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
        if not isinstance(document, dict):
            raise ConfigError("config must be a JSON object")
        unknown = set(document) - _CONFIG_KEYS
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        config = replace(config, **document)
    if overrides:
        config = replace(config, **{k: v for k, v in overrides.items() if v is not None})
    if config.strictness not in Strictness._value2member_map_:
        raise ConfigError(f"bad strictness value: {config.strictness!r}")
    return config


def settings_from_config(config: GatewayConfig) -> EngineSettings:
    return EngineSettings.from_paths(
        rules_path=config.rules_path,
        policy_table_path=config.policy_table_path,
        host_fixture_path=config.host_fixture_path,
        floor=Strictness(config.strictness),
    )


def split_listen(listen: str) -> tuple[str, int]:
    host, _, port = listen.rpartition(":")
    if not host or not port.isdigit():
        raise ConfigError(f"listen must look like host:port, got {listen!r}")
    return host, int(port)


def is_public_listen(host: str) -> bool:
    return host in ("0.0.0.0", "::", "*", "")


class _EventHub:
    """Fans trace records out to active event streams."""

    def __init__(self) -> None:
        self._by_session: dict[str, list[asyncio.Queue]] = {}
        self._all: list[asyncio.Queue] = []

    def subscribe(self, session_id: str | None) -> asyncio.Queue:
        queue: asyncio.Queue = asyncio.Queue()
        if session_id is None:
            self._all.append(queue)
        else:
            self._by_session.setdefault(session_id, []).append(queue)
        return queue

    def unsubscribe(self, session_id: str | None, queue: asyncio.Queue) -> None:
        pool = self._all if session_id is None else self._by_session.get(session_id, [])
        if queue in pool:
            pool.remove(queue)

    def publish(self, session_id: str, record: TraceRecord) -> None:
        for queue in self._by_session.get(session_id, []):
            queue.put_nowait(record)
        for queue in self._all:
            queue.put_nowait(record)


def _sse_frame(record: TraceRecord) -> str:
    return f"id: {record.seq}\nevent: trace\ndata: {record.to_line()}\n\n"


def create_app(service: GatewayService, *, expire_ticker: bool = False) -> FastAPI:
    app = FastAPI(title="boundary-gate", docs_url=None, redoc_url=None)
    hub = _EventHub()
    service.on_trace = hub.publish

    @app.exception_handler(GatewayError)
    async def _gateway_error(_request: Request, exc: GatewayError) -> JSONResponse:
        body = {"error": {"code": exc.code, "message": exc.message, **exc.extra}}
        return JSONResponse(status_code=exc.status, content=body)

    async def _json_body(request: Request) -> Any:
        raw = await request.body()
        if not raw:
            return {}
        try:
            return json.loads(raw)
        except json.JSONDecodeError as exc:
            raise GatewayError(400, "BadRequest", f"body is not valid JSON: {exc}") from exc

    @app.post("/v1/sessions")
    async def create_session(request: Request) -> JSONResponse:
        return JSONResponse(service.create_session(await _json_body(request)))

    @app.post("/v1/sessions/{session_id}/plans")
    async def submit_plan(session_id: str, request: Request) -> JSONResponse:
        return JSONResponse(service.submit_plan(session_id, await _json_body(request)))

    @app.get("/v1/elevations")
    async def list_elevations(status: str = "pending", session_id: str | None = None) -> JSONResponse:
        return JSONResponse({"elevations": service.list_elevations(status, session_id)})

    @app.post("/v1/elevations/{elevation_id}/decision")
    async def decide(elevation_id: str, request: Request) -> JSONResponse:
        return JSONResponse(service.decide_elevation(elevation_id, await _json_body(request)))

    @app.post("/v1/sessions/{session_id}/execute")
    async def execute(session_id: str, request: Request) -> JSONResponse:
        return JSONResponse(service.execute_plan(session_id, await _json_body(request)))

    @app.get("/v1/sessions/{session_id}/trace")
    async def get_trace(session_id: str) -> JSONResponse:
        return JSONResponse(service.get_trace(session_id))

    @app.get("/v1/events")
    async def events(
        session_id: str | None = None,
        from_seq: int | None = None,
        limit: int | None = None,
    ) -> StreamingResponse:
        if from_seq is not None and session_id is None:
            raise GatewayError(400, "BadRequest", "from_seq requires session_id")
        if session_id is not None:
            # raises UnknownSession before the stream starts
            service.trace_records(session_id)

        async def stream():
            remaining = limit
            queue = hub.subscribe(session_id)
            last_seq = -1
            try:
                if session_id is not None and from_seq is not None:
                    for record in service.trace_records(session_id):
                        if record.seq < from_seq:
                            continue
                        yield _sse_frame(record)
                        last_seq = record.seq
                        if remaining is not None:
                            remaining -= 1
                            if remaining <= 0:
                                return
                while True:
                    record = await queue.get()
                    if session_id is not None and record.seq <= last_seq:
                        continue
                    yield _sse_frame(record)
                    last_seq = record.seq
                    if remaining is not None:
                        remaining -= 1
                        if remaining <= 0:
                            return
            finally:
                hub.unsubscribe(session_id, queue)

        return StreamingResponse(stream(), media_type="text/event-stream")

    if expire_ticker:

        @app.on_event("startup")
        async def _start_ticker() -> None:
            async def tick() -> None:
                while True:
                    await asyncio.sleep(1.0)
                    service.sweep_expirations()

            app.state.ticker = asyncio.create_task(tick())

        @app.on_event("shutdown")
        async def _stop_ticker() -> None:
            ticker = getattr(app.state, "ticker", None)
            if ticker is not None:
                ticker.cancel()

    return app


def serve(config: GatewayConfig, *, allow_public_listen: bool = False) -> None:
    import uvicorn

    host, port = split_listen(config.listen)
    if is_public_listen(host) and not allow_public_listen:
        raise ConfigError(
            f"refusing to listen on {host!r} without --allow-public-listen"
        )
    service = GatewayService(config.data_dir, settings_from_config(config))
    app = create_app(service, expire_ticker=True)
    uvicorn.run(app, host=host, port=port, log_level="info")
