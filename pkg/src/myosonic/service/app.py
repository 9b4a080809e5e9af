"""Control service: WebSocket state/meter fan-out plus REST wrappers
around the offline operations, hosting a LiveEngine."""

from __future__ import annotations

import asyncio
import json
import time
from contextlib import asynccontextmanager

from fastapi import FastAPI, HTTPException, WebSocket, WebSocketDisconnect

from ..config import EngineConfig, override
from ..control import ControlEvent, Source
from ..engine import LiveEngine, render_offline
from ..features import (CalibrationError, CalibrationProfile, analyze_frames,
                        calibrate, write_feature_csv)
from ..ingest import ReplayError, replay_frames
from ..synth import parameter_schema
from .models import (AnalyzeReply, AnalyzeRequest, CalibrateReply,
                     CalibrateRequest, RenderReply, RenderRequest, SetReply,
                     SetRequest)

METER_QUEUE_LIMIT = 64


class SessionHub:
    """Per-session outbound queues bridged from the engine thread.

    State diffs are never dropped; meter and heartbeat frames are shed
    when a client queue backs up.
    """

    def __init__(self):
        self.loop: asyncio.AbstractEventLoop | None = None
        self.sessions: dict[int, asyncio.Queue] = {}
        self._next_id = 0

    def attach_loop(self, loop):
        self.loop = loop

    def add_session(self) -> tuple[int, asyncio.Queue]:
        sid = self._next_id
        self._next_id += 1
        queue: asyncio.Queue = asyncio.Queue()
        self.sessions[sid] = queue
        return sid, queue

    def drop_session(self, sid: int):
        self.sessions.pop(sid, None)

    def send_to(self, sid: int, message: dict):
        queue = self.sessions.get(sid)
        if queue is not None and self.loop is not None:
            self.loop.call_soon_threadsafe(queue.put_nowait,
                                           json.dumps(message))

    def broadcast(self, message: dict):
        """Engine-thread entry point."""
        if self.loop is None:
            return
        droppable = message.get("type") in ("meters", "snapshot")
        text = json.dumps(message)
        for queue in list(self.sessions.values()):
            if droppable and queue.qsize() > METER_QUEUE_LIMIT:
                continue
            self.loop.call_soon_threadsafe(queue.put_nowait, text)


def create_app(live: LiveEngine) -> FastAPI:
    @asynccontextmanager
    async def lifespan(app: FastAPI):
        hub.attach_loop(asyncio.get_running_loop())
        if not live.started.is_set():
            live.start()
        yield
        live.stop()

    app = FastAPI(title="myosonic control service", lifespan=lifespan)
    hub = SessionHub()
    live.subscribe(hub.broadcast)
    app.state.live = live
    app.state.hub = hub

    @app.get("/state")
    def get_state() -> dict:
        return live.snapshot()

    @app.get("/schema/parameters")
    def get_schema() -> dict:
        return {
            obj: {name: {"lo": lo, "hi": hi, "default": default}
                  for name, (lo, hi, default) in params.items()}
            for obj, params in parameter_schema().items()}

    @app.get("/scenes")
    def get_scenes() -> list[str]:
        return sorted(live.engine.scenes)

    @app.post("/control/set")
    def control_set(req: SetRequest) -> SetReply:
        errors: list[str] = []
        done = _submit_and_wait(live, req.address, req.value, errors.append)
        if not done:
            return SetReply(ok=False, address=req.address,
                            error="engine did not apply the event in time")
        if errors:
            return SetReply(ok=False, address=req.address, error=errors[0])
        return SetReply(ok=True, address=req.address)

    @app.post("/render")
    def render(req: RenderRequest) -> RenderReply:
        config = override(live.config, seed=req.seed, scene=req.scene)
        try:
            report = render_offline(config, req.replay, req.out,
                                    breath_path=req.breath,
                                    profile=live.profile,
                                    duration_s=req.duration_s)
        except (ReplayError, FileNotFoundError, ValueError) as e:
            raise HTTPException(status_code=400, detail=str(e))
        return RenderReply(
            out=report.out_path, duration_s=report.duration_s,
            blocks=report.blocks, fault_count=report.fault_count,
            peak_dbfs=report.peak_dbfs, real_time_factor=report.rtf,
            scene_timeline=report.scene_timeline, warnings=report.warnings)

    @app.post("/analyze")
    def analyze(req: AnalyzeRequest) -> AnalyzeReply:
        try:
            frames = replay_frames(req.replay)
            profile = (CalibrationProfile.load(req.calibration)
                       if req.calibration else live.profile)
            features = analyze_frames(frames, profile)
        except (ReplayError, CalibrationError, FileNotFoundError) as e:
            raise HTTPException(status_code=400, detail=str(e))
        if req.out:
            write_feature_csv(features, req.out)
        return AnalyzeReply(rows=len(features), out=req.out)

    @app.post("/calibrate")
    def do_calibrate(req: CalibrateRequest) -> CalibrateReply:
        try:
            profile = calibrate(replay_frames(req.rest),
                                replay_frames(req.mvc))
            profile.save(req.out)
        except (ReplayError, CalibrationError, FileNotFoundError) as e:
            raise HTTPException(status_code=400, detail=str(e))
        return CalibrateReply(
            out=req.out,
            devices=sorted(d.value for d in profile.devices))

    @app.websocket("/ws")
    async def ws_endpoint(ws: WebSocket):
        await ws.accept()
        sid, queue = hub.add_session()
        await ws.send_text(json.dumps(
            {"type": "snapshot", "state": live.snapshot()}))

        async def pump():
            while True:
                await ws.send_text(await queue.get())

        pump_task = asyncio.create_task(pump())
        try:
            while True:
                raw = await ws.receive_text()
                _handle_inbound(live, hub, sid, raw)
        except WebSocketDisconnect:
            pass
        finally:
            pump_task.cancel()
            hub.drop_session(sid)

    return app


def _handle_inbound(live: LiveEngine, hub: SessionHub, sid: int, raw: str):
    try:
        msg = json.loads(raw)
    except json.JSONDecodeError as e:
        hub.send_to(sid, {"type": "error", "message": f"bad JSON: {e}"})
        return
    if not isinstance(msg, dict) or msg.get("type") != "set":
        hub.send_to(sid, {"type": "error",
                          "message": "expected {\"type\":\"set\",...}"})
        return
    address = msg.get("address")
    value = msg.get("value")
    if not isinstance(address, str) or not isinstance(
            value, (int, float, bool, str)):
        hub.send_to(sid, {"type": "error", "address": address,
                          "message": "set needs a string address and a "
                                     "number/bool/string value"})
        return
    if isinstance(value, bool):
        value = 1.0 if value else 0.0
    elif isinstance(value, (int, float)):
        value = float(value)
    try:
        ev = ControlEvent(source=Source.WS, address=address, value=value,
                          timestamp_us=time.monotonic_ns() // 1000)
    except ValueError as e:
        hub.send_to(sid, {"type": "error", "address": address,
                          "message": str(e)})
        return
    live.submit_control(ev, on_error=lambda err: hub.send_to(
        sid, {"type": "error", "address": address, "message": err}))


def _submit_and_wait(live: LiveEngine, address: str, value, on_error,
                     timeout_s: float = 1.0) -> bool:
    """Submit a control event and block until the engine consumed it."""
    import threading

    done = threading.Event()
    if isinstance(value, bool):
        value = 1.0 if value else 0.0
    elif isinstance(value, (int, float)):
        value = float(value)
    try:
        ev = ControlEvent(source=Source.WS, address=address, value=value,
                          timestamp_us=time.monotonic_ns() // 1000)
    except ValueError as e:
        on_error(str(e))
        return True
    live.submit_control(ev, on_error=on_error, on_done=done.set)
    return done.wait(timeout_s)


def serve(config: EngineConfig,
          profile: CalibrationProfile | None = None) -> None:
    """Blocking entry point: engine + control server until interrupted."""
    import uvicorn

    live = LiveEngine(config, profile)
    app = create_app(live)
    uvicorn.run(app, host=config.ws_host, port=config.ws_port,
                log_level="warning")
