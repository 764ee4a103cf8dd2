"""HTTP + WebSocket service for interactive sessions with live telemetry.

One session wraps one generator plus one consistency accumulator, so the
numbers streaming out of a live game are the same ones `evaluate` would
produce offline for the same action script. Sessions are isolated by a
per-session asyncio lock, and a registry sweep evicts anything idle for
ten minutes (the clock is injectable so tests can fake time).
"""

from __future__ import annotations

import asyncio
import base64
import io
import secrets
import time
from dataclasses import dataclass, field

import numpy as np
from fastapi import FastAPI, HTTPException, WebSocket, WebSocketDisconnect
from fastapi.middleware.cors import CORSMiddleware
from PIL import Image

from .engines.base import ExhaustedError
from .generators import Generator, GeneratorSpec, TraceEntry
from .metrics import ConsistencyAccumulator

IDLE_TIMEOUT = 600.0


def png_b64(arr: np.ndarray) -> str:
    buf = io.BytesIO()
    Image.fromarray(arr).save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")


@dataclass
class Session:
    sid: str
    spec: GeneratorSpec
    generator: Generator
    accumulator: ConsistencyAccumulator
    created_at: float
    last_used: float
    step_index: int = 0
    ended: bool = False
    lock: asyncio.Lock = field(default_factory=asyncio.Lock)


class SessionRegistry:
    def __init__(self, clock=time.monotonic, idle_timeout: float = IDLE_TIMEOUT):
        self._clock = clock
        self._idle_timeout = idle_timeout
        self._sessions: dict[str, Session] = {}

    def __len__(self) -> int:
        return len(self._sessions)

    def create(self, spec: GeneratorSpec) -> Session:
        now = self._clock()
        session = Session(
            sid=secrets.token_hex(8),
            spec=spec,
            generator=Generator(spec),
            accumulator=ConsistencyAccumulator(spec.game),
            created_at=now,
            last_used=now,
        )
        self._sessions[session.sid] = session
        return session

    def get(self, sid: str) -> Session:
        session = self._sessions[sid]
        session.last_used = self._clock()
        return session

    def remove(self, sid: str) -> None:
        del self._sessions[sid]

    def sweep(self) -> list[str]:
        now = self._clock()
        stale = [sid for sid, s in self._sessions.items()
                 if now - s.last_used > self._idle_timeout]
        for sid in stale:
            del self._sessions[sid]
        return stale


def _entry_payload(session: Session, entry: TraceEntry, telemetry: dict) -> dict:
    acc = session.accumulator
    player = acc.position_trail[-1] if acc.position_trail else None
    if isinstance(player, tuple):
        player = player[0] if len(player) == 1 else list(player)
    return {
        "type": "frame",
        "step": entry.step,
        "frame": png_b64(entry.frame),
        "score": telemetry["score_readback"],
        "event": bool(entry.true_event),
        "terminal": bool(entry.terminal),
        "player_x": player,
        "spacon_running": telemetry["spacon_running"],
        "numcon_running": telemetry["numcon_running"],
        "actacc_running": telemetry["actacc_running"],
        "ambiguous_match": telemetry["ambiguous_match"],
    }


def create_app(clock=time.monotonic, idle_timeout: float = IDLE_TIMEOUT) -> FastAPI:
    app = FastAPI(title="consistency harness session service")
    # the browser client is typically served from a separate static origin
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )
    registry = SessionRegistry(clock, idle_timeout)
    app.state.registry = registry

    def _lookup(sid: str) -> Session:
        registry.sweep()
        try:
            return registry.get(sid)
        except KeyError:
            raise HTTPException(status_code=404, detail="unknown session")

    @app.post("/sessions", status_code=201)
    async def create_session(body: dict):
        registry.sweep()
        spec_json = body.get("generator") or {
            k: v for k, v in body.items() if k in
            ("game", "seed", "kind", "p", "q", "engine_config")
        }
        try:
            spec = GeneratorSpec.from_json(spec_json)
            # construction enforces the game-specific constraints the
            # spec alone cannot see (slotless worlds reject reshuffle)
            session = registry.create(spec)
        except (ValueError, TypeError, KeyError) as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        async with session.lock:
            entry = session.generator.initial()
            telemetry = session.accumulator.observe(entry)
        payload = _entry_payload(session, entry, telemetry)
        payload.update(type="created", session_id=session.sid,
                       config=spec.to_json())
        return payload

    @app.get("/sessions/{sid}/map")
    async def get_map(sid: str):
        session = _lookup(sid)
        async with session.lock:
            wmap = session.accumulator.map
            if wmap is None:
                raise HTTPException(status_code=404,
                                    detail=f"{session.spec.game} has no map")
            meta = {
                "topology": wmap.topology,
                "origin": list(wmap.origin) if wmap.origin else None,
                "player_pos": list(wmap.player_pos) if wmap.player_pos else None,
                "linked": wmap.linked,
                "shape": list(wmap.pixels.shape) if not wmap.empty else None,
            }
            if wmap.empty:
                raise HTTPException(status_code=404, detail="map is empty")
            pixels = png_b64(wmap.pixels)
            mask = png_b64(wmap.observed.astype(np.uint8) * 255)
        return {"map": pixels, "mask": mask, "meta": meta}

    @app.get("/sessions/{sid}/report")
    async def get_report(sid: str):
        session = _lookup(sid)
        async with session.lock:
            acc = session.accumulator
            return {
                "game": session.spec.game,
                "generator": session.spec.to_json(),
                "steps": acc.steps,
                "numcon": acc.numcon(),
                "spacon": acc.spacon(),
                "actacc": acc.actacc(),
                "ambiguity_rate": acc.ambiguity_rate(),
                "counts": acc.counts(),
                "ended": session.ended,
            }

    @app.delete("/sessions/{sid}")
    async def delete_session(sid: str):
        _lookup(sid)
        registry.remove(sid)
        return {"deleted": sid}

    @app.websocket("/sessions/{sid}/stream")
    async def stream(ws: WebSocket, sid: str):
        registry.sweep()
        try:
            session = registry.get(sid)
        except KeyError:
            await ws.close(code=4404)
            return
        await ws.accept()
        try:
            while True:
                msg = await ws.receive_json()
                registry.get(sid)  # refresh idle clock
                mtype = msg.get("type")
                if mtype == "action":
                    await _handle_action(ws, session, msg)
                elif mtype == "update":
                    await _handle_update(ws, session, msg)
                else:
                    await ws.send_json(
                        {"type": "error", "message": f"unknown type {mtype!r}"}
                    )
        except (WebSocketDisconnect, KeyError):
            return

    async def _handle_action(ws: WebSocket, session: Session, msg: dict):
        action = msg.get("action")
        async with session.lock:
            if session.ended or session.generator.exhausted:
                session.ended = True
                await ws.send_json({"type": "ended", "step": session.step_index})
                return
            try:
                entry = session.generator.step(action)
            except ExhaustedError:
                session.ended = True
                await ws.send_json({"type": "ended", "step": session.step_index})
                return
            except (ValueError, TypeError) as exc:
                await ws.send_json({"type": "error", "message": str(exc)})
                return
            session.step_index = entry.step
            telemetry = session.accumulator.observe(entry)
        await ws.send_json(_entry_payload(session, entry, telemetry))

    async def _handle_update(ws: WebSocket, session: Session, msg: dict):
        async with session.lock:
            p = msg.get("p", session.generator.p)
            q = msg.get("q", session.generator.q)
            try:
                session.generator.set_corruption(p=p, q=q)
            except (ValueError, TypeError) as exc:
                await ws.send_json({"type": "error", "message": str(exc)})
                return
        await ws.send_json({"type": "updated", "p": p, "q": q})

    return app


app = create_app()
