"""WebSocket transport for a simulation session.

One session per process, any number of clients; every client message is a
protocol JSON object (see service.py). "subscribe" answers with a meta
message and attaches a frame subscription; anything else is handled by the
session and acked. Frames queue per connection (bounded, oldest dropped)
and a per-connection pump task streams them in order.
"""

import asyncio
import contextlib
import os

from fastapi import FastAPI, WebSocket, WebSocketDisconnect

from .service import CommandError

DEFAULT_PORT = 8765
PORT_ENV_VAR = "SMOKEFORGE_PORT"


def default_port():
    return int(os.environ.get(PORT_ENV_VAR, DEFAULT_PORT))


def build_app(session, step_interval=None):
    """FastAPI app around one Session. With step_interval set, a background
    task advances the simulation at that rate while the session is running
    (resume/pause commands toggle it)."""
    app = FastAPI()
    app.state.session = session

    if step_interval is not None:
        @app.on_event("startup")
        async def _start_runner():
            async def run():
                while True:
                    await asyncio.sleep(step_interval)
                    if session.running:
                        session.step_once()
            app.state.runner = asyncio.create_task(run())

        @app.on_event("shutdown")
        async def _stop_runner():
            runner = getattr(app.state, "runner", None)
            if runner is not None:
                runner.cancel()
                with contextlib.suppress(asyncio.CancelledError):
                    await runner

    @app.websocket("/ws")
    async def ws_endpoint(sock: WebSocket):
        await sock.accept()
        sub = None
        send_lock = asyncio.Lock()

        async def drain():
            while sub is not None and sub.queue:
                msg, payload = sub.queue.popleft()
                async with send_lock:
                    await sock.send_json(msg)
                    if payload is not None:
                        await sock.send_bytes(payload)

        async def pump():
            while True:
                await asyncio.sleep(0.02)
                await drain()

        pump_task = asyncio.create_task(pump())
        try:
            while True:
                raw = await sock.receive_json()
                if isinstance(raw, dict) and raw.get("cmd") == "subscribe":
                    try:
                        if sub is not None:
                            session.unsubscribe(sub)
                        sub = session.subscribe(raw.get("params") or {})
                        reply = session.meta_message()
                        reply["seq"] = raw.get("seq")
                    except (CommandError, ValueError, TypeError) as exc:
                        reply = {"type": "error", "seq": raw.get("seq"),
                                 "reason": str(exc)}
                    async with send_lock:
                        await sock.send_json(reply)
                else:
                    ack = session.handle_message(raw)
                    async with send_lock:
                        await sock.send_json(ack.to_message())
                await drain()
        except WebSocketDisconnect:
            pass
        finally:
            pump_task.cancel()
            with contextlib.suppress(asyncio.CancelledError):
                await pump_task
            if sub is not None:
                session.unsubscribe(sub)

    return app


def serve(session, host="127.0.0.1", port=None, step_interval=1.0 / 30.0):
    import uvicorn

    app = build_app(session, step_interval=step_interval)
    uvicorn.run(app, host=host, port=port if port is not None else default_port())
