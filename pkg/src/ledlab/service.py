"""Optional in-process HTTP wrapper around the commands (``pip install .[service]``).

Requests carry the same schema as the TOML files.  Runs are synchronous and
nothing is persisted; use it with ``fastapi.testclient`` or any ASGI server.
"""

from __future__ import annotations

from datetime import datetime, timezone

from .commands import run
from .config import COMMANDS, gallery_names, load_gallery, parse_config
from .errors import ConfigError
from .io import jsonable

try:
    from fastapi import FastAPI, HTTPException
except ImportError as exc:  # pragma: no cover - exercised only without the extra
    raise ImportError("ledlab.service needs the 'service' extra (fastapi)") from exc


def create_app():
    app = FastAPI(title="ledlab", description="Local energy decay laboratory")

    @app.get("/commands")
    def commands():
        return {"commands": list(COMMANDS), "gallery": gallery_names()}

    @app.get("/gallery/{name}")
    def gallery(name: str):
        try:
            cfg = load_gallery(name)
        except ConfigError as exc:
            raise HTTPException(404, {"path": exc.path, "message": exc.message}) from None
        return cfg.model_dump(mode="json", exclude={"base_dir"})

    @app.post("/run/{command}")
    def run_command(command: str, config: dict, threads: int = 1):
        try:
            cfg = parse_config(config)
            outcome = run(command, cfg, threads=threads)
        except ConfigError as exc:
            raise HTTPException(422, {"path": exc.path, "message": exc.message}) from None
        stamp = datetime.now(timezone.utc).isoformat(timespec="seconds")
        body = outcome.report(cfg, stamp)
        body["tables"] = {name: rows for name, rows in outcome.tables.items()}
        return jsonable(body)

    return app
